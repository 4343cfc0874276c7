// Copyright 2026 The ipf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IPF_PARALLEL_HPP_
#define IPF_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ipf {

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Indices are handed
/// out dynamically; fn must only write state owned by index i. After all threads
/// finish, the exception of the lowest failing index is rethrown, so the reported
/// failure does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::size_t error_index = count;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error = std::current_exception();
          error_index = i;
        }
        next.store(count);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto threads = std::min<std::size_t>(workers, count);
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(body);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace ipf

#endif  // IPF_PARALLEL_HPP_
