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

#ifndef IPF_NUMERIC_HPP_
#define IPF_NUMERIC_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace ipf {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  [[nodiscard]] double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// log(mean(exp(v))) without overflow; -inf for an empty or all -inf input.
[[nodiscard]] inline double log_mean_exp(std::span<const double> values) noexcept {
  if (values.empty()) {
    return -std::numeric_limits<double>::infinity();
  }
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) {
    return top;
  }
  CompensatedSum acc;
  for (const double v : values) {
    acc.add(std::exp(v - top));
  }
  return top + std::log(acc.value() / static_cast<double>(values.size()));
}

}  // namespace ipf

#endif  // IPF_NUMERIC_HPP_
