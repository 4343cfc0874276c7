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

#ifndef IPF_RNG_HPP_
#define IPF_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

/**
 * \file
 * \brief Counter-based random streams.
 *
 * Every random draw in a run comes from a Philox4x32-10 block cipher keyed by the
 * replication seed. The three upper counter words name the stream (step, island,
 * purpose), so the numbers an island consumes at a given step do not depend on
 * how work is scheduled across threads.
 */

namespace ipf {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  [[nodiscard]] static constexpr counter_type encrypt(counter_type ctr, key_type key) noexcept {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr counter_type round(const counter_type& c, const key_type& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finalizer; used to fold structured identifiers into one 64-bit seed.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives a child seed from a master seed and a path of indices, e.g.
/// `derive_seed(master, {cell, rep})`.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master,
                                                  std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(master);
  for (const std::uint64_t v : path) {
    h = mix64(h ^ mix64(v + 0x632BE59BD9B4E019ull));
  }
  return h;
}

/// Purpose tags for the fourth counter word.
enum class StreamPurpose : std::uint32_t {
  initial = 0,
  within = 1,
  across = 2,
  auxiliary = 3,
};

/**
 * One independent random stream. Satisfies UniformRandomBitGenerator with 32-bit
 * output; `uniform()` and `normal()` are the draws the library actually uses.
 */
class Stream {
 public:
  using result_type = std::uint32_t;

  Stream() noexcept : Stream(0, 0, 0, 0) {}

  Stream(std::uint64_t seed, std::uint32_t word1, std::uint32_t word2, std::uint32_t word3) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, word1, word2, word3} {}

  /// Stream for (seed, step, island, purpose).
  static Stream for_island(std::uint64_t seed, std::size_t step, std::size_t island,
                           StreamPurpose purpose) noexcept {
    return Stream(seed, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(island),
                  static_cast<std::uint32_t>(purpose));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (used_ == 4) {
      refill();
    }
    return buffer_[used_++];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    const std::uint64_t a = (*this)() >> 5;
    const std::uint64_t b = (*this)() >> 6;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * 0x1.0p-53;
  }

  /// Uniform on [0, 1) with 32 random bits; one word instead of two.
  double uniform32() noexcept { return static_cast<double>((*this)()) * 0x1.0p-32; }

  /// Uniform on (0, 1).
  double uniform_open() noexcept {
    double u = uniform();
    while (u == 0.0) {
      u = uniform();
    }
    return u;
  }

  /// Standard normal by the polar method; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  void refill() noexcept {
    buffer_ = Philox4x32::encrypt(counter_, key_);
    ++counter_[0];
    used_ = 0;
  }

  Philox4x32::key_type key_;
  Philox4x32::counter_type counter_;
  Philox4x32::counter_type buffer_{};
  unsigned used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ipf

#endif  // IPF_RNG_HPP_
