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

#ifndef IPF_FUNCTIONS_HPP_
#define IPF_FUNCTIONS_HPP_

#include <charconv>
#include <cmath>
#include <numbers>
#include <functional>
#include <string>
#include <string_view>
#include <utility>

#include "ipf/error.hpp"

namespace ipf {

/// Named real test function f(x). Finite-model states are passed as their index.
struct TestFunction {
  std::string name;
  std::function<double(double)> fn;
  /// E f(X) for X ~ Normal(mean, variance), when known in closed form.
  std::function<double(double, double)> gaussian_mean;

  double operator()(double x) const { return fn(x); }
};

namespace detail {

inline double parse_double(std::string_view text, std::string_view context) {
  while (!text.empty() && text.front() == ' ') {
    text.remove_prefix(1);
  }
  while (!text.empty() && text.back() == ' ') {
    text.remove_suffix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(Errc::config, "cannot parse number '" + std::string(text) + "' in " + std::string(context));
  }
  return value;
}

}  // namespace detail

inline TestFunction identity_function() {
  return {"identity", [](double x) { return x; }, [](double m, double /*v*/) { return m; }};
}

inline TestFunction square_function() {
  return {"square", [](double x) { return x * x; }, [](double m, double v) { return v + m * m; }};
}

/// 1{a <= x <= b}.
inline TestFunction indicator_function(double a, double b) {
  std::string name = "indicator(";
  name += std::to_string(a);
  name += ',';
  name += std::to_string(b);
  name += ')';
  const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  return {std::move(name), [a, b](double x) { return (x >= a && x <= b) ? 1.0 : 0.0; },
          [a, b, cdf](double m, double v) {
            if (b < a) {
              return 0.0;
            }
            const double s = std::sqrt(v);
            return cdf((b - m) / s) - cdf((a - m) / s);
          }};
}

/// Parses "identity", "square" or "indicator(a,b)". The parsed function keeps the
/// caller's spelling as its name.
inline TestFunction parse_test_function(std::string_view spec) {
  if (spec == "identity") {
    return identity_function();
  }
  if (spec == "square") {
    return square_function();
  }
  constexpr std::string_view prefix = "indicator(";
  if (spec.starts_with(prefix) && spec.ends_with(")")) {
    const std::string_view args = spec.substr(prefix.size(), spec.size() - prefix.size() - 1);
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) {
      fail(Errc::config, "indicator needs two bounds: '" + std::string(spec) + "'");
    }
    const double a = detail::parse_double(args.substr(0, comma), spec);
    const double b = detail::parse_double(args.substr(comma + 1), spec);
    TestFunction f = indicator_function(a, b);
    f.name = std::string(spec);
    return f;
  }
  fail(Errc::config, "unknown test function '" + std::string(spec) + "'");
}

}  // namespace ipf

#endif  // IPF_FUNCTIONS_HPP_
