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

#ifndef IPF_ERROR_HPP_
#define IPF_ERROR_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ipf {

enum class Errc {
  zero_mass,
  extinction,
  index_order,
  epsilon_out_of_range,
  unsupported,
  invalid_tables,
  degenerate_vtilde,
  missing_cell,
  config,
};

[[nodiscard]] constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::zero_mass: return "ZeroMass";
    case Errc::extinction: return "Extinction";
    case Errc::index_order: return "IndexOrder";
    case Errc::epsilon_out_of_range: return "EpsilonOutOfRange";
    case Errc::unsupported: return "Unsupported";
    case Errc::invalid_tables: return "InvalidTables";
    case Errc::degenerate_vtilde: return "DegenerateVtilde";
    case Errc::missing_cell: return "MissingCell";
    case Errc::config: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `step()` is set when the failure happened
/// inside a particle run.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what), step_(step) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  /// what() without the leading error name.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }
  [[nodiscard]] std::optional<std::size_t> step() const noexcept { return step_; }

  [[nodiscard]] Error at_step(std::size_t step) const {
    Error copy = *this;
    copy.step_ = step;
    return copy;
  }

 private:
  Errc code_;
  std::string message_;
  std::optional<std::size_t> step_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace ipf

#endif  // IPF_ERROR_HPP_
