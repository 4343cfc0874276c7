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

#ifndef IPF_ASYMPTOTICS_HPP_
#define IPF_ASYMPTOTICS_HPP_

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ipf/error.hpp"
#include "ipf/fk.hpp"

/**
 * \file
 * \brief Exact asymptotic bias and variance constants on finite models.
 *
 * For a test function f with fbar = f - eta_n(f):
 *
 *   B       = -sum_p eta_p[ Qbar_{p,n}(1) Qbar_{p,n}(fbar) ]
 *   V       =  sum_p eta_p[ Qbar_{p,n}(fbar)^2 ]
 *   V_tilde =  sum_l (n - l) eta_l[ Qbar_{l,n}(fbar)^2 ]
 *   B_tilde = -sum_l (n - l) eta_l[ (Qbar_{l,n}(1) - 1) Qbar_{l,n}(fbar) ]
 *             + sum_l eta_l[ (sum_{p=l..n} (Qbar_{l,p}(1) - 1)) Qbar_{l,n}(fbar) ]
 *
 * The single-island bootstrap filter has bias ~ B/N1 and variance ~ V/N1; the
 * double bootstrap adds B_tilde/(N1 N2) and V_tilde/(N1 N2).
 */

namespace ipf {

struct AsymptoticConstants {
  double bias = 0.0;            ///< B
  double variance = 0.0;        ///< V
  double bias_tilde = 0.0;      ///< B_tilde
  double variance_tilde = 0.0;  ///< V_tilde
  std::size_t horizon = 0;
  std::string function;
};

namespace detail {

inline Vector centered(const std::vector<FlowStep>& flow, const Vector& f) {
  return (f.array() - flow.back().eta(f)).matrix();
}

inline double integrate(const FlowStep& step, const Vector& h) { return step.eta(h); }

}  // namespace detail

/// (B, V) of the single-island bootstrap filter.
[[nodiscard]] inline std::pair<double, double> single_constants(const FiniteModel& model, const Vector& f) {
  const std::vector<FlowStep> flow = exact_flow(model);
  const std::size_t n = model.horizon();
  const Vector fbar = detail::centered(flow, f);
  const Vector one = Vector::Ones(model.states());
  double b = 0.0;
  double v = 0.0;
  for (std::size_t p = 0; p <= n; ++p) {
    const KernelMatrix q = qbar_kernel(model, flow, p, n);
    const Vector qf = q.apply(fbar);
    const Vector q1 = q.apply(one);
    b -= detail::integrate(flow[p], q1.cwiseProduct(qf));
    v += detail::integrate(flow[p], qf.cwiseAbs2());
  }
  return {b, v};
}

/// (B_tilde, V_tilde) of the double bootstrap.
[[nodiscard]] inline std::pair<double, double> island_constants(const FiniteModel& model, const Vector& f) {
  const std::vector<FlowStep> flow = exact_flow(model);
  const std::size_t n = model.horizon();
  const Vector fbar = detail::centered(flow, f);
  const Vector one = Vector::Ones(model.states());
  double bt = 0.0;
  double vt = 0.0;
  for (std::size_t l = 0; l <= n; ++l) {
    const double weight = static_cast<double>(n - l);
    const Vector qf = qbar_kernel(model, flow, l, n).apply(fbar);
    const Vector q1 = qbar_kernel(model, flow, l, n).apply(one);
    vt += weight * detail::integrate(flow[l], qf.cwiseAbs2());
    bt -= weight * detail::integrate(flow[l], (q1 - one).cwiseProduct(qf));
    Vector excess = Vector::Zero(model.states());
    for (std::size_t p = l; p <= n; ++p) {
      excess += qbar_kernel(model, flow, l, p).apply(one) - one;
    }
    bt += detail::integrate(flow[l], excess.cwiseProduct(qf));
  }
  return {bt, vt};
}

[[nodiscard]] inline AsymptoticConstants asymptotic_constants(const FiniteModel& model, const Vector& f,
                                                              std::string name = {}) {
  const auto [b, v] = single_constants(model, f);
  const auto [bt, vt] = island_constants(model, f);
  return {b, v, bt, vt, model.horizon(), std::move(name)};
}

/// eta_{p-1}[ S M_p f^2 - (S M_p f)^2 ] with S the eps-selection kernel at eta_{p-1}.
[[nodiscard]] inline double epsilon_local_variance(const FiniteModel& model, double eps, std::size_t p,
                                                   const Vector& f) {
  if (p < 1 || p > model.horizon()) {
    fail(Errc::index_order, "epsilon_local_variance needs 1 <= p <= n (p = " + std::to_string(p) + ")");
  }
  const std::vector<FlowStep> flow = exact_flow(model);
  const Matrix s = epsilon_selection_kernel(flow[p - 1].eta, model.potential(p - 1), eps);
  const Matrix sm = s * model.transition(p);
  const Vector second = sm * f.cwiseAbs2();
  const Vector first = sm * f;
  return flow[p - 1].eta(second - first.cwiseAbs2());
}

enum class IslandMode { independent, interacting };

/// Leading-order MSE of the island estimator of eta_n(f).
[[nodiscard]] inline double mse_predict(const AsymptoticConstants& c, std::size_t n1, std::size_t n2,
                                        IslandMode mode) {
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  if (mode == IslandMode::independent) {
    return c.variance / (a * b) + c.bias * c.bias / (a * a);
  }
  return (c.variance + c.variance_tilde) / (a * b);
}

/// B^2 N2 / V_tilde: interaction is predicted to win iff N1 is below this.
[[nodiscard]] inline double crossover_n1(const AsymptoticConstants& c, std::size_t n2) {
  if (!(c.variance_tilde > 0.0)) {
    fail(Errc::degenerate_vtilde, "V_tilde = 0, the crossover threshold is undefined");
  }
  return c.bias * c.bias * static_cast<double>(n2) / c.variance_tilde;
}

/// crossover_n1 with the degenerate case resolved: +inf when B != 0, 0 when B = 0.
[[nodiscard]] inline double crossover_threshold(const AsymptoticConstants& c, std::size_t n2) {
  try {
    return crossover_n1(c, n2);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_vtilde) {
      throw;
    }
    return c.bias != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
}

}  // namespace ipf

#endif  // IPF_ASYMPTOTICS_HPP_
