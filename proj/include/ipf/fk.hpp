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

#ifndef IPF_FK_HPP_
#define IPF_FK_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipf/error.hpp"

/**
 * \file
 * \brief Finite-state Feynman-Kac models and their exact flows.
 *
 * A model on d states is given by an initial law, transition matrices M_1..M_n
 * and potential vectors g_0..g_n. Measures are row vectors, functions are column
 * vectors, and a kernel K acts on a function f as K * f.
 */

namespace ipf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTolerance = 1e-12;

/// Probability vector over the states of a finite model.
class Distribution {
 public:
  Distribution() = default;

  /// Validates nonnegativity and unit mass (within 1e-12).
  explicit Distribution(Vector probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) {
      fail(Errc::invalid_tables, "empty distribution");
    }
    if ((probs_.array() < 0.0).any()) {
      fail(Errc::invalid_tables, "distribution has a negative entry");
    }
    if (std::abs(probs_.sum() - 1.0) > kStochasticTolerance) {
      fail(Errc::invalid_tables, "distribution does not sum to one");
    }
  }

  [[nodiscard]] const Vector& probs() const noexcept { return probs_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return probs_.size(); }

  /// mu(f).
  [[nodiscard]] double operator()(const Vector& f) const { return probs_.dot(f); }

 private:
  Vector probs_;
};

/// Nonnegative d x d matrix standing for a kernel from step `from_step` to `to_step`.
struct KernelMatrix {
  Matrix entries;
  std::size_t from_step = 0;
  std::size_t to_step = 0;

  [[nodiscard]] Vector apply(const Vector& f) const { return entries * f; }
};

class FiniteModel {
 public:
  FiniteModel() = default;

  /// `transitions[p - 1]` is M_p for p = 1..n and `potentials[p]` is g_p for p = 0..n.
  FiniteModel(Vector eta0, std::vector<Matrix> transitions, std::vector<Vector> potentials)
      : eta0_(std::move(eta0)), transitions_(std::move(transitions)), potentials_(std::move(potentials)) {
    validate();
  }

  [[nodiscard]] Eigen::Index states() const noexcept { return eta0_.size(); }
  [[nodiscard]] std::size_t horizon() const noexcept { return transitions_.size(); }
  [[nodiscard]] const Vector& initial() const noexcept { return eta0_; }

  /// M_p, 1 <= p <= n.
  [[nodiscard]] const Matrix& transition(std::size_t p) const { return transitions_.at(p - 1); }

  /// g_p, 0 <= p <= n.
  [[nodiscard]] const Vector& potential(std::size_t p) const { return potentials_.at(p); }

  [[nodiscard]] const std::vector<Matrix>& transitions() const noexcept { return transitions_; }
  [[nodiscard]] const std::vector<Vector>& potentials() const noexcept { return potentials_; }

 private:
  void validate() const {
    const Eigen::Index d = eta0_.size();
    if (d < 1) {
      fail(Errc::invalid_tables, "model needs at least one state");
    }
    (void)Distribution(eta0_);
    if (potentials_.size() != transitions_.size() + 1) {
      fail(Errc::invalid_tables, "expected n + 1 = " + std::to_string(transitions_.size() + 1) +
                                     " potential vectors, got " + std::to_string(potentials_.size()));
    }
    for (std::size_t p = 0; p < transitions_.size(); ++p) {
      const Matrix& m = transitions_[p];
      if (m.rows() != d || m.cols() != d) {
        fail(Errc::invalid_tables, "transition " + std::to_string(p + 1) + " is not " + std::to_string(d) +
                                       "x" + std::to_string(d));
      }
      if ((m.array() < 0.0).any()) {
        fail(Errc::invalid_tables, "transition " + std::to_string(p + 1) + " has a negative entry");
      }
      const Vector rows = m.rowwise().sum();
      if (((rows.array() - 1.0).abs() > kStochasticTolerance).any()) {
        fail(Errc::invalid_tables, "transition " + std::to_string(p + 1) + " is not row-stochastic");
      }
    }
    for (std::size_t p = 0; p < potentials_.size(); ++p) {
      if (potentials_[p].size() != d) {
        fail(Errc::invalid_tables, "potential " + std::to_string(p) + " has wrong length");
      }
      if ((potentials_[p].array() < 0.0).any() || !potentials_[p].allFinite()) {
        fail(Errc::invalid_tables, "potential " + std::to_string(p) + " must be finite and nonnegative");
      }
    }
  }

  Vector eta0_;
  std::vector<Matrix> transitions_;
  std::vector<Vector> potentials_;
};

/// Psi_g(mu)_i = g_i mu_i / mu(g).
[[nodiscard]] inline Distribution boltzmann_gibbs(const Distribution& mu, const Vector& g) {
  const double mass = mu(g);
  if (!(mass > 0.0)) {
    fail(Errc::zero_mass, "mu(g) = 0 in Boltzmann-Gibbs transform");
  }
  Vector out = mu.probs().cwiseProduct(g) / mass;
  // Renormalize away the rounding of the division so the result stays a Distribution.
  out /= out.sum();
  return Distribution(std::move(out));
}

struct FlowStep {
  Distribution eta;
  double log_gamma1 = 0.0;  ///< log gamma_p(1)

  [[nodiscard]] double gamma1() const { return std::exp(log_gamma1); }
};

/// eta_0..eta_n and gamma_0(1)..gamma_n(1) by eta_{p+1} = Psi_p(eta_p) M_{p+1}.
[[nodiscard]] inline std::vector<FlowStep> exact_flow(const FiniteModel& model) {
  std::vector<FlowStep> flow;
  flow.reserve(model.horizon() + 1);
  flow.push_back({Distribution(model.initial()), 0.0});
  for (std::size_t p = 0; p < model.horizon(); ++p) {
    const FlowStep& cur = flow.back();
    const double mass = cur.eta(model.potential(p));
    if (!(mass > 0.0)) {
      throw Error(Errc::extinction, "eta_p(g_p) = 0 at step " + std::to_string(p), p);
    }
    Vector selected = cur.eta.probs().cwiseProduct(model.potential(p)) / mass;
    Vector next = (selected.transpose() * model.transition(p + 1)).transpose();
    next /= next.sum();
    flow.push_back({Distribution(std::move(next)), cur.log_gamma1 + std::log(mass)});
  }
  return flow;
}

/// Q_{p,n} = Q_{p+1} ... Q_n with Q_{l+1} = diag(g_l) M_{l+1}; identity when p = n.
[[nodiscard]] inline KernelMatrix q_kernel(const FiniteModel& model, std::size_t p, std::size_t n) {
  if (p > n) {
    fail(Errc::index_order, "q_kernel requires p <= n (p = " + std::to_string(p) + ", n = " + std::to_string(n) + ")");
  }
  if (n > model.horizon()) {
    fail(Errc::index_order, "q_kernel step " + std::to_string(n) + " beyond horizon");
  }
  const Eigen::Index d = model.states();
  Matrix q = Matrix::Identity(d, d);
  for (std::size_t l = p; l < n; ++l) {
    q = q * (model.potential(l).asDiagonal() * model.transition(l + 1));
  }
  return {std::move(q), p, n};
}

/// Qbar_{p,n} = Q_{p,n} / eta_p Q_{p,n}(1), built backwards as
/// Qbar_{p,n} = diag(g_p) M_{p+1} Qbar_{p+1,n} / eta_p(g_p).
[[nodiscard]] inline KernelMatrix qbar_kernel(const FiniteModel& model, std::span<const FlowStep> flow,
                                              std::size_t p, std::size_t n) {
  if (p > n) {
    fail(Errc::index_order, "qbar_kernel requires p <= n (p = " + std::to_string(p) + ", n = " + std::to_string(n) +
                                ")");
  }
  if (n >= flow.size()) {
    fail(Errc::index_order, "qbar_kernel step " + std::to_string(n) + " beyond computed flow");
  }
  const Eigen::Index d = model.states();
  Matrix q = Matrix::Identity(d, d);
  for (std::size_t l = n; l-- > p;) {
    const double mass = flow[l].eta(model.potential(l));
    if (!(mass > 0.0)) {
      throw Error(Errc::extinction, "eta_p(g_p) = 0 at step " + std::to_string(l), l);
    }
    q = (model.potential(l).asDiagonal() * model.transition(l + 1)) * q / mass;
  }
  return {std::move(q), p, n};
}

[[nodiscard]] inline KernelMatrix qbar_kernel(const FiniteModel& model, std::size_t p, std::size_t n) {
  const auto flow = exact_flow(model);
  return qbar_kernel(model, flow, p, n);
}

/**
 * Partial-resampling kernel S(x, .) = eps g(x) delta_x + (1 - eps g(x)) Psi_g(mu).
 * Requires eps >= 0 and eps * g <= 1 on every state.
 */
[[nodiscard]] inline Matrix epsilon_selection_kernel(const Distribution& mu, const Vector& g, double eps) {
  if (!(eps >= 0.0)) {
    fail(Errc::epsilon_out_of_range, "epsilon must be nonnegative");
  }
  const Vector keep = eps * g;
  if ((keep.array() > 1.0 + 1e-12).any()) {
    fail(Errc::epsilon_out_of_range, "epsilon * g exceeds one");
  }
  const Distribution psi = boltzmann_gibbs(mu, g);
  Matrix s = (Vector::Ones(g.size()) - keep) * psi.probs().transpose();
  s.diagonal() += keep;
  return s;
}

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/**
 * Predictive laws of X_p given Y_0..Y_{p-1} for X_{p+1} = phi X_p + sigma_u U_p,
 * Y_p = X_p + sigma_v V_p with stationary X_0. Returns observations.size() + 1 entries.
 */
[[nodiscard]] inline std::vector<GaussianMoments> kalman_predictive(double phi, double sigma_u, double sigma_v,
                                                                    std::span<const double> observations) {
  if (!(std::abs(phi) < 1.0) || !(sigma_u > 0.0) || !(sigma_v > 0.0)) {
    fail(Errc::config, "Kalman recursion needs |phi| < 1 and positive noise scales");
  }
  std::vector<GaussianMoments> out;
  out.reserve(observations.size() + 1);
  GaussianMoments pred{0.0, sigma_u * sigma_u / (1.0 - phi * phi)};
  out.push_back(pred);
  const double obs_var = sigma_v * sigma_v;
  for (const double y : observations) {
    const double gain = pred.variance / (pred.variance + obs_var);
    const double filt_mean = pred.mean + gain * (y - pred.mean);
    const double filt_var = (1.0 - gain) * pred.variance;
    pred = {phi * filt_mean, phi * phi * filt_var + sigma_u * sigma_u};
    out.push_back(pred);
  }
  return out;
}

}  // namespace ipf

#endif  // IPF_FK_HPP_
