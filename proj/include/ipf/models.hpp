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

#ifndef IPF_MODELS_HPP_
#define IPF_MODELS_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipf/error.hpp"
#include "ipf/fk.hpp"
#include "ipf/functions.hpp"
#include "ipf/rng.hpp"

namespace ipf {

/**
 * A Feynman-Kac problem that can be sampled: eta_0, the kernels M_{p+1} through
 * `mutate(p, x, rng)` for 0 <= p < n, and the potentials G_p. `sup_bound(p)`
 * optionally bounds G_p from above.
 */
template <class M>
concept FeynmanKacModel = requires(const M& m, const typename M::state_type& x, std::size_t p, Stream& rng) {
  typename M::state_type;
  { m.horizon() } -> std::convertible_to<std::size_t>;
  { m.sample_initial(rng) } -> std::same_as<typename M::state_type>;
  { m.mutate(p, x, rng) } -> std::same_as<typename M::state_type>;
  { m.potential(p, x) } -> std::convertible_to<double>;
  { m.sup_bound(p) } -> std::same_as<std::optional<double>>;
};

/// Models whose kernels can be integrated exactly: `next_expectation(p, f)[x]` is
/// (M_{p+1} f)(x).
template <class M>
concept ExactKernelModel = FeynmanKacModel<M> && requires(const M& m, std::size_t p, const TestFunction& f) {
  { m.next_expectation(p, f) } -> std::convertible_to<Vector>;
};

/// Sampling view of a FiniteModel. States are indices 0..d-1.
class FiniteHmm {
 public:
  using state_type = std::uint32_t;

  explicit FiniteHmm(FiniteModel model) : model_(std::move(model)), d_(static_cast<std::size_t>(model_.states())) {
    initial_cdf_ = cumulative(model_.initial());
    for (const Matrix& m : model_.transitions()) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const std::vector<double> row = cumulative(m.row(r).transpose());
        transition_cdfs_.insert(transition_cdfs_.end(), row.begin(), row.end());
      }
    }
    for (const Vector& g : model_.potentials()) {
      potentials_.insert(potentials_.end(), g.data(), g.data() + g.size());
      sup_bounds_.push_back(g.maxCoeff());
    }
  }

  [[nodiscard]] const FiniteModel& model() const noexcept { return model_; }
  [[nodiscard]] std::size_t horizon() const noexcept { return model_.horizon(); }

  state_type sample_initial(Stream& rng) const { return draw(initial_cdf_.data(), rng); }

  state_type mutate(std::size_t p, state_type x, Stream& rng) const {
    return draw(transition_cdfs_.data() + (p * d_ + x) * d_, rng);
  }

  [[nodiscard]] double potential(std::size_t p, state_type x) const { return potentials_[p * d_ + x]; }

  [[nodiscard]] std::optional<double> sup_bound(std::size_t p) const { return sup_bounds_[p]; }

  [[nodiscard]] Vector next_expectation(std::size_t p, const TestFunction& f) const {
    return model_.transition(p + 1) * values(f);
  }

  /// f evaluated on every state.
  [[nodiscard]] Vector values(const TestFunction& f) const {
    Vector v(model_.states());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v[i] = f(static_cast<double>(i));
    }
    return v;
  }

 private:
  static std::vector<double> cumulative(const Vector& probs) {
    std::vector<double> cdf(static_cast<std::size_t>(probs.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf[static_cast<std::size_t>(i)] = acc;
    }
    return cdf;
  }

  // Inverse-cdf draw by linear scan; d is small.
  state_type draw(const double* cdf, Stream& rng) const {
    const double u = rng.uniform32() * cdf[d_ - 1];
    std::size_t i = 0;
    while (i + 1 < d_ && u >= cdf[i]) {
      ++i;
    }
    return static_cast<state_type>(i);
  }

  FiniteModel model_;
  std::size_t d_ = 0;
  std::vector<double> initial_cdf_;
  std::vector<double> transition_cdfs_;  ///< row x of M_{p+1} at offset (p d + x) d
  std::vector<double> potentials_;       ///< g_p at offset p d
  std::vector<double> sup_bounds_;
};

static_assert(ExactKernelModel<FiniteHmm>);

namespace detail {

inline double normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sd);
}

}  // namespace detail

struct LgmParams {
  double phi = 0.9;
  double sigma_u = 0.6;
  double sigma_v = 1.0;
  std::vector<double> observations;
};

/// X_{p+1} = phi X_p + sigma_u U, Y_p = X_p + sigma_v V; G_p is the density of y_p.
class LinearGaussianModel {
 public:
  using state_type = double;

  explicit LinearGaussianModel(LgmParams params) : params_(std::move(params)) {
    if (!(std::abs(params_.phi) < 1.0) || !(params_.sigma_u > 0.0) || !(params_.sigma_v > 0.0)) {
      fail(Errc::config, "LGM needs |phi| < 1, sigma_u > 0 and sigma_v > 0");
    }
    stationary_sd_ = params_.sigma_u / std::sqrt(1.0 - params_.phi * params_.phi);
  }

  [[nodiscard]] const LgmParams& params() const noexcept { return params_; }
  [[nodiscard]] std::size_t horizon() const noexcept { return params_.observations.size(); }

  double sample_initial(Stream& rng) const { return stationary_sd_ * rng.normal(); }

  double mutate(std::size_t /*p*/, double x, Stream& rng) const {
    return params_.phi * x + params_.sigma_u * rng.normal();
  }

  [[nodiscard]] double potential(std::size_t p, double x) const {
    return detail::normal_density(params_.observations[p], x, params_.sigma_v);
  }

  [[nodiscard]] std::optional<double> sup_bound(std::size_t /*p*/) const {
    return 1.0 / (std::sqrt(2.0 * std::numbers::pi) * params_.sigma_v);
  }

 private:
  LgmParams params_;
  double stationary_sd_ = 1.0;
};

struct SvParams {
  double alpha = 0.98;
  double sigma = 0.5;
  double beta = 1.0;
  std::vector<double> observations;
};

/**
 * X_{p+1} = alpha X_p + sigma U, Y_p = beta exp(X_p / 2) V. The potential is the
 * Normal(0, beta^2 e^x) density of y_p.
 */
class StochasticVolatilityModel {
 public:
  using state_type = double;

  explicit StochasticVolatilityModel(SvParams params) : params_(std::move(params)) {
    if (!(std::abs(params_.alpha) < 1.0) || !(params_.sigma > 0.0) || !(params_.beta > 0.0)) {
      fail(Errc::config, "SV needs |alpha| < 1, sigma > 0 and beta > 0");
    }
    stationary_sd_ = params_.sigma / std::sqrt(1.0 - params_.alpha * params_.alpha);
  }

  [[nodiscard]] const SvParams& params() const noexcept { return params_; }
  [[nodiscard]] std::size_t horizon() const noexcept { return params_.observations.size(); }

  double sample_initial(Stream& rng) const { return stationary_sd_ * rng.normal(); }

  double mutate(std::size_t /*p*/, double x, Stream& rng) const {
    return params_.alpha * x + params_.sigma * rng.normal();
  }

  [[nodiscard]] double potential(std::size_t p, double x) const {
    return observation_density(params_.observations[p], x, params_.beta);
  }

  /// max_x G_p(x) = 1 / (|y| sqrt(2 pi e)); unbounded when y = 0.
  [[nodiscard]] std::optional<double> sup_bound(std::size_t p) const {
    const double y = params_.observations[p];
    if (y == 0.0) {
      return std::nullopt;
    }
    return 1.0 / (std::abs(y) * std::sqrt(2.0 * std::numbers::pi * std::numbers::e));
  }

  static double observation_density(double y, double x, double beta) {
    const double quad = (y == 0.0) ? 0.0 : y * y * std::exp(-x) / (2.0 * beta * beta);
    return std::exp(-0.5 * std::log(2.0 * std::numbers::pi * beta * beta) - 0.5 * x - quad);
  }

 private:
  SvParams params_;
  double stationary_sd_ = 1.0;
};

static_assert(FeynmanKacModel<LinearGaussianModel>);
static_assert(FeynmanKacModel<StochasticVolatilityModel>);

inline LinearGaussianModel make_lgm(LgmParams params) { return LinearGaussianModel(std::move(params)); }
inline StochasticVolatilityModel make_sv(SvParams params) { return StochasticVolatilityModel(std::move(params)); }

struct Trajectory {
  std::vector<double> latent;        ///< x_0..x_n
  std::vector<double> observations;  ///< y_0..y_{n-1}
};

/// Forward simulation; `params.observations` is ignored. sigma_u may be zero here.
inline Trajectory simulate(const LgmParams& params, std::size_t n, Stream& rng) {
  Trajectory t;
  t.latent.reserve(n + 1);
  t.observations.reserve(n);
  double x = params.sigma_u / std::sqrt(1.0 - params.phi * params.phi) * rng.normal();
  t.latent.push_back(x);
  for (std::size_t p = 0; p < n; ++p) {
    t.observations.push_back(x + params.sigma_v * rng.normal());
    x = params.phi * x + params.sigma_u * rng.normal();
    t.latent.push_back(x);
  }
  return t;
}

inline Trajectory simulate(const SvParams& params, std::size_t n, Stream& rng) {
  Trajectory t;
  t.latent.reserve(n + 1);
  t.observations.reserve(n);
  double x = params.sigma / std::sqrt(1.0 - params.alpha * params.alpha) * rng.normal();
  t.latent.push_back(x);
  for (std::size_t p = 0; p < n; ++p) {
    t.observations.push_back(params.beta * std::exp(0.5 * x) * rng.normal());
    x = params.alpha * x + params.sigma * rng.normal();
    t.latent.push_back(x);
  }
  return t;
}

struct RandomModelOptions {
  double potential_min = 0.1;
  double potential_max = 1.0;
  double transition_floor = 0.05;  ///< added to every raw transition weight before normalizing
};

/// Random finite model with strictly positive potentials, reproducible from `seed`.
inline FiniteModel make_finite_hmm(Eigen::Index d, std::size_t n, std::uint64_t seed,
                                   const RandomModelOptions& options = {}) {
  if (d < 2) {
    fail(Errc::invalid_tables, "finite HMM needs at least two states");
  }
  if (!(options.potential_min > 0.0) || options.potential_max < options.potential_min) {
    fail(Errc::invalid_tables, "potential range must be positive and ordered");
  }
  Stream rng(seed, 0, 0, static_cast<std::uint32_t>(StreamPurpose::auxiliary));
  Vector eta0(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    eta0[i] = options.transition_floor + rng.uniform();
  }
  eta0 /= eta0.sum();
  std::vector<Matrix> transitions;
  for (std::size_t p = 0; p < n; ++p) {
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        m(i, j) = options.transition_floor + rng.uniform();
      }
      m.row(i) /= m.row(i).sum();
    }
    transitions.push_back(std::move(m));
  }
  std::vector<Vector> potentials;
  for (std::size_t p = 0; p <= n; ++p) {
    Vector g(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      g[i] = options.potential_min + (options.potential_max - options.potential_min) * rng.uniform();
    }
    potentials.push_back(std::move(g));
  }
  return FiniteModel(std::move(eta0), std::move(transitions), std::move(potentials));
}

/// Explicit tables; potentials must be strictly positive.
inline FiniteModel make_finite_hmm(Vector eta0, std::vector<Matrix> transitions, std::vector<Vector> potentials) {
  if (eta0.size() < 2) {
    fail(Errc::invalid_tables, "finite HMM needs at least two states");
  }
  for (const Vector& g : potentials) {
    if (g.size() > 0 && !(g.minCoeff() > 0.0)) {
      fail(Errc::invalid_tables, "finite HMM potentials must be strictly positive");
    }
  }
  return FiniteModel(std::move(eta0), std::move(transitions), std::move(potentials));
}

inline constexpr std::uint64_t kStandardInstanceSeed = 20130601;

/// The d = 3, n = 10 instance used throughout the test suites.
inline FiniteModel standard_finite_instance() { return make_finite_hmm(3, 10, kStandardInstanceSeed); }

}  // namespace ipf

#endif  // IPF_MODELS_HPP_
