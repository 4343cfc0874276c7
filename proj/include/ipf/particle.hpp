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

#ifndef IPF_PARTICLE_HPP_
#define IPF_PARTICLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ipf/error.hpp"
#include "ipf/functions.hpp"
#include "ipf/models.hpp"
#include "ipf/numeric.hpp"
#include "ipf/rng.hpp"

/**
 * \file
 * \brief Single-island particle approximation of a Feynman-Kac flow.
 *
 * Three selection schemes are available: plain bootstrap (multinomial selection
 * at every step), epsilon-bootstrap (each particle survives with probability
 * eps * G and is otherwise redrawn) and adaptive ESS (weights are carried and
 * the population is resampled only when the effective sample size drops below
 * alpha * N).
 */

namespace ipf {

template <class State>
struct Population {
  std::vector<State> states;
  std::vector<double> weights;
  std::size_t step = 0;

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }

  [[nodiscard]] double weight_sum() const noexcept {
    CompensatedSum acc;
    for (const double w : weights) {
      acc.add(w);
    }
    return acc.value();
  }

  void resize(std::size_t n) {
    states.resize(n);
    weights.resize(n);
  }
};

/// N i.i.d. draws from eta_0 with unit weights.
template <FeynmanKacModel M>
Population<typename M::state_type> initial_population(const M& model, std::size_t n, Stream& rng) {
  Population<typename M::state_type> pop;
  pop.states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop.states.push_back(model.sample_initial(rng));
  }
  pop.weights.assign(n, 1.0);
  pop.step = 0;
  return pop;
}

// Scheme descriptions. The same structs name across-island schemes in island.hpp.

struct Bootstrap {};

struct FixedSchedule {
  std::vector<double> values;  ///< eps_p for p = 0..n-1
};
struct SupNormInverse {};   ///< eps_p = 1 / sup_bound(p)
struct EmpiricalEssSup {};  ///< eps_p = 1 / max of G_p over the current population
using EpsilonPolicy = std::variant<FixedSchedule, SupNormInverse, EmpiricalEssSup>;

struct EpsilonBootstrap {
  EpsilonPolicy policy = EmpiricalEssSup{};
};

struct AdaptiveEss {
  double alpha = 0.5;
};

using WithinScheme = std::variant<Bootstrap, EpsilonBootstrap, AdaptiveEss>;

inline std::string scheme_name(const EpsilonPolicy& policy) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixedSchedule>) {
          return "eps_fixed";
        } else if constexpr (std::is_same_v<T, SupNormInverse>) {
          return "eps_sup_norm";
        } else {
          return "eps_essup";
        }
      },
      policy);
}

inline std::string scheme_name(const WithinScheme& scheme) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Bootstrap>) {
          return "bootstrap";
        } else if constexpr (std::is_same_v<T, EpsilonBootstrap>) {
          return scheme_name(s.policy);
        } else {
          return "ess";
        }
      },
      scheme);
}

/// (sum w g)^2 / sum (w g)^2, in [1, N].
[[nodiscard]] inline double ess_criterion(std::span<const double> weights, std::span<const double> potentials) {
  if (weights.size() != potentials.size()) {
    fail(Errc::config, "ess_criterion: length mismatch");
  }
  CompensatedSum sum;
  CompensatedSum sum_sq;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double v = weights[i] * potentials[i];
    sum.add(v);
    sum_sq.add(v * v);
  }
  if (!(sum_sq.value() > 0.0)) {
    fail(Errc::zero_mass, "all weighted potentials vanish");
  }
  const double s = sum.value();
  return s * s / sum_sq.value();
}

/// Walker/Vose alias table: O(N) build, O(1) i.i.d. draws proportional to the weights.
class AliasTable {
 public:
  void build(std::span<const double> weights) {
    if (!try_build(weights)) {
      fail(Errc::zero_mass, "selection weights sum to zero");
    }
  }

  /// Like build() but returns false, leaving the table unusable, when the weights sum to zero.
  bool try_build(std::span<const double> weights) {
    const std::size_t n = weights.size();
    double total = 0.0;
    for (const double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        fail(Errc::zero_mass, "selection weights must be finite and nonnegative");
      }
      total += w;
    }
    if (n == 0 || !(total > 0.0)) {
      return false;
    }
    prob_.resize(n);
    alias_.resize(n);
    small_.clear();
    large_.clear();
    const double scale = static_cast<double>(n) / total;
    for (std::size_t i = 0; i < n; ++i) {
      prob_[i] = weights[i] * scale;
      alias_[i] = i;
      (prob_[i] < 1.0 ? small_ : large_).push_back(i);
    }
    while (!small_.empty() && !large_.empty()) {
      const std::size_t s = small_.back();
      small_.pop_back();
      const std::size_t l = large_.back();
      alias_[s] = l;
      prob_[l] -= 1.0 - prob_[s];
      if (prob_[l] < 1.0) {
        large_.pop_back();
        small_.push_back(l);
      }
    }
    // Leftovers carry probability one up to rounding.
    for (const std::size_t i : large_) {
      prob_[i] = 1.0;
    }
    const auto heaviest = static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    for (const std::size_t i : small_) {
      if (weights[i] > 0.0) {
        prob_[i] = 1.0;
      } else {
        prob_[i] = 0.0;
        alias_[i] = heaviest;
      }
    }
    return true;
  }

  [[nodiscard]] std::size_t size() const noexcept { return prob_.size(); }

  std::size_t sample(Stream& rng) const {
    const double u = rng.uniform() * static_cast<double>(prob_.size());
    const auto column = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
    return (u - static_cast<double>(column) < prob_[column]) ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
  std::vector<std::size_t> small_;
  std::vector<std::size_t> large_;
};

/// Fills `out` with i.i.d. indices drawn proportionally to `weights`.
inline void multinomial_select(std::span<const double> weights, std::span<std::size_t> out, Stream& rng) {
  AliasTable table;
  table.build(weights);
  for (std::size_t& idx : out) {
    idx = table.sample(rng);
  }
}

[[nodiscard]] inline std::vector<std::size_t> multinomial_select(std::span<const double> weights, std::size_t count,
                                                                 Stream& rng) {
  std::vector<std::size_t> out(count);
  multinomial_select(weights, out, rng);
  return out;
}

/// Reusable buffers for the step functions.
struct SelectionScratch {
  AliasTable alias;
  std::vector<std::size_t> ancestors;
  std::vector<double> products;
};

/// G_p at every state; checks nonnegativity and the declared sup bound.
template <FeynmanKacModel M>
void evaluate_potentials(const M& model, std::size_t p, std::span<const typename M::state_type> states,
                         std::span<double> out) {
  const std::optional<double> bound = model.sup_bound(p);
  const double limit = bound ? *bound * (1.0 + 1e-12) : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double g = model.potential(p, states[i]);
    if (!(g >= 0.0) || g > limit) {
      fail(Errc::invalid_tables, "potential at step " + std::to_string(p) + " is " + std::to_string(g) +
                                     ", outside [0, sup_bound]");
    }
    out[i] = g;
  }
}

template <FeynmanKacModel M>
std::vector<double> evaluate_potentials(const M& model, const Population<typename M::state_type>& pop) {
  std::vector<double> g(pop.size());
  evaluate_potentials(model, pop.step, std::span<const typename M::state_type>(pop.states), std::span<double>(g));
  return g;
}

namespace detail {

template <FeynmanKacModel M, class State>
void mutate_from(const M& model, const Population<State>& in, std::span<const std::size_t> ancestors, Stream& rng,
                 Population<State>& out) {
  const std::size_t n = ancestors.size();
  out.states.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.states[i] = model.mutate(in.step, in.states[ancestors[i]], rng);
  }
  out.step = in.step + 1;
}

inline void check_positive_mass(std::span<const double> values, std::size_t step) {
  CompensatedSum acc;
  for (const double v : values) {
    acc.add(v);
  }
  if (!(acc.value() > 0.0)) {
    throw Error(Errc::extinction, "all potentials vanish at step " + std::to_string(step), step);
  }
}

}  // namespace detail

/// Multinomial selection proportional to G_p followed by mutation. Weights stay one.
template <FeynmanKacModel M>
void step_bootstrap(const Population<typename M::state_type>& in, std::span<const double> potentials, const M& model,
                    Stream& rng, Population<typename M::state_type>& out, SelectionScratch& scratch) {
  if (!scratch.alias.try_build(potentials)) {
    throw Error(Errc::extinction, "all potentials vanish at step " + std::to_string(in.step), in.step);
  }
  scratch.ancestors.resize(in.size());
  for (std::size_t& a : scratch.ancestors) {
    a = scratch.alias.sample(rng);
  }
  detail::mutate_from(model, in, scratch.ancestors, rng, out);
  out.weights.assign(in.size(), 1.0);
}

template <FeynmanKacModel M>
Population<typename M::state_type> step_bootstrap(const Population<typename M::state_type>& pop, const M& model,
                                                  Stream& rng) {
  const std::vector<double> g = evaluate_potentials(model, pop);
  Population<typename M::state_type> out;
  SelectionScratch scratch;
  step_bootstrap(pop, g, model, rng, out, scratch);
  return out;
}

/// Each particle is kept with probability eps * G_p(x), otherwise replaced by a draw
/// proportional to G_p; then every particle mutates. Returns the number replaced.
template <FeynmanKacModel M>
std::size_t step_epsilon(const Population<typename M::state_type>& in, std::span<const double> potentials, double eps,
                         const M& model, Stream& rng, Population<typename M::state_type>& out,
                         SelectionScratch& scratch) {
  if (!(eps >= 0.0)) {
    fail(Errc::epsilon_out_of_range, "epsilon must be nonnegative");
  }
  detail::check_positive_mass(potentials, in.step);
  for (const double g : potentials) {
    if (eps * g > 1.0 + 1e-12) {
      fail(Errc::epsilon_out_of_range, "eps * G = " + std::to_string(eps * g) + " > 1 at step " +
                                           std::to_string(in.step));
    }
  }
  const std::size_t n = in.size();
  scratch.ancestors.resize(n);
  bool table_ready = false;
  std::size_t replaced = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < eps * potentials[i]) {
      scratch.ancestors[i] = i;
      continue;
    }
    if (!table_ready) {
      scratch.alias.build(potentials);
      table_ready = true;
    }
    scratch.ancestors[i] = scratch.alias.sample(rng);
    ++replaced;
  }
  detail::mutate_from(model, in, scratch.ancestors, rng, out);
  out.weights.assign(n, 1.0);
  return replaced;
}

template <FeynmanKacModel M>
Population<typename M::state_type> step_epsilon(const Population<typename M::state_type>& pop, const M& model,
                                                double eps, Stream& rng) {
  const std::vector<double> g = evaluate_potentials(model, pop);
  Population<typename M::state_type> out;
  SelectionScratch scratch;
  step_epsilon(pop, g, eps, model, rng, out, scratch);
  return out;
}

/// Keeps the weights (w <- w G) while ESS >= alpha N, otherwise resamples
/// proportionally to w G and resets the weights to one. Returns whether it resampled.
template <FeynmanKacModel M>
bool step_ess(const Population<typename M::state_type>& in, std::span<const double> potentials, double alpha,
              const M& model, Stream& rng, Population<typename M::state_type>& out, SelectionScratch& scratch) {
  const std::size_t n = in.size();
  scratch.products.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    scratch.products[i] = in.weights[i] * potentials[i];
  }
  const double ess = ess_criterion(in.weights, potentials);
  scratch.ancestors.resize(n);
  if (ess >= alpha * static_cast<double>(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      scratch.ancestors[i] = i;
    }
    detail::mutate_from(model, in, scratch.ancestors, rng, out);
    out.weights.assign(scratch.products.begin(), scratch.products.end());
    return false;
  }
  scratch.alias.build(scratch.products);
  for (std::size_t& a : scratch.ancestors) {
    a = scratch.alias.sample(rng);
  }
  detail::mutate_from(model, in, scratch.ancestors, rng, out);
  out.weights.assign(n, 1.0);
  return true;
}

template <FeynmanKacModel M>
std::pair<Population<typename M::state_type>, bool> step_ess(const Population<typename M::state_type>& pop,
                                                             const M& model, double alpha, Stream& rng) {
  const std::vector<double> g = evaluate_potentials(model, pop);
  Population<typename M::state_type> out;
  SelectionScratch scratch;
  const bool resampled = step_ess(pop, g, alpha, model, rng, out, scratch);
  return {std::move(out), resampled};
}

/// eps_p under the given policy for the population whose potentials are `potentials`.
template <FeynmanKacModel M>
double resolve_epsilon(const EpsilonPolicy& policy, const M& model, std::size_t p,
                       std::span<const double> potentials) {
  return std::visit(
      [&](const auto& pol) -> double {
        using T = std::decay_t<decltype(pol)>;
        if constexpr (std::is_same_v<T, FixedSchedule>) {
          if (p >= pol.values.size()) {
            fail(Errc::config, "epsilon schedule has no entry for step " + std::to_string(p));
          }
          return pol.values[p];
        } else if constexpr (std::is_same_v<T, SupNormInverse>) {
          const std::optional<double> bound = model.sup_bound(p);
          if (!bound || !(*bound > 0.0)) {
            fail(Errc::unsupported, "model has no sup bound for G_" + std::to_string(p));
          }
          return 1.0 / *bound;
        } else {
          const double top = *std::max_element(potentials.begin(), potentials.end());
          if (!(top > 0.0)) {
            throw Error(Errc::extinction, "all potentials vanish at step " + std::to_string(p), p);
          }
          return 1.0 / top;
        }
      },
      policy);
}

struct WithinOutcome {
  bool resampled = false;
  std::size_t replaced = 0;
};

/// One selection/mutation step of the given within-island scheme.
template <FeynmanKacModel M>
WithinOutcome advance_within(const WithinScheme& scheme, const Population<typename M::state_type>& in,
                             std::span<const double> potentials, const M& model, Stream& rng,
                             Population<typename M::state_type>& out, SelectionScratch& scratch) {
  return std::visit(
      [&](const auto& s) -> WithinOutcome {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Bootstrap>) {
          step_bootstrap(in, potentials, model, rng, out, scratch);
          return {true, in.size()};
        } else if constexpr (std::is_same_v<T, EpsilonBootstrap>) {
          const double eps = resolve_epsilon(s.policy, model, in.step, potentials);
          const std::size_t replaced = step_epsilon(in, potentials, eps, model, rng, out, scratch);
          return {replaced > 0, replaced};
        } else {
          const bool resampled = step_ess(in, potentials, s.alpha, model, rng, out, scratch);
          return {resampled, resampled ? in.size() : 0};
        }
      },
      scheme);
}

/// sum w f(x) / sum w.
template <class State, class F>
double eta_hat(const Population<State>& pop, const F& f) {
  CompensatedSum num;
  CompensatedSum den;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    num.add(pop.weights[i] * f(static_cast<double>(pop.states[i])));
    den.add(pop.weights[i]);
  }
  if (!(den.value() > 0.0)) {
    fail(Errc::zero_mass, "population has zero total weight");
  }
  return num.value() / den.value();
}

/// Weighted mean of precomputed per-particle values.
template <class State>
double weighted_mean(const Population<State>& pop, std::span<const double> values) {
  CompensatedSum num;
  CompensatedSum den;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    num.add(pop.weights[i] * values[i]);
    den.add(pop.weights[i]);
  }
  if (!(den.value() > 0.0)) {
    fail(Errc::zero_mass, "population has zero total weight");
  }
  return num.value() / den.value();
}

/// log gamma_{p+1}(1) = log gamma_p(1) + log eta_p(G_p), with `potentials` = G_p on `pop`.
template <class State>
double gamma_hat_update(double log_prev, const Population<State>& pop, std::span<const double> potentials) {
  const double mass = weighted_mean(pop, potentials);
  if (!(mass > 0.0)) {
    throw Error(Errc::extinction, "eta_p(G_p) = 0 at step " + std::to_string(pop.step), pop.step);
  }
  return log_prev + std::log(mass);
}

template <FeynmanKacModel M>
double gamma_hat_update(double log_prev, const Population<typename M::state_type>& pop, const M& model) {
  const std::vector<double> g = evaluate_potentials(model, pop);
  return gamma_hat_update(log_prev, pop, std::span<const double>(g));
}

/**
 * sqrt(N) [eta_p(f) - eta_{p-1}(G_{p-1} M_p f) / eta_{p-1}(G_{p-1})], where eta are
 * the particle measures of `pop_p` and its predecessor `pop_prev`.
 */
template <FeynmanKacModel M>
double local_error(const Population<typename M::state_type>& pop_p,
                   const Population<typename M::state_type>& pop_prev, const M& model, const TestFunction& f) {
  if constexpr (ExactKernelModel<M>) {
    if (pop_p.step != pop_prev.step + 1) {
      fail(Errc::index_order, "local_error needs consecutive populations");
    }
    const std::size_t prev = pop_prev.step;
    const Vector mf = model.next_expectation(prev, f);
    const std::vector<double> g = evaluate_potentials(model, pop_prev);
    std::vector<double> gmf(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      gmf[i] = g[i] * mf[static_cast<Eigen::Index>(pop_prev.states[i])];
    }
    const double mass = weighted_mean(pop_prev, g);
    if (!(mass > 0.0)) {
      throw Error(Errc::extinction, "eta_p(G_p) = 0 at step " + std::to_string(prev), prev);
    }
    const double predicted = weighted_mean(pop_prev, gmf) / mass;
    return std::sqrt(static_cast<double>(pop_p.size())) * (eta_hat(pop_p, f) - predicted);
  } else {
    fail(Errc::unsupported, "local_error needs a model with exact kernel expectations");
  }
}

}  // namespace ipf

#endif  // IPF_PARTICLE_HPP_
