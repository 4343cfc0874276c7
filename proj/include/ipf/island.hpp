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

#ifndef IPF_ISLAND_HPP_
#define IPF_ISLAND_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ipf/error.hpp"
#include "ipf/functions.hpp"
#include "ipf/models.hpp"
#include "ipf/numeric.hpp"
#include "ipf/parallel.hpp"
#include "ipf/particle.hpp"
#include "ipf/rng.hpp"

/**
 * \file
 * \brief N2 islands of N1 particles.
 *
 * Each island is a particle system driven by a within-island scheme. Islands are
 * themselves treated as particles of a Feynman-Kac model whose potential is the
 * island's (weighted) mean potential, and one of four across-island schemes
 * decides which islands are propagated:
 *
 *  - Independent: islands never exchange ancestry.
 *  - Bootstrap: N2 multinomial ancestors proportional to the island potentials.
 *  - EpsilonBootstrap: island i survives with probability eps * G_i, otherwise it
 *    is replaced by a multinomial draw.
 *  - AdaptiveESS: island weights Omega accumulate the island potentials until the
 *    island-level ESS falls below alpha * N2, at which point islands are resampled.
 *
 * A step first picks the island ancestors, then each new island runs its own
 * within-island selection and mutation on the particles of its ancestor island.
 */

namespace ipf {

struct Independent {};

using AcrossScheme = std::variant<Independent, Bootstrap, EpsilonBootstrap, AdaptiveEss>;

inline std::string scheme_name(const AcrossScheme& scheme) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Independent>) {
          return "independent";
        } else if constexpr (std::is_same_v<T, Bootstrap>) {
          return "bootstrap";
        } else if constexpr (std::is_same_v<T, EpsilonBootstrap>) {
          return scheme_name(s.policy);
        } else {
          return "ess";
        }
      },
      scheme);
}

struct InteractionCounters {
  std::uint64_t interactions = 0;        ///< islands replaced by across-island selection
  std::uint64_t island_resamples = 0;    ///< steps where across-island selection replaced anything
  std::uint64_t particle_resamples = 0;  ///< (island, step) pairs where within-island selection resampled
};

template <class State>
struct IslandSystem {
  std::vector<Population<State>> islands;
  std::vector<double> island_weights;  ///< Omega
  std::size_t step = 0;
  InteractionCounters counters;
};

struct RunConfig {
  std::size_t n1 = 1;
  std::size_t n2 = 1;
  WithinScheme within = Bootstrap{};
  AcrossScheme across = Bootstrap{};
  std::uint64_t seed = 0;
  std::vector<TestFunction> test_functions;
  unsigned island_workers = 1;  ///< threads used to mutate islands inside one run

  void validate() const {
    if (n1 < 1 || n2 < 1) {
      fail(Errc::config, "N1 and N2 must be positive");
    }
    const auto check_alpha = [](const auto& scheme, const char* which) {
      if (const auto* ess = std::get_if<AdaptiveEss>(&scheme)) {
        if (!(ess->alpha > 0.0 && ess->alpha < 1.0)) {
          fail(Errc::config, std::string(which) + " ESS alpha must lie in (0, 1)");
        }
      }
    };
    check_alpha(within, "within-island");
    check_alpha(across, "across-island");
  }
};

struct RunResult {
  std::vector<double> estimates;  ///< one per test function, in RunConfig order
  double log_gamma1 = 0.0;        ///< log of the estimate of gamma_n(1)
  InteractionCounters counters;
};

/// G^{N1}(xi) = sum w G / sum w, with `potentials` = G_p on the island's particles.
template <class State>
double island_potential(const Population<State>& island, std::span<const double> potentials) {
  return weighted_mean(island, potentials);
}

template <FeynmanKacModel M>
double island_potential(const Population<typename M::state_type>& island, const M& model) {
  const std::vector<double> g = evaluate_potentials(model, island);
  return island_potential(island, std::span<const double>(g));
}

/// N2 i.i.d. ancestors proportional to the island potentials; every island counts
/// as an interaction.
inline void island_select_bootstrap(std::span<const double> island_potentials, Stream& rng,
                                    std::span<std::size_t> ancestors, InteractionCounters& counters) {
  CompensatedSum total;
  for (const double g : island_potentials) {
    total.add(g);
  }
  if (!(total.value() > 0.0)) {
    fail(Errc::extinction, "all island potentials vanish");
  }
  multinomial_select(island_potentials, ancestors, rng);
  counters.interactions += ancestors.size();
  counters.island_resamples += 1;
}

/// Island i is kept with probability eps * G_i, otherwise replaced by a draw
/// proportional to the island potentials. Returns the number of replaced islands.
inline std::size_t island_select_epsilon(std::span<const double> island_potentials, double eps, Stream& rng,
                                         std::span<std::size_t> ancestors, InteractionCounters& counters) {
  if (!(eps >= 0.0)) {
    fail(Errc::epsilon_out_of_range, "epsilon must be nonnegative");
  }
  CompensatedSum total;
  for (const double g : island_potentials) {
    total.add(g);
    if (eps * g > 1.0 + 1e-12) {
      fail(Errc::epsilon_out_of_range, "eps * G = " + std::to_string(eps * g) + " > 1 for an island");
    }
  }
  if (!(total.value() > 0.0)) {
    fail(Errc::extinction, "all island potentials vanish");
  }
  AliasTable table;
  bool table_ready = false;
  std::size_t replaced = 0;
  for (std::size_t i = 0; i < island_potentials.size(); ++i) {
    if (rng.uniform() < eps * island_potentials[i]) {
      ancestors[i] = i;
      continue;
    }
    if (!table_ready) {
      table.build(island_potentials);
      table_ready = true;
    }
    ancestors[i] = table.sample(rng);
    ++replaced;
  }
  counters.interactions += replaced;
  counters.island_resamples += replaced > 0 ? 1 : 0;
  return replaced;
}

/// ESS test on Omega_i G_i. Above alpha * N2: identity ancestors and Omega <- Omega G.
/// Below: multinomial ancestors proportional to Omega G and Omega reset to one.
inline bool island_select_ess(std::span<const double> island_potentials, std::span<double> island_weights,
                              double alpha, Stream& rng, std::span<std::size_t> ancestors,
                              InteractionCounters& counters) {
  const double ess = ess_criterion(island_weights, island_potentials);
  const std::size_t n = island_potentials.size();
  std::vector<double> products(n);
  for (std::size_t i = 0; i < n; ++i) {
    products[i] = island_weights[i] * island_potentials[i];
  }
  if (ess >= alpha * static_cast<double>(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      ancestors[i] = i;
      island_weights[i] = products[i];
    }
    return false;
  }
  multinomial_select(products, ancestors, rng);
  std::fill(island_weights.begin(), island_weights.end(), 1.0);
  counters.interactions += n;
  counters.island_resamples += 1;
  return true;
}

/// (sum Omega_i)^-1 sum_i Omega_i eta_i(f).
template <class State, class F>
double double_estimator(const IslandSystem<State>& sys, const F& f) {
  CompensatedSum num;
  CompensatedSum den;
  for (std::size_t i = 0; i < sys.islands.size(); ++i) {
    const double omega = sys.island_weights[i];
    if (omega == 0.0) {
      continue;
    }
    num.add(omega * eta_hat(sys.islands[i], f));
    den.add(omega);
  }
  if (!(den.value() > 0.0)) {
    fail(Errc::zero_mass, "island weights sum to zero");
  }
  return num.value() / den.value();
}

/// Step-by-step driver for one replication.
template <FeynmanKacModel M>
class IslandFilter {
 public:
  using State = typename M::state_type;

  IslandFilter(const M& model, RunConfig config) : model_(model), config_(std::move(config)) {
    config_.validate();
    const std::size_t n1 = config_.n1;
    const std::size_t n2 = config_.n2;
    sys_.islands.resize(n2);
    next_.resize(n2);
    potentials_.assign(n2, std::vector<double>(n1));
    island_potentials_.assign(n2, 0.0);
    ancestors_.assign(n2, 0);
    scratch_.resize(n2);
    within_resampled_.assign(n2, 0);
    sys_.island_weights.assign(n2, 1.0);
    island_log_gamma_.assign(n2, 0.0);
    parallel_for(n2, config_.island_workers, [&](std::size_t i) {
      Stream rng = Stream::for_island(config_.seed, 0, i, StreamPurpose::initial);
      sys_.islands[i] = initial_population(model_, n1, rng);
    });
  }

  [[nodiscard]] const IslandSystem<State>& system() const noexcept { return sys_; }
  [[nodiscard]] const RunConfig& config() const noexcept { return config_; }
  [[nodiscard]] bool done() const noexcept { return sys_.step >= model_.horizon(); }

  /// log of the current estimate of gamma_p(1).
  [[nodiscard]] double log_gamma1() const {
    if (std::holds_alternative<Independent>(config_.across)) {
      return log_mean_exp(island_log_gamma_);
    }
    return log_gamma_;
  }

  void advance() {
    const std::size_t p = sys_.step;
    try {
      advance_impl(p);
    } catch (const Error& e) {
      if (e.step()) {
        throw;
      }
      throw e.at_step(p);
    }
  }

  RunResult run() {
    while (!done()) {
      advance();
    }
    RunResult result;
    result.estimates.reserve(config_.test_functions.size());
    for (const TestFunction& f : config_.test_functions) {
      result.estimates.push_back(double_estimator(sys_, f));
    }
    result.log_gamma1 = log_gamma1();
    result.counters = sys_.counters;
    return result;
  }

 private:
  void advance_impl(std::size_t p) {
    const std::size_t n2 = config_.n2;
    parallel_for(n2, config_.island_workers, [&](std::size_t i) {
      const Population<State>& island = sys_.islands[i];
      evaluate_potentials(model_, p, std::span<const State>(island.states), std::span<double>(potentials_[i]));
      island_potentials_[i] = island_potential(island, std::span<const double>(potentials_[i]));
    });

    select_islands(p);

    parallel_for(n2, config_.island_workers, [&](std::size_t i) {
      Stream rng = Stream::for_island(config_.seed, p, i, StreamPurpose::within);
      const std::size_t a = ancestors_[i];
      const WithinOutcome outcome =
          advance_within(config_.within, sys_.islands[a], potentials_[a], model_, rng, next_[i], scratch_[i]);
      within_resampled_[i] = outcome.resampled ? 1 : 0;
    });
    for (const unsigned char r : within_resampled_) {
      sys_.counters.particle_resamples += r;
    }
    sys_.islands.swap(next_);
    sys_.step = p + 1;
  }

  void select_islands(std::size_t p) {
    Stream rng = Stream::for_island(config_.seed, p, 0, StreamPurpose::across);
    std::visit(
        [&](const auto& scheme) {
          using T = std::decay_t<decltype(scheme)>;
          if constexpr (std::is_same_v<T, Independent>) {
            for (std::size_t i = 0; i < config_.n2; ++i) {
              if (!(island_potentials_[i] > 0.0)) {
                throw Error(Errc::extinction, "island " + std::to_string(i) + " has zero potential", p);
              }
              island_log_gamma_[i] += std::log(island_potentials_[i]);
              ancestors_[i] = i;
            }
          } else {
            accumulate_log_gamma(p);
            if constexpr (std::is_same_v<T, Bootstrap>) {
              island_select_bootstrap(island_potentials_, rng, ancestors_, sys_.counters);
            } else if constexpr (std::is_same_v<T, EpsilonBootstrap>) {
              const double eps = resolve_island_epsilon(scheme.policy, p);
              island_select_epsilon(island_potentials_, eps, rng, ancestors_, sys_.counters);
            } else {
              island_select_ess(island_potentials_, sys_.island_weights, scheme.alpha, rng, ancestors_,
                                sys_.counters);
            }
          }
        },
        config_.across);
  }

  // log gamma += log(sum Omega G / sum Omega); Omega is identically one except under ESS.
  void accumulate_log_gamma(std::size_t p) {
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t i = 0; i < config_.n2; ++i) {
      num.add(sys_.island_weights[i] * island_potentials_[i]);
      den.add(sys_.island_weights[i]);
    }
    const double ratio = num.value() / den.value();
    if (!(ratio > 0.0)) {
      throw Error(Errc::extinction, "all island potentials vanish at step " + std::to_string(p), p);
    }
    log_gamma_ += std::log(ratio);
  }

  double resolve_island_epsilon(const EpsilonPolicy& policy, std::size_t p) const {
    return resolve_epsilon(policy, model_, p, island_potentials_);
  }

  const M& model_;
  RunConfig config_;
  IslandSystem<State> sys_;
  std::vector<Population<State>> next_;
  std::vector<std::vector<double>> potentials_;
  std::vector<double> island_potentials_;
  std::vector<std::size_t> ancestors_;
  std::vector<SelectionScratch> scratch_;
  std::vector<unsigned char> within_resampled_;
  std::vector<double> island_log_gamma_;
  double log_gamma_ = 0.0;
};

/// Runs one replication to the model horizon.
template <FeynmanKacModel M>
RunResult run(const M& model, const RunConfig& config) {
  IslandFilter<M> filter(model, config);
  return filter.run();
}

}  // namespace ipf

#endif  // IPF_ISLAND_HPP_
