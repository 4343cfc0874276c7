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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ipf/fk.hpp"
#include "ipf/island.hpp"
#include "ipf/models.hpp"
#include "test_util.hpp"

namespace {

using ipf::Errc;
using ipf::Error;
using ipf::FiniteHmm;
using ipf::FiniteModel;
using ipf::InteractionCounters;
using ipf::Matrix;
using ipf::Population;
using ipf::RunConfig;
using ipf::Stream;
using ipf::StreamPurpose;
using ipf::Vector;
using ipf::testing::chi_square_p;
using ipf::testing::mean_stat;

using State = FiniteHmm::state_type;

Stream aux(std::uint64_t seed, std::size_t k = 0) { return Stream::for_island(seed, k, 0, StreamPurpose::auxiliary); }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) {
    out[i++] = x;
  }
  return out;
}

Population<State> population(std::vector<State> states) {
  Population<State> pop;
  pop.weights.assign(states.size(), 1.0);
  pop.states = std::move(states);
  return pop;
}

const ipf::WithinScheme kWithin[] = {ipf::Bootstrap{}, ipf::EpsilonBootstrap{ipf::EmpiricalEssSup{}},
                                     ipf::EpsilonBootstrap{ipf::SupNormInverse{}}, ipf::AdaptiveEss{0.5}};
const ipf::AcrossScheme kAcross[] = {ipf::Independent{}, ipf::Bootstrap{}, ipf::EpsilonBootstrap{ipf::EmpiricalEssSup{}},
                                     ipf::AdaptiveEss{0.5}};

TEST(IslandPotential, Examples) {
  const std::vector<double> c(4, 0.7);
  EXPECT_EQ(ipf::island_potential(population({0, 1, 2, 0}), c), 0.7);
  EXPECT_EQ(ipf::island_potential(population({0, 1}), std::vector<double>{1, 3}), 2.0);
  Population<State> w = population({0, 1});
  w.weights = {1, 3};
  EXPECT_EQ(ipf::island_potential(w, std::vector<double>{1, 3}), 10.0 / 4.0);
  w.weights = {0, 0};
  try {
    (void)ipf::island_potential(w, std::vector<double>{1, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_mass);
  }
}

TEST(IslandSelectBootstrap, SingleIsland) {
  InteractionCounters c;
  std::vector<std::size_t> anc(1, 7);
  auto rng = aux(1);
  ipf::island_select_bootstrap(std::vector<double>{0.3}, rng, anc, c);
  EXPECT_EQ(anc[0], 0u);
  EXPECT_EQ(c.interactions, 1u);
  EXPECT_EQ(c.island_resamples, 1u);
}

TEST(IslandSelectBootstrap, EqualPotentialsUniform) {
  const std::size_t n2 = 20;
  std::vector<double> counts(n2, 0.0);
  InteractionCounters c;
  std::vector<std::size_t> anc(n2);
  for (std::size_t r = 0; r < 5000; ++r) {
    auto rng = aux(2, r);
    ipf::island_select_bootstrap(std::vector<double>(n2, 0.4), rng, anc, c);
    for (const std::size_t a : anc) {
      counts[a] += 1.0;
    }
  }
  EXPECT_EQ(c.interactions, 5000u * n2);
  EXPECT_GT(chi_square_p(counts, std::vector<double>(n2, 1.0 / n2)), 1e-4);
}

TEST(IslandSelectBootstrap, Extinction) {
  InteractionCounters c;
  std::vector<std::size_t> anc(2);
  auto rng = aux(3);
  try {
    ipf::island_select_bootstrap(std::vector<double>{0, 0}, rng, anc, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::extinction);
  }
}

TEST(IslandSelectEpsilon, AllKeptAtInverseMax) {
  InteractionCounters c;
  std::vector<std::size_t> anc(5);
  auto rng = aux(4);
  EXPECT_EQ(ipf::island_select_epsilon(std::vector<double>(5, 0.2), 5.0, rng, anc, c), 0u);
  EXPECT_EQ(anc, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(c.interactions, 0u);
  EXPECT_EQ(c.island_resamples, 0u);
}

TEST(IslandSelectEpsilon, SingleIslandBernoulli) {
  const double g = 0.8;
  const double eps = 0.5;
  InteractionCounters c;
  std::vector<std::size_t> anc(1);
  const std::size_t reps = 100000;
  for (std::size_t r = 0; r < reps; ++r) {
    auto rng = aux(5, r);
    const std::size_t replaced = ipf::island_select_epsilon(std::vector<double>{g}, eps, rng, anc, c);
    ASSERT_LE(replaced, 1u);
    ASSERT_EQ(anc[0], 0u);
  }
  const double q = 1.0 - eps * g;
  const double mean = static_cast<double>(c.interactions) / reps;
  EXPECT_NEAR(mean, q, 4 * std::sqrt(q * (1 - q) / reps));
  EXPECT_EQ(c.island_resamples, c.interactions);
}

TEST(IslandSelectEpsilon, RangeChecks) {
  InteractionCounters c;
  std::vector<std::size_t> anc(2);
  auto rng = aux(6);
  for (const double eps : {-1.0, 2.0}) {
    try {
      (void)ipf::island_select_epsilon(std::vector<double>{0.5, 1.0}, eps, rng, anc, c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::epsilon_out_of_range);
    }
  }
}

// Ancestor-pair law at N2 = 2: bootstrap gives psi x psi; epsilon keeps island i
// with probability eps G_i and otherwise draws from psi.
TEST(IslandSelectEpsilon, ZeroEpsilonMatchesBootstrapByEnumeration) {
  const std::vector<double> g = {0.3, 0.9};
  const double psi0 = g[0] / (g[0] + g[1]);
  const std::vector<double> psi = {psi0, 1 - psi0};
  std::vector<double> boot_law(4);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      boot_law[2 * a + b] = psi[a] * psi[b];
    }
  }
  const auto eps_law = [&](double eps) {
    std::vector<double> law(4, 0.0);
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        const double pa = (a == 0 ? eps * g[0] : 0.0) + (1 - eps * g[0]) * psi[a];
        const double pb = (b == 1 ? eps * g[1] : 0.0) + (1 - eps * g[1]) * psi[b];
        law[2 * a + b] = pa * pb;
      }
    }
    return law;
  };
  const auto law0 = eps_law(0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(law0[k], boot_law[k], 1e-15);
  }
  std::vector<double> c0(4, 0.0);
  std::vector<double> cb(4, 0.0);
  std::vector<double> c1(4, 0.0);
  InteractionCounters counters;
  std::vector<std::size_t> anc(2);
  for (std::size_t r = 0; r < 200000; ++r) {
    auto r0 = aux(7, r);
    ipf::island_select_epsilon(g, 0.0, r0, anc, counters);
    c0[2 * anc[0] + anc[1]] += 1;
    auto rb = aux(8, r);
    ipf::island_select_bootstrap(g, rb, anc, counters);
    cb[2 * anc[0] + anc[1]] += 1;
    auto r1 = aux(9, r);
    ipf::island_select_epsilon(g, 1.0, r1, anc, counters);
    c1[2 * anc[0] + anc[1]] += 1;
  }
  EXPECT_GT(chi_square_p(c0, boot_law), 1e-4);
  EXPECT_GT(chi_square_p(cb, boot_law), 1e-4);
  EXPECT_GT(chi_square_p(c1, eps_law(1.0)), 1e-4);
}

TEST(IslandSelectEss, Behaviour) {
  InteractionCounters c;
  auto rng = aux(10);
  std::vector<std::size_t> anc(3);
  std::vector<double> omega = {1.0, 2.0, 0.5};
  // Products (0.5, 0.5, 0.5) are equal: keep even at alpha close to one.
  EXPECT_FALSE(ipf::island_select_ess(std::vector<double>{0.5, 0.25, 1.0}, omega, 0.999, rng, anc, c));
  EXPECT_EQ(anc, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(omega, (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(c.interactions, 0u);
  EXPECT_TRUE(ipf::island_select_ess(std::vector<double>{1.0, 0.01, 0.01}, omega, 0.9, rng, anc, c));
  EXPECT_EQ(omega, std::vector<double>(3, 1.0));
  EXPECT_EQ(c.interactions, 3u);
  EXPECT_EQ(c.island_resamples, 1u);

  std::vector<double> one = {1.0};
  std::vector<std::size_t> a1(1);
  for (int k = 0; k < 10; ++k) {
    EXPECT_FALSE(ipf::island_select_ess(std::vector<double>{0.1 * (k + 1)}, one, 0.99, rng, a1, c));
  }
  EXPECT_EQ(c.interactions, 3u);
}

TEST(DoubleEstimator, Examples) {
  ipf::IslandSystem<State> sys;
  sys.islands = {population({0, 0}), population({2, 2})};
  sys.island_weights = {1.0, 3.0};
  const auto id = ipf::identity_function();
  EXPECT_EQ(ipf::double_estimator(sys, id), 1.5);
  EXPECT_EQ(ipf::double_estimator(sys, [](double) { return 1.0; }), 1.0);
  sys.islands = {population({0, 1, 2}), population({0, 1, 2})};
  EXPECT_EQ(ipf::double_estimator(sys, id), ipf::eta_hat(sys.islands[0], id));
  sys.island_weights = {0.0, 0.0};
  EXPECT_THROW((void)ipf::double_estimator(sys, id), Error);
}

// For linear island functions F = m(f), the island kernel satisfies
// Q_island(F)(x) = G_island(x) Phi(m(x))(f) = m(x)(Q f). Checked by summing over all
// N1-tuples y with probability prod_j Phi(m(x))(y_j).
TEST(IslandKernel, LinearFunctionsEnumeration) {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const FiniteModel m = ipf::testing::random_model(gen, 2, 1, 0.01);
    const Vector f = ipf::testing::random_vector(gen, 2);
    const Matrix q = ipf::q_kernel(m, 0, 1).entries;
    for (int x0 = 0; x0 < 2; ++x0) {
      for (int x1 = 0; x1 < 2; ++x1) {
        Vector mx = Vector::Zero(2);
        mx[x0] += 0.5;
        mx[x1] += 0.5;
        const double g_island = mx.dot(m.potential(0));
        const Vector phi =
            (ipf::boltzmann_gibbs(ipf::Distribution(mx), m.potential(0)).probs().transpose() * m.transition(1))
                .transpose();
        double lhs = 0.0;
        for (int y0 = 0; y0 < 2; ++y0) {
          for (int y1 = 0; y1 < 2; ++y1) {
            lhs += g_island * phi[y0] * phi[y1] * 0.5 * (f[y0] + f[y1]);
          }
        }
        EXPECT_NEAR(lhs, mx.dot(q * f), 1e-12);
      }
    }
  }
}

RunConfig config(std::size_t n1, std::size_t n2, ipf::WithinScheme within, ipf::AcrossScheme across,
                 std::uint64_t seed) {
  RunConfig cfg;
  cfg.n1 = n1;
  cfg.n2 = n2;
  cfg.within = std::move(within);
  cfg.across = std::move(across);
  cfg.seed = seed;
  cfg.test_functions = {ipf::identity_function()};
  return cfg;
}

TEST(Run, ConfigValidation) {
  const FiniteHmm model(ipf::standard_finite_instance());
  EXPECT_THROW(ipf::run(model, config(0, 1, ipf::Bootstrap{}, ipf::Bootstrap{}, 1)), Error);
  EXPECT_THROW(ipf::run(model, config(1, 1, ipf::AdaptiveEss{1.0}, ipf::Bootstrap{}, 1)), Error);
  EXPECT_THROW(ipf::run(model, config(1, 1, ipf::Bootstrap{}, ipf::AdaptiveEss{0.0}, 1)), Error);
}

TEST(Run, SingleIndependentIslandIsOneFilter) {
  const FiniteHmm model(ipf::standard_finite_instance());
  for (const auto& within : kWithin) {
    const auto result = ipf::run(model, config(16, 1, within, ipf::Independent{}, 77));
    auto init = Stream::for_island(77, 0, 0, StreamPurpose::initial);
    Population<State> pop = ipf::initial_population(model, 16, init);
    Population<State> next;
    ipf::SelectionScratch scratch;
    double log_gamma = 0.0;
    for (std::size_t p = 0; p < model.horizon(); ++p) {
      const auto g = ipf::evaluate_potentials(model, pop);
      log_gamma = ipf::gamma_hat_update(log_gamma, pop, std::span<const double>(g));
      auto rng = Stream::for_island(77, p, 0, StreamPurpose::within);
      ipf::advance_within(within, pop, g, model, rng, next, scratch);
      std::swap(pop, next);
    }
    EXPECT_EQ(result.estimates[0], ipf::eta_hat(pop, ipf::identity_function())) << ipf::scheme_name(within);
    EXPECT_NEAR(result.log_gamma1, log_gamma, 1e-13);
    EXPECT_EQ(result.counters.interactions, 0u);
  }
}

TEST(Run, SingleParticleIslandsMatchFlatFilterInLaw) {
  const auto model = ipf::make_lgm({0.9, 0.6, 1.0, {0.3, -0.5, 1.2, 0.8, -0.1, 0.4, 2.0, 1.1}});
  std::vector<double> islands;
  std::vector<double> flat;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    islands.push_back(ipf::run(model, config(1, 30, ipf::Bootstrap{}, ipf::Bootstrap{}, 1000 + r)).estimates[0]);
    flat.push_back(ipf::run(model, config(30, 1, ipf::Bootstrap{}, ipf::Independent{}, 5000 + r)).estimates[0]);
  }
  EXPECT_GT(ipf::testing::ks_two_sample_p(islands, flat), 1e-3);
  // Sanity check of the test itself: a 3-particle filter is distinguishable.
  std::vector<double> small;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    small.push_back(ipf::run(model, config(3, 1, ipf::Bootstrap{}, ipf::Independent{}, 9000 + r)).estimates[0]);
  }
  EXPECT_LT(ipf::testing::ks_two_sample_p(small, flat), 1e-3);
}

class PairUnbiasedness : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(PairUnbiasedness, GammaHat) {
  const auto [wi, ai] = GetParam();
  const FiniteHmm model(ipf::standard_finite_instance());
  const auto flow = ipf::exact_flow(model.model());
  const std::size_t n = model.horizon();
  const double gamma1 = flow[n].gamma1();
  const double gamma_f = gamma1 * flow[n].eta(model.values(ipf::identity_function()));
  std::vector<double> z1;
  std::vector<double> zf;
  const bool independent = std::holds_alternative<ipf::Independent>(kAcross[ai]);
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto res = ipf::run(model, config(4, 4, kWithin[wi], kAcross[ai], ipf::derive_seed(31, {r})));
    z1.push_back(std::exp(res.log_gamma1) / gamma1);
    zf.push_back(std::exp(res.log_gamma1) * res.estimates[0] / gamma_f);
  }
  const auto m1 = mean_stat(z1);
  EXPECT_NEAR(m1.mean, 1.0, 4 * m1.se);
  if (!independent) {
    const auto mf = mean_stat(zf);
    EXPECT_NEAR(mf.mean, 1.0, 4 * mf.se);
  }
}

INSTANTIATE_TEST_SUITE_P(AllPairs, PairUnbiasedness, ::testing::Combine(::testing::Range(0, 4), ::testing::Range(0, 4)));

TEST(Run, InteractionCounters) {
  const FiniteHmm model(ipf::standard_finite_instance());
  const std::size_t n = model.horizon();
  for (const auto& within : kWithin) {
    for (const auto& across : kAcross) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto res = ipf::run(model, config(5, 7, within, across, seed));
        const auto& c = res.counters;
        EXPECT_LE(c.interactions, n * 7);
        EXPECT_LE(c.island_resamples, n);
        EXPECT_LE(c.particle_resamples, n * 7);
        if (std::holds_alternative<ipf::Independent>(across)) {
          EXPECT_EQ(c.interactions, 0u);
          EXPECT_EQ(c.island_resamples, 0u);
        }
        if (std::holds_alternative<ipf::Bootstrap>(across)) {
          EXPECT_EQ(c.interactions, n * 7);
          EXPECT_EQ(c.island_resamples, n);
        }
        if (std::holds_alternative<ipf::AdaptiveEss>(across)) {
          EXPECT_EQ(c.interactions, 7 * c.island_resamples);
        }
        if (std::holds_alternative<ipf::Bootstrap>(within)) {
          EXPECT_EQ(c.particle_resamples, n * 7);
        }
      }
    }
  }
}

TEST(Run, IslandWeightsStayOneUnlessEss) {
  const FiniteHmm model(ipf::standard_finite_instance());
  for (const auto& across : kAcross) {
    ipf::IslandFilter<FiniteHmm> filter(model, config(5, 6, ipf::Bootstrap{}, across, 3));
    bool all_one = true;
    while (!filter.done()) {
      filter.advance();
      for (const double w : filter.system().island_weights) {
        all_one = all_one && w == 1.0;
      }
      for (const auto& island : filter.system().islands) {
        ASSERT_EQ(island.size(), 5u);
        ASSERT_EQ(island.step, filter.system().step);
      }
    }
    if (!std::holds_alternative<ipf::AdaptiveEss>(across)) {
      EXPECT_TRUE(all_one) << ipf::scheme_name(across);
    }
  }
}

TEST(Run, DeterministicAcrossWorkers) {
  const FiniteHmm model(ipf::standard_finite_instance());
  for (const auto& within : kWithin) {
    for (const auto& across : kAcross) {
      auto cfg = config(20, 9, within, across, 123);
      cfg.test_functions.push_back(ipf::square_function());
      const auto a = ipf::run(model, cfg);
      cfg.island_workers = 4;
      const auto b = ipf::run(model, cfg);
      EXPECT_EQ(a.estimates, b.estimates);
      EXPECT_EQ(a.log_gamma1, b.log_gamma1);
      EXPECT_EQ(a.counters.interactions, b.counters.interactions);
      EXPECT_EQ(a.counters.particle_resamples, b.counters.particle_resamples);
      cfg.seed = 124;
      EXPECT_NE(ipf::run(model, cfg).estimates, a.estimates);
    }
  }
}

TEST(Run, ExtinctionCarriesStep) {
  Matrix m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  const FiniteHmm model(FiniteModel(vec({0.5, 0.5}), {m, m, m},
                                    {vec({1, 1}), vec({1, 0.5}), vec({0, 0}), vec({1, 1})}));
  for (const auto& across : kAcross) {
    try {
      (void)ipf::run(model, config(3, 2, ipf::Bootstrap{}, across, 1));
      FAIL() << ipf::scheme_name(across);
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == Errc::extinction || e.code() == Errc::zero_mass) << e.what();
      EXPECT_EQ(e.step(), std::optional<std::size_t>(2)) << e.what();
    }
  }
}

// Independent islands: the estimator is an average of N2 i.i.d. island estimates, so
// its variance is exactly proportional to 1/N2 and its mean does not depend on N2.
TEST(Run, IndependentIslandsScaling) {
  const FiniteHmm model(ipf::standard_finite_instance());
  const auto collect = [&](std::size_t n2, std::uint64_t salt) {
    std::vector<double> v;
    for (std::uint64_t r = 0; r < 4000; ++r) {
      v.push_back(ipf::run(model, config(5, n2, ipf::Bootstrap{}, ipf::Independent{}, ipf::derive_seed(salt, {r})))
                      .estimates[0]);
    }
    return mean_stat(v);
  };
  const auto a = collect(25, 1);
  const auto b = collect(100, 2);
  EXPECT_NEAR(a.variance / b.variance, 4.0, 0.4);
  EXPECT_LT(std::abs(a.mean - b.mean), 1.96 * (a.se + b.se));
}

}  // namespace
