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
#include <numbers>
#include <random>
#include <vector>

#include "ipf/fk.hpp"
#include "test_util.hpp"

namespace {

using ipf::Distribution;
using ipf::Errc;
using ipf::Error;
using ipf::FiniteModel;
using ipf::Matrix;
using ipf::Vector;
using ipf::testing::path_sum;
using ipf::testing::random_model;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) {
    out[i++] = x;
  }
  return out;
}

TEST(Distribution, RejectsInvalid) {
  EXPECT_THROW(Distribution(vec({0.5, 0.6})), Error);
  EXPECT_THROW(Distribution(vec({1.5, -0.5})), Error);
  EXPECT_THROW(Distribution{Vector{}}, Error);
  EXPECT_NO_THROW(Distribution(vec({0.25, 0.75})));
}

TEST(FiniteModel, RejectsInvalidTables) {
  const Vector eta0 = vec({0.5, 0.5});
  Matrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  try {
    FiniteModel(eta0, {bad}, {vec({1, 1}), vec({1, 1})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_tables);
  }
  Matrix ok(2, 2);
  ok << 0.5, 0.5, 0.5, 0.5;
  EXPECT_THROW(FiniteModel(eta0, {ok}, {vec({1, 1})}), Error);
  EXPECT_THROW(FiniteModel(eta0, {ok}, {vec({1, 1}), vec({1, -1})}), Error);
  EXPECT_THROW(FiniteModel(eta0, {ok}, {vec({1, 1}), vec({1, 1, 1})}), Error);
  EXPECT_NO_THROW(FiniteModel(eta0, {ok}, {vec({1, 1}), vec({0, 1})}));
}

TEST(BoltzmannGibbs, Examples) {
  const Distribution mu(vec({0.5, 0.5}));
  const auto psi = ipf::boltzmann_gibbs(mu, vec({1.0, 3.0}));
  EXPECT_NEAR(psi.probs()[0], 0.25, 1e-15);
  EXPECT_NEAR(psi.probs()[1], 0.75, 1e-15);
  const auto same = ipf::boltzmann_gibbs(Distribution(vec({0.2, 0.3, 0.5})), vec({4.0, 4.0, 4.0}));
  EXPECT_NEAR((same.probs() - vec({0.2, 0.3, 0.5})).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  try {
    (void)ipf::boltzmann_gibbs(Distribution(vec({1.0, 0.0})), vec({0.0, 5.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_mass);
  }
}

TEST(BoltzmannGibbs, OutputIsDistribution) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index d = 1 + trial % 7;
    Vector mu = Vector::Zero(d);
    Vector g = Vector::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      mu[i] = u(gen) < 0.2 ? 0.0 : u(gen);
      g[i] = u(gen) < 0.2 ? 0.0 : std::pow(10.0, 6.0 * u(gen) - 3.0);
    }
    if (mu.sum() == 0.0) {
      mu[0] = 1.0;
    }
    mu /= mu.sum();
    mu /= mu.sum();
    if (mu.dot(g) == 0.0) {
      continue;
    }
    const auto psi = ipf::boltzmann_gibbs(Distribution(mu), g);
    EXPECT_NEAR(psi.probs().sum(), 1.0, 1e-12);
    EXPECT_GE(psi.probs().minCoeff(), 0.0);
  }
}

TEST(ExactFlow, UnitPotentialsGiveMarkovMarginals) {
  std::mt19937_64 gen(2);
  FiniteModel m = random_model(gen, 3, 4);
  std::vector<Vector> ones(5, Vector::Ones(3));
  const FiniteModel unit(m.initial(), m.transitions(), ones);
  const auto flow = ipf::exact_flow(unit);
  Vector law = m.initial();
  for (std::size_t p = 0; p <= 4; ++p) {
    EXPECT_LT((flow[p].eta.probs() - law).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(flow[p].gamma1(), 1.0, 1e-12);
    if (p < 4) {
      law = (law.transpose() * m.transition(p + 1)).transpose();
    }
  }
}

TEST(ExactFlow, DeterministicTransition) {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  const double c = 0.37;
  const FiniteModel m(vec({1.0, 0.0}), {swap}, {vec({c, 0.9}), vec({1.0, 1.0})});
  const auto flow = ipf::exact_flow(m);
  EXPECT_NEAR(flow[1].eta.probs()[0], 0.0, 1e-15);
  EXPECT_NEAR(flow[1].eta.probs()[1], 1.0, 1e-15);
  EXPECT_NEAR(flow[1].gamma1(), c, 1e-15);
}

// gamma_p(1) = path_sum(p, 1) and eta_p(f) = path_sum(p, f) / path_sum(p, 1).
TEST(ExactFlow, MatchesPathEnumeration) {
  std::mt19937_64 gen(3);
  for (Eigen::Index d = 1; d <= 3; ++d) {
    for (std::size_t n = 0; n <= 4; ++n) {
      for (int rep = 0; rep < 3; ++rep) {
        const FiniteModel m = random_model(gen, d, n, 0.01);
        const auto flow = ipf::exact_flow(m);
        ASSERT_EQ(flow.size(), n + 1);
        for (std::size_t p = 0; p <= n; ++p) {
          const double z = path_sum(m, p, Vector::Ones(d));
          EXPECT_NEAR(flow[p].gamma1() / z, 1.0, 1e-12);
          for (Eigen::Index x = 0; x < d; ++x) {
            const Vector e = Vector::Unit(d, x);
            EXPECT_NEAR(flow[p].eta.probs()[x], path_sum(m, p, e) / z, 1e-12);
          }
        }
      }
    }
  }
}

TEST(ExactFlow, ExtinctionReportsStep) {
  Matrix id = Matrix::Identity(2, 2);
  const FiniteModel m(vec({1.0, 0.0}), {id, id}, {vec({1.0, 1.0}), vec({0.0, 1.0}), vec({1.0, 1.0})});
  try {
    (void)ipf::exact_flow(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::extinction);
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 1u);
  }
}

TEST(QKernel, IdentityAndUnitPotential) {
  std::mt19937_64 gen(4);
  const FiniteModel m = random_model(gen, 3, 3);
  for (std::size_t p = 0; p <= 3; ++p) {
    EXPECT_TRUE(ipf::q_kernel(m, p, p).entries.isApprox(Matrix::Identity(3, 3), 0.0));
    EXPECT_TRUE(ipf::qbar_kernel(m, p, p).entries.isApprox(Matrix::Identity(3, 3), 0.0));
  }
  std::vector<Vector> ones(4, Vector::Ones(3));
  const FiniteModel unit(m.initial(), m.transitions(), ones);
  const Matrix q = ipf::q_kernel(unit, 1, 3).entries;
  EXPECT_LT((q - m.transition(2) * m.transition(3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((q.rowwise().sum() - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(QKernel, ExplicitProduct) {
  std::mt19937_64 gen(5);
  const FiniteModel m = random_model(gen, 2, 2);
  const Matrix expected = Matrix(m.potential(0).asDiagonal()) * m.transition(1) *
                          Matrix(m.potential(1).asDiagonal()) * m.transition(2);
  EXPECT_LT((ipf::q_kernel(m, 0, 2).entries - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(ipf::q_kernel(m, 0, 2).from_step, 0u);
  EXPECT_EQ(ipf::q_kernel(m, 0, 2).to_step, 2u);
}

TEST(QKernel, IndexOrder) {
  std::mt19937_64 gen(6);
  const FiniteModel m = random_model(gen, 2, 3);
  for (const auto call : {+[](const FiniteModel& mm) { (void)ipf::q_kernel(mm, 2, 1); },
                          +[](const FiniteModel& mm) { (void)ipf::qbar_kernel(mm, 3, 2); }}) {
    try {
      call(m);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::index_order);
    }
  }
}

TEST(QKernel, SemigroupAndLinearFlow) {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    const FiniteModel m = random_model(gen, 1 + rep % 3, 4, 0.01);
    const auto flow = ipf::exact_flow(m);
    for (std::size_t p = 0; p <= 4; ++p) {
      for (std::size_t q = p; q <= 4; ++q) {
        for (std::size_t n = q; n <= 4; ++n) {
          const Matrix lhs = ipf::q_kernel(m, p, n).entries;
          const Matrix rhs = ipf::q_kernel(m, p, q).entries * ipf::q_kernel(m, q, n).entries;
          EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
        }
      }
    }
    for (std::size_t n = 0; n <= 4; ++n) {
      const double g = m.initial().dot(ipf::q_kernel(m, 0, n).entries * Vector::Ones(m.states()));
      EXPECT_NEAR(flow[n].gamma1(), g, 1e-12);
    }
  }
}

TEST(QbarKernel, NormalizedIdentities) {
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    const FiniteModel m = random_model(gen, 3, 4, 0.01);
    const auto flow = ipf::exact_flow(m);
    for (std::size_t p = 0; p <= 4; ++p) {
      for (std::size_t n = p; n <= 4; ++n) {
        const Matrix qbar = ipf::qbar_kernel(m, flow, p, n).entries;
        const Matrix q = ipf::q_kernel(m, p, n).entries;
        const double norm = flow[p].eta.probs().dot(q * Vector::Ones(3));
        EXPECT_LT((qbar - q / norm).cwiseAbs().maxCoeff(), 1e-12);
        const Vector pushed = (flow[p].eta.probs().transpose() * qbar).transpose();
        EXPECT_LT((pushed - flow[n].eta.probs()).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(QbarKernel, ConstantPotentialPreservesOnes) {
  std::mt19937_64 gen(9);
  const FiniteModel base = random_model(gen, 3, 4);
  std::vector<Vector> c(5, Vector::Constant(3, 0.3));
  const FiniteModel m(base.initial(), base.transitions(), c);
  for (std::size_t p = 0; p <= 4; ++p) {
    const Vector one = ipf::qbar_kernel(m, p, 4).entries * Vector::Ones(3);
    EXPECT_LT((one - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EpsilonSelectionKernel, PreservesBoltzmannGibbs) {
  std::mt19937_64 gen(10);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = 1 + rep % 5;
    Vector mu = ipf::testing::random_vector(gen, d, 0.01, 1.0);
    mu /= mu.sum();
    const Vector g = ipf::testing::random_vector(gen, d, 0.0, 2.0);
    const double eps = (rep % 4) * 0.25 / g.maxCoeff();
    const Matrix s = ipf::epsilon_selection_kernel(Distribution(mu), g, eps);
    EXPECT_LT((s.rowwise().sum() - Vector::Ones(d)).cwiseAbs().maxCoeff(), 1e-12);
    const Vector mus = (mu.transpose() * s).transpose();
    EXPECT_LT((mus - ipf::boltzmann_gibbs(Distribution(mu), g).probs()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EpsilonSelectionKernel, ZeroEpsilonIsBootstrap) {
  const Distribution mu(vec({0.2, 0.8}));
  const Vector g = vec({2.0, 0.5});
  const Matrix s = ipf::epsilon_selection_kernel(mu, g, 0.0);
  const Vector psi = ipf::boltzmann_gibbs(mu, g).probs();
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_LT((s.row(i).transpose() - psi).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(EpsilonSelectionKernel, RejectsOutOfRange) {
  const Distribution mu(vec({0.5, 0.5}));
  for (const double eps : {-0.1, 0.6}) {
    try {
      (void)ipf::epsilon_selection_kernel(mu, vec({1.0, 2.0}), eps);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::epsilon_out_of_range);
    }
  }
  EXPECT_NO_THROW((void)ipf::epsilon_selection_kernel(mu, vec({1.0, 2.0}), 0.5));
}

TEST(Kalman, EmptyObservationsGivePrior) {
  const auto out = ipf::kalman_predictive(0.9, 1.0, 1.0, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].mean, 0.0);
  EXPECT_NEAR(out[0].variance, 1.0 / (1.0 - 0.81), 1e-14);
}

TEST(Kalman, NoMemoryWhenPhiIsZero) {
  const std::vector<double> y = {1.0, -2.0, 0.5, 3.0};
  const auto out = ipf::kalman_predictive(0.0, 0.7, 1.3, y);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t p = 1; p < out.size(); ++p) {
    EXPECT_EQ(out[p].mean, 0.0);
    EXPECT_NEAR(out[p].variance, 0.49, 1e-15);
  }
}

TEST(Kalman, RejectsInvalidParameters) {
  EXPECT_THROW((void)ipf::kalman_predictive(1.0, 1.0, 1.0, {}), Error);
  EXPECT_THROW((void)ipf::kalman_predictive(0.5, 0.0, 1.0, {}), Error);
  EXPECT_THROW((void)ipf::kalman_predictive(0.5, 1.0, -1.0, {}), Error);
}

// Filtering recursion on a uniform grid, trapezoid rule.
TEST(Kalman, MatchesGridQuadrature) {
  const double phi = 0.8;
  const double su = 0.6;
  const double sv = 0.9;
  const std::vector<double> y = {0.4, -1.1, 2.0, 0.3, -0.6};
  const auto kf = ipf::kalman_predictive(phi, su, sv, y);

  const int k = 2401;
  const double lo = -8.0;
  const double h = 16.0 / (k - 1);
  std::vector<double> x(k);
  for (int i = 0; i < k; ++i) {
    x[static_cast<std::size_t>(i)] = lo + h * i;
  }
  const auto normal = [](double z, double m, double v) {
    return std::exp(-0.5 * (z - m) * (z - m) / v) / std::sqrt(2.0 * std::numbers::pi * v);
  };
  std::vector<double> pred(k);
  for (std::size_t i = 0; i < x.size(); ++i) {
    pred[i] = normal(x[i], 0.0, su * su / (1.0 - phi * phi));
  }
  for (std::size_t p = 0; p <= y.size(); ++p) {
    double z = 0;
    double m1 = 0;
    double m2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      z += pred[i];
      m1 += pred[i] * x[i];
      m2 += pred[i] * x[i] * x[i];
    }
    const double mean = m1 / z;
    EXPECT_NEAR(kf[p].mean, mean, 1e-6) << "step " << p;
    EXPECT_NEAR(kf[p].variance, m2 / z - mean * mean, 1e-6) << "step " << p;
    if (p == y.size()) {
      break;
    }
    std::vector<double> filt(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      filt[i] = pred[i] * normal(y[p], x[i], sv * sv);
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += filt[i] * normal(x[j], phi * x[i], su * su);
      }
      pred[j] = s * h;
    }
  }
}

}  // namespace
