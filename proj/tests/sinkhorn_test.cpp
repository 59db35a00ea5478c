/*
 * Copyright 2026 The WCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "wcl/exact_ot.hpp"
#include "wcl/sinkhorn.hpp"

namespace {

using wcl::CostMatrix;
using wcl::PointCloud;
using wcl::SinkhornConfig;
using wcl::SinkhornMode;

PointCloud cloud(const Eigen::Matrix3Xd& p) { return PointCloud(p, "X"); }

SinkhornConfig converged_config() {
  SinkhornConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iters = 100000;
  return cfg;
}

// A cloud of well-separated points and a slightly displaced copy: the
// optimal coupling is the identity by a wide margin and Sinkhorn converges
// linearly.
std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> separated_pair(
    std::mt19937_64& rng, int n) {
  const Eigen::Matrix3Xd x = wcl_test::separated_points(rng, n, 0.3);
  std::normal_distribution<double> noise(0.0, 0.01);
  Eigen::Matrix3Xd y = x;
  for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] += noise(rng);
  return {x, y};
}

TEST(SinkhornConfig, Validation) {
  SinkhornConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), wcl::InputDomainError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), wcl::InputDomainError);
  cfg = {};
  cfg.tol = -1.0;
  EXPECT_THROW(cfg.validate(), wcl::InputDomainError);
}

TEST(CostMatrix, Examples) {
  Eigen::Matrix3Xd one(3, 1);
  one << 0.3, -1, 2;
  EXPECT_EQ(wcl::cost_matrix(cloud(one), cloud(one)).matrix()(0, 0), 0.0);

  Eigen::Matrix3Xd x(3, 1);
  x << 0, 0, 0;
  Eigen::Matrix3Xd y(3, 2);
  y << 1, 0, 0, 2, 0, 0;
  const CostMatrix c = wcl::cost_matrix(cloud(x), cloud(y));
  EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 4.0);
}

TEST(CostMatrix, MatchesPairLoop) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix3Xd x = wcl_test::random_points(rng, 4);
    const Eigen::Matrix3Xd y = wcl_test::random_points(rng, 5);
    const CostMatrix c = wcl::cost_matrix(cloud(x), cloud(y));
    ASSERT_EQ(c.rows(), 4);
    ASSERT_EQ(c.cols(), 5);
    EXPECT_LT((c.matrix() - wcl_test::pairwise_sq(x, y)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(CostMatrix, RejectsBadInput) {
  EXPECT_THROW(wcl::cost_matrix(cloud(Eigen::Matrix3Xd(3, 0)),
                                cloud(Eigen::Matrix3Xd::Zero(3, 1))),
               wcl::InputDomainError);
  Eigen::MatrixXd neg(1, 2);
  neg << 1.0, -0.5;
  EXPECT_THROW(CostMatrix{neg}, wcl::InputDomainError);
  Eigen::MatrixXd nan(1, 1);
  nan << NAN;
  EXPECT_THROW(CostMatrix{nan}, wcl::InputDomainError);
}

TEST(TransportPlan, RejectsNegativeMass) {
  Eigen::MatrixXd p(1, 2);
  p << 0.6, -0.1;
  EXPECT_THROW(wcl::TransportPlan{p}, wcl::NumericalDegeneracyError);
}

TEST(Solve, ThreeSeparatedPointsMatchOneToOne) {
  Eigen::Matrix3Xd x(3, 3);
  x << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  Eigen::Matrix3Xd y = x;
  y.row(2).setConstant(0.05);
  for (SinkhornMode mode : {SinkhornMode::naive, SinkhornMode::log_domain}) {
    SinkhornConfig cfg;
    cfg.mode = mode;
    const auto r = wcl::sinkhorn(wcl::cost_matrix(cloud(x), cloud(y)), cfg);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(r.plan(i, j), i == j ? 1.0 / 3.0 : 0.0, 1e-9);
      }
    }
    EXPECT_TRUE(r.plan.satisfies_marginals());
  }
}

TEST(Solve, SelfDistanceVanishes) {
  Eigen::Matrix3Xd x(3, 4);
  x << 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 1;
  const auto r = wcl::solve_log(wcl::cost_matrix(cloud(x), cloud(x)), {});
  EXPECT_LE(r.distance, 1e-6);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.plan(i, i), 0.25, 1e-9);
}

TEST(Solve, RandomFivePointsNearPermutationOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, 5)),
                                          cloud(wcl_test::random_points(rng, 5)));
    const double exact = wcl_test::assignment_by_permutations(c.matrix());
    EXPECT_NEAR(wcl::solve_log(c, converged_config()).distance, exact, 1e-3);
  }
}

TEST(Solve, OneByOne) {
  for (SinkhornMode mode : {SinkhornMode::naive, SinkhornMode::log_domain}) {
    // Naive mode needs a cost that does not underflow at eps = 1e-3.
    const double cost = mode == SinkhornMode::naive ? 0.25 : 2.5;
    SinkhornConfig cfg;
    cfg.mode = mode;
    const auto r = wcl::sinkhorn(CostMatrix(Eigen::MatrixXd::Constant(1, 1, cost)), cfg);
    EXPECT_DOUBLE_EQ(r.plan(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(r.distance, cost);
  }
}

TEST(Solve, NaiveAndLogAgreeWhereNaiveIsValid) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 30; ++t) {
    const int m = 1 + static_cast<int>(rng() % 12);
    const int n = 1 + static_cast<int>(rng() % 12);
    const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, m)),
                                          cloud(wcl_test::random_points(rng, n)));
    SinkhornConfig cfg;
    cfg.epsilon = 1e-2;
    const auto lg = wcl::solve_log(c, cfg);
    cfg.mode = SinkhornMode::naive;
    const auto nv = wcl::solve(c, cfg);
    EXPECT_EQ(lg.iterations, nv.iterations);
    EXPECT_LE(std::abs(lg.distance - nv.distance), 1e-9 * (1.0 + nv.distance));
    EXPECT_LT((lg.plan.matrix() - nv.plan.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Solve, NaiveUnderflowFailsLoudlyLogSucceeds) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(81.0, 100.0);
  for (int n = 2; n <= 6; ++n) {
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = u(rng);
    c(0, 0) = 100.0;
    SinkhornConfig cfg = converged_config();
    cfg.mode = SinkhornMode::naive;
    try {
      wcl::sinkhorn(CostMatrix(c), cfg);
      FAIL() << "naive mode should underflow";
    } catch (const wcl::NumericalDegeneracyError& e) {
      EXPECT_NE(std::string(e.what()).find("log_domain"), std::string::npos);
    }
    cfg.mode = SinkhornMode::log_domain;
    const auto r = wcl::sinkhorn(CostMatrix(c), cfg);
    EXPECT_TRUE(std::isfinite(r.distance));
    EXPECT_NEAR(r.distance, wcl_test::assignment_by_permutations(c), 1e-3);
  }
}

TEST(Solve, RectangularEndToEnd) {
  std::mt19937_64 rng(2);
  const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, 3)),
                                        cloud(wcl_test::random_points(rng, 7)));
  const auto r = wcl::solve_log(c, {});
  EXPECT_EQ(r.plan.rows(), 3);
  EXPECT_EQ(r.plan.cols(), 7);
  // The last update normalises columns exactly.
  EXPECT_LT(r.plan.col_violation(), 1e-14);
}

TEST(Solve, StoppingRuleAndIterationCap) {
  std::mt19937_64 rng(6);
  const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, 6)),
                                        cloud(wcl_test::random_points(rng, 6)));
  SinkhornConfig cfg;
  cfg.tol = 0.0;
  cfg.max_iters = 37;
  EXPECT_EQ(wcl::solve_log(c, cfg).iterations, 37);
  cfg.tol = 1e-3;
  cfg.max_iters = 100000;
  const auto r = wcl::solve_log(c, cfg);
  EXPECT_LT(r.iterations, 100000);
  EXPECT_LT(r.plan.row_violation(), 1e-3);
}

TEST(Solve, TapeRecordsEverySweep) {
  std::mt19937_64 rng(6);
  const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, 4)),
                                        cloud(wcl_test::random_points(rng, 5)));
  wcl::SinkhornTape tape;
  const auto r = wcl::solve_log(c, {}, &tape);
  EXPECT_EQ(tape.sweeps(), r.iterations);
  EXPECT_EQ(tape.beta.size(), tape.alpha.size() + 1);
}

TEST(Entropy, Examples) {
  EXPECT_DOUBLE_EQ(wcl::entropy(wcl::TransportPlan(Eigen::MatrixXd::Ones(1, 1))), 1.0);
  EXPECT_NEAR(wcl::entropy(wcl::TransportPlan(Eigen::MatrixXd::Constant(2, 2, 0.25))),
              1.0 + std::log(4.0), 1e-12);
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.0, 0.0, 0.5;
  EXPECT_NEAR(wcl::entropy(wcl::TransportPlan(p)), 1.0 + std::log(2.0), 1e-12);
}

// ---------------------------------------------------------------------------
// Exact oracle

TEST(ExactOt, Examples) {
  EXPECT_EQ(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(4, 4))).distance, 0.0);
  Eigen::MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  const auto r = wcl::exact_ot_oracle(CostMatrix(c));
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.plan(0, 0), 0.5);
  EXPECT_EQ(r.plan(1, 1), 0.5);
}

TEST(ExactOt, CyclicOptimum) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(3, 3, 5.0);
  c(0, 1) = 1.0;
  c(1, 2) = 1.0;
  c(2, 0) = 1.0;
  const auto r = wcl::exact_ot_oracle(CostMatrix(c));
  EXPECT_DOUBLE_EQ(r.distance, 1.0);
  EXPECT_DOUBLE_EQ(r.plan(0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.plan(1, 2), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.plan(2, 0), 1.0 / 3.0);
}

TEST(ExactOt, CapacityLimits) {
  EXPECT_THROW(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(9, 9))),
               wcl::CapacityError);
  EXPECT_THROW(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(4, 5))),
               wcl::CapacityError);
  EXPECT_THROW(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(3, 7))),
               wcl::CapacityError);
  EXPECT_NO_THROW(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(3, 6))));
  EXPECT_NO_THROW(wcl::exact_ot_oracle(CostMatrix(Eigen::MatrixXd::Zero(8, 8))));
}

TEST(ExactOt, SquareMatchesIndependentEnumeration) {
  std::mt19937_64 rng(12);
  for (int n = 1; n <= 7; ++n) {
    const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, n)),
                                          cloud(wcl_test::random_points(rng, n)));
    const auto r = wcl::exact_ot_oracle(c);
    EXPECT_NEAR(r.distance, wcl_test::assignment_by_permutations(c.matrix()), 1e-14);
    EXPECT_LT(r.plan.marginal_violation(), 1e-15);
  }
}

TEST(ExactOt, RectangularMatchesReplicatedAssignment) {
  std::mt19937_64 rng(13);
  const std::vector<std::pair<int, int>> shapes{{1, 5}, {2, 3}, {2, 4}, {3, 2},
                                                {2, 6}, {3, 6}, {6, 3}, {1, 1}};
  for (int rep = 0; rep < 5; ++rep) {
    for (const auto& [m, n] : shapes) {
      const CostMatrix c = wcl::cost_matrix(cloud(wcl_test::random_points(rng, m)),
                                            cloud(wcl_test::random_points(rng, n)));
      const auto r = wcl::exact_ot_oracle(c);
      EXPECT_NEAR(r.distance, wcl_test::rectangular_ot_by_replication(c.matrix()),
                  1e-12)
          << m << "x" << n;
      EXPECT_LT(r.plan.marginal_violation(), 1e-12);
      EXPECT_NEAR((r.plan.matrix().array() * c.matrix().array()).sum(), r.distance,
                  1e-14);
    }
  }
}

TEST(ExactOt, MetricAxioms) {
  std::mt19937_64 rng(14);
  const auto w = [](const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
    return wcl::exact_ot_oracle(wcl::cost_matrix(cloud(a), cloud(b))).distance;
  };
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 6;
    const Eigen::Matrix3Xd x = wcl_test::random_points(rng, n);
    const Eigen::Matrix3Xd y = wcl_test::random_points(rng, n);
    const Eigen::Matrix3Xd z = wcl_test::random_points(rng, n);
    EXPECT_EQ(w(x, y), w(y, x));
    EXPECT_EQ(w(x, x), 0.0);
    EXPECT_LE(std::sqrt(w(x, y)), std::sqrt(w(x, z)) + std::sqrt(w(z, y)) + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Properties after convergence

TEST(SinkhornProperties, MarginalsAfterConvergence) {
  std::mt19937_64 rng(40);
  for (int t = 0; t < 20; ++t) {
    const auto [x, y] = separated_pair(rng, 2 + t % 30);
    const auto r = wcl::solve_log(wcl::cost_matrix(cloud(x), cloud(y)), converged_config());
    EXPECT_LT(r.plan.row_violation(), 1e-6);
    EXPECT_LT(r.plan.col_violation(), 1e-6);
  }
}

TEST(SinkhornProperties, SymmetryAfterConvergence) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    const auto [x, y] = separated_pair(rng, 2 + t % 30);
    const auto a = wcl::solve_log(wcl::cost_matrix(cloud(x), cloud(y)), converged_config());
    const auto b = wcl::solve_log(wcl::cost_matrix(cloud(y), cloud(x)), converged_config());
    EXPECT_LE(std::abs(a.distance - b.distance), 1e-9 * (1.0 + a.distance));
    EXPECT_LT((a.plan.matrix() - b.plan.matrix().transpose()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SinkhornProperties, SelfDistanceBias) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix3Xd x = wcl_test::separated_points(rng, 2 + t % 30, 0.1);
    const auto r = wcl::solve_log(wcl::cost_matrix(cloud(x), cloud(x)), {});
    EXPECT_LE(r.distance, 1e-6);
  }
}

TEST(SinkhornProperties, OracleDominanceAfterConvergence) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 20; ++t) {
    const auto [x, y] = separated_pair(rng, 1 + t % 8);
    const CostMatrix c = wcl::cost_matrix(cloud(x), cloud(y));
    const double exact = wcl::exact_ot_oracle(c).distance;
    const double d = wcl::solve_log(c, converged_config()).distance;
    EXPECT_GE(d, exact - 1e-9);
    EXPECT_LE(d, exact + 1e-3);
  }
}

TEST(SinkhornProperties, LargerEpsilonDoesNotLowerSharpValue) {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 20; ++t) {
    const auto [x, y] = separated_pair(rng, 2 + t % 12);
    const CostMatrix c = wcl::cost_matrix(cloud(x), cloud(y));
    SinkhornConfig fine = converged_config();
    SinkhornConfig coarse = converged_config();
    coarse.epsilon = 1e-2;
    EXPECT_GE(wcl::solve_log(c, coarse).distance,
              wcl::solve_log(c, fine).distance - 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Gradients

TEST(DistanceGradient, MatchesFiniteDifferencesOfTheIteration) {
  std::mt19937_64 rng(50);
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    for (int t = 0; t < 4; ++t) {
      const int m = 1 + static_cast<int>(rng() % 5);
      const int n = 1 + static_cast<int>(rng() % 5);
      const Eigen::MatrixXd c0 =
          wcl_test::pairwise_sq(wcl_test::random_points(rng, m),
                                wcl_test::random_points(rng, n));
      SinkhornConfig cfg;
      cfg.epsilon = eps;
      cfg.tol = 0.0;
      cfg.max_iters = 25;
      wcl::SinkhornTape tape;
      wcl::solve_log(CostMatrix(c0), cfg, &tape);
      const Eigen::MatrixXd g = wcl::distance_gradient(CostMatrix(c0), tape);
      const double h = 1e-5 * eps;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          Eigen::MatrixXd cp = c0, cm = c0;
          cp(i, j) += h;
          cm(i, j) -= h;
          const double fd = (wcl::solve_log(CostMatrix(cp), cfg).distance -
                             wcl::solve_log(CostMatrix(cm), cfg).distance) /
                            (2 * h);
          EXPECT_NEAR(g(i, j), fd, 1e-5 * std::max(1.0, std::abs(fd)))
              << "eps " << eps << " entry " << i << "," << j;
        }
      }
    }
  }
}

TEST(CostPullback, MatchesFiniteDifferences) {
  std::mt19937_64 rng(51);
  const Eigen::Matrix3Xd x = wcl_test::random_points(rng, 4);
  const Eigen::Matrix3Xd y = wcl_test::random_points(rng, 3);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Random(4, 3);
  const auto f = [&](const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
    return (w.array() * wcl_test::pairwise_sq(a, b).array()).sum();
  };
  const auto g = wcl::cost_pullback(cloud(x), cloud(y), w);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::Matrix3Xd xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    EXPECT_NEAR(g.dx.data()[k], (f(xp, y) - f(xm, y)) / (2 * h), 1e-8);
  }
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    Eigen::Matrix3Xd yp = y, ym = y;
    yp.data()[k] += h;
    ym.data()[k] -= h;
    EXPECT_NEAR(g.dy.data()[k], (f(x, yp) - f(x, ym)) / (2 * h), 1e-8);
  }
}

}  // namespace
