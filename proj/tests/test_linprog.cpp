/*
 * Copyright 2026 The fairscarce Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>

#include <gtest/gtest.h>

#include "fairscarce/linprog.hpp"
#include "fairscarce/rng.hpp"
#include "test_support.hpp"

namespace fairscarce {
namespace {

TEST(Simplex, HandProblem) {
  // max x + y  s.t.  x + 2y <= 4, 3x + y <= 6  ->  x = 8/5, y = 6/5
  Eigen::MatrixXd a(2, 4);
  a << 1, 2, 1, 0, 3, 1, 0, 1;
  Eigen::VectorXd b(2), c(4);
  b << 4, 6;
  c << -1, -1, 0, 0;
  const auto sol = SolveStandardLp(a, b, c, {2, 3});
  ASSERT_TRUE(sol.has_value());
  EXPECT_NEAR(sol->x(0), 1.6, 1e-12);
  EXPECT_NEAR(sol->x(1), 1.2, 1e-12);
  EXPECT_NEAR(sol->objective, -2.8, 1e-12);
}

TEST(Simplex, DetectsUnbounded) {
  // min -x  s.t.  x - y + s = 1
  Eigen::MatrixXd a(1, 3);
  a << 1, -1, 1;
  Eigen::VectorXd b(1), c(3);
  b << 1;
  c << -1, 0, 0;
  EXPECT_FALSE(SolveStandardLp(a, b, c, {2}).has_value());
}

TEST(Simplex, MatchesVertexEnumeration) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(rng.UniformIndex(3));
    const int k = 1 + static_cast<int>(rng.UniformIndex(4));
    Eigen::MatrixXd a(m, k + m);
    a.setZero();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < k; ++j) a(i, j) = rng.Uniform(0.1, 1.0);
      a(i, k + i) = 1.0;
    }
    Eigen::VectorXd b(m), c(k + m);
    for (int i = 0; i < m; ++i) b(i) = rng.Bernoulli(0.2) ? 0.0 : rng.Uniform(0.0, 3.0);  // some degeneracy
    for (int j = 0; j < k + m; ++j) c(j) = rng.Uniform(-1.0, 1.0);
    std::vector<int> basis;
    for (int i = 0; i < m; ++i) basis.push_back(k + i);
    const auto sol = SolveStandardLp(a, b, c, basis);
    const auto oracle = testing::EnumerateLpVertices(a, b, c);
    ASSERT_TRUE(sol.has_value());
    ASSERT_TRUE(oracle.has_value());
    EXPECT_NEAR(sol->objective, *oracle, 1e-9);
    EXPECT_LT((a * sol->x - b).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(sol->x.minCoeff(), -1e-12);
  }
}

// The mixture problem written out in standard form independently:
// variables q (J), xi, slacks s (K);  sum_j q_j (g_kj - eps) - xi + s_k = 0,
// sum_j q_j = 1.
double MixtureOracle(const Eigen::VectorXd& err, const Eigen::MatrixXd& g, double eps, double bound) {
  const int j = static_cast<int>(err.size()), k = static_cast<int>(g.rows());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 1, j + 1 + k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1), c = Eigen::VectorXd::Zero(j + 1 + k);
  for (int r = 0; r < k; ++r) {
    for (int col = 0; col < j; ++col) a(r, col) = g(r, col) - eps;
    a(r, j) = -1.0;
    a(r, j + 1 + r) = 1.0;
  }
  for (int col = 0; col < j; ++col) a(k, col) = 1.0;
  b(k) = 1.0;
  c.head(j) = err;
  c(j) = bound;
  return *testing::EnumerateLpVertices(a, b, c);
}

TEST(BestMixture, MatchesOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int j = 1 + static_cast<int>(rng.UniformIndex(4));
    const int k = 1 + static_cast<int>(rng.UniformIndex(4));
    Eigen::VectorXd err(j);
    Eigen::MatrixXd g(k, j);
    for (int c = 0; c < j; ++c) err(c) = rng.Uniform(0.0, 0.5);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < j; ++c) g(r, c) = rng.Uniform(-0.3, 0.3);
    }
    const double eps = rng.Uniform(0.0, 0.1), bound = rng.Bernoulli(0.5) ? 1.0 : 100.0;
    const auto q = SolveBestMixture(err, g, eps, bound);
    ASSERT_TRUE(q.has_value());
    EXPECT_NEAR(q->sum(), 1.0, 1e-12);
    EXPECT_GE(q->minCoeff(), 0.0);
    const double viol = std::max(0.0, ((g.array() - eps).matrix() * *q).maxCoeff());
    const double value = err.dot(*q) + bound * viol;
    EXPECT_NEAR(value, MixtureOracle(err, g, eps, bound), 1e-8);
  }
}

}  // namespace
}  // namespace fairscarce
