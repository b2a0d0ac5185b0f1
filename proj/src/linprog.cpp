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

#include "fairscarce/linprog.hpp"

#include <cmath>

namespace fairscarce {

std::optional<LpSolution> SolveStandardLp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                          const Eigen::VectorXd& c, std::vector<int> basis) {
  constexpr double kTol = 1e-12;
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  // Tableau rows 0..m-1 are constraints, column n holds the right-hand side.
  Eigen::MatrixXd t(m, n + 1);
  t.leftCols(n) = a;
  t.col(n) = b;

  auto pivot = [&](Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index r = 0; r < m; ++r) {
      if (r != row && t(r, col) != 0.0) t.row(r) -= t(r, col) * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = static_cast<int>(col);
  };
  for (Eigen::Index r = 0; r < m; ++r) pivot(r, basis[static_cast<std::size_t>(r)]);

  const int max_pivots = 50 * static_cast<int>(m + n) + 100;
  for (int it = 0; it < max_pivots; ++it) {
    Eigen::VectorXd duals_cost(m);
    for (Eigen::Index r = 0; r < m; ++r) duals_cost(r) = c(basis[static_cast<std::size_t>(r)]);
    // Reduced costs c_j - c_B' B^-1 A_j; the tableau already holds B^-1 A.
    Eigen::Index entering = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double reduced = c(j) - duals_cost.dot(t.col(j));
      if (reduced < -1e-10) {
        entering = j;
        break;
      }
    }
    if (entering < 0) {
      LpSolution sol;
      sol.x = Eigen::VectorXd::Zero(n);
      for (Eigen::Index r = 0; r < m; ++r) sol.x(basis[static_cast<std::size_t>(r)]) = t(r, n);
      sol.objective = c.dot(sol.x);
      return sol;
    }
    Eigen::Index leaving = -1;
    double best_ratio = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (t(r, entering) <= kTol) continue;
      const double ratio = t(r, n) / t(r, entering);
      if (leaving < 0 || ratio < best_ratio - 1e-14 ||
          (std::abs(ratio - best_ratio) <= 1e-14 &&
           basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leaving)])) {
        leaving = r;
        best_ratio = ratio;
      }
    }
    if (leaving < 0) return std::nullopt;
    pivot(leaving, entering);
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> SolveBestMixture(const Eigen::VectorXd& errors,
                                                const Eigen::MatrixXd& gammas, double eps,
                                                double bound) {
  const Eigen::Index k = gammas.rows();
  const Eigen::Index j = gammas.cols();
  // Columns: q (j), xi, slacks (k), artificial for the simplex row.
  const Eigen::Index n = j + 1 + k + 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 1, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  a.block(0, 0, k, j) = gammas.array() - eps;
  a.block(0, j, k, 1).setConstant(-1.0);
  a.block(0, j + 1, k, k) = Eigen::MatrixXd::Identity(k, k);
  a.block(k, 0, 1, j).setOnes();
  a(k, n - 1) = 1.0;
  b(k) = 1.0;
  c.head(j) = errors;
  c(j) = bound;
  // Big-M cost drives the artificial out of the basis.
  c(n - 1) = 1e6 * (1.0 + bound);
  std::vector<int> basis;
  for (Eigen::Index r = 0; r < k; ++r) basis.push_back(static_cast<int>(j + 1 + r));
  basis.push_back(static_cast<int>(n - 1));

  const auto sol = SolveStandardLp(a, b, c, basis);
  if (!sol || sol->x(n - 1) > 1e-9) return std::nullopt;
  Eigen::VectorXd q = sol->x.head(j).cwiseMax(0.0);
  const double total = q.sum();
  if (total <= 0.0) return std::nullopt;
  return q / total;
}

}  // namespace fairscarce
