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

// Dense simplex for small linear programs in standard form.

#ifndef FAIRSCARCE_LINPROG_HPP_
#define FAIRSCARCE_LINPROG_HPP_

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace fairscarce {

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
};

// minimize c'x  subject to  A x = b, x >= 0, with b >= 0 and `basis`
// naming m columns that form an identity in A (a feasible start). Bland's
// rule; returns nullopt when unbounded or the pivot budget runs out.
std::optional<LpSolution> SolveStandardLp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                          const Eigen::VectorXd& c, std::vector<int> basis);

// Best mixture over candidate classifiers:
//   minimize sum_j q_j err_j + bound * xi
//   s.t.     sum_j q_j (gamma_kj - eps) <= xi  for every constraint k
//            sum_j q_j = 1, q >= 0, xi >= 0
// gammas is K x J. Returns the mixing weights q.
std::optional<Eigen::VectorXd> SolveBestMixture(const Eigen::VectorXd& errors,
                                                const Eigen::MatrixXd& gammas, double eps,
                                                double bound);

}  // namespace fairscarce

#endif  // FAIRSCARCE_LINPROG_HPP_
