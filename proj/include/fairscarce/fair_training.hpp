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

// Fair classification by exponentiated gradient over a cost-sensitive base
// learner, plus the row selections that feed it proxy attributes.

#ifndef FAIRSCARCE_FAIR_TRAINING_HPP_
#define FAIRSCARCE_FAIR_TRAINING_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fairscarce/attribute_model.hpp"
#include "fairscarce/tabular.hpp"

namespace fairscarce {

enum class ConstraintKind { kDemographicParity, kEqualizedOdds, kEqualOpportunity };

// "dp", "eod", "eop".
ConstraintKind ParseConstraintKind(std::string_view name);
std::string ConstraintKindName(ConstraintKind kind);

// Each moment is a conditioning event (all rows, or Y = y). For every moment
// and group g the constraint pair is
//   +-(E[h | event, A=g] - E[h | event]) <= slack.
struct MomentConstraint {
  ConstraintKind kind = ConstraintKind::kDemographicParity;
  double slack = 0.0;

  // -1 for "all rows", otherwise the label value conditioned on.
  std::vector<int> Events() const;
  std::size_t size() const { return Events().size() * 4; }
};

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;

  Eigen::VectorXd Decision(const Eigen::MatrixXd& x) const;
};

struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  // Vote (+1 / -1) for rows with x <= threshold and x > threshold.
  int left = -1;
  int right = 1;
  double alpha = 0.0;
};

struct StumpEnsemble {
  std::vector<Stump> stumps;
  std::size_t dim = 0;

  Eigen::VectorXd Decision(const Eigen::MatrixXd& x) const;
};

using BaseModel = std::variant<LinearModel, StumpEnsemble>;

// Hard 0/1 predictions: decision >= 0 maps to 1.
Eigen::VectorXd PredictHard(const BaseModel& model, const Eigen::MatrixXd& x);

struct RandomizedClassifier {
  std::vector<BaseModel> members;
  std::vector<double> weights;

  // sum_j q_j h_j(x): the probability of predicting 1.
  Eigen::VectorXd ExpectedPredictions(const Eigen::MatrixXd& x) const;
  void Validate() const;
};

std::string SerializeClassifier(const RandomizedClassifier& clf);
RandomizedClassifier ParseClassifier(std::string_view text);
void SaveClassifier(const RandomizedClassifier& clf, const std::string& path);
RandomizedClassifier LoadClassifier(const std::string& path);

struct WeightedSample {
  std::uint64_t sample_id = 0;
  Eigen::RowVectorXd features;
  int label = 0;
  int a_hat = -1;  // -1: not touched by the constraint
  double weight = 1.0;
};

// Column-wise storage of a WeightedSample list.
struct WeightedSamples {
  Eigen::MatrixXd features;
  std::vector<std::uint64_t> sample_ids;
  std::vector<int> labels;
  std::vector<int> a_hat;
  std::vector<double> weights;

  std::size_t size() const { return sample_ids.size(); }
  WeightedSample at(std::size_t i) const;
  void Validate() const;
};

// Rows of a labeled dataset with a given attribute vector and weight 1.
WeightedSamples SamplesFromDataset(const Dataset& ds, std::span<const int> a_hat);

enum class BaseLearnerKind { kLogistic, kStumps };

struct BaseLearnerOptions {
  BaseLearnerKind kind = BaseLearnerKind::kLogistic;
  double l2 = 1e-4;
  int max_iterations = 5000;
  double gradient_tolerance = 1e-6;
  int rounds = 50;  // boosting rounds for kStumps
};

// Minimizes sum_i |c_i| * logloss(1{c_i < 0}, x_i) / sum|c| + l2/2 |w|^2.
// A negative cost means predicting 1 is the cheaper choice. Newton steps
// with step halving; throws kNonFiniteCost.
LinearModel WeightedLogRegFit(const Eigen::MatrixXd& x, std::span<const double> costs,
                              const BaseLearnerOptions& options,
                              const LinearModel* warm_start = nullptr);

// Discrete AdaBoost over decision stumps on the same cost encoding.
StumpEnsemble WeightedStumpFit(const Eigen::MatrixXd& x, std::span<const double> costs,
                               const BaseLearnerOptions& options);

BaseModel FitBase(const Eigen::MatrixXd& x, std::span<const double> costs,
                  const BaseLearnerOptions& options);

// Plain error minimization: cost (1 - 2y) per row.
BaseModel FitUnconstrained(const Eigen::MatrixXd& x, std::span<const int> labels,
                           const BaseLearnerOptions& options);

struct LagrangeState {
  Eigen::VectorXd theta;
  Eigen::VectorXd lambda;
  double bound = 100.0;
  double eta = 2.0;
  int iteration = 0;
  std::vector<Eigen::VectorXd> violations;  // best response, per iteration

  // lambda_k = B exp(theta_k) / (1 + sum exp(theta)), so |lambda|_1 <= B.
  void Normalize();
};

struct ExpGradOptions {
  MomentConstraint constraint;
  int iterations = 50;
  double eta = 2.0;
  double bound = 100.0;
  double gap_tolerance = 1e-3;
  int min_iterations = 5;
  BaseLearnerOptions base;
  std::uint64_t seed = 0;
};

struct ExpGradResult {
  RandomizedClassifier classifier;
  double gap = 0.0;
  double max_violation = 0.0;  // max_k gamma_k(Q) - slack on training rows
  int iterations = 0;
  bool converged = false;
  std::vector<double> gap_history;
};

// Constraint values gamma_k(h) for fractional predictions h, in the order
// event-major, then group 0/1, then sign +/-.
Eigen::VectorXd ConstraintValues(const WeightedSamples& rows, const MomentConstraint& c,
                                 const Eigen::VectorXd& h);

ExpGradResult ExpGradTrain(const WeightedSamples& rows, const ExpGradOptions& options);

// Rows with u <= h, weight 1.
WeightedSamples FilterCertain(std::span<const ProxyRecord> proxies, const Dataset& d1, double h);

enum class WeightFormula { kNormalizedEntropy, kRawEntropy };

// Every row, weight 1 - u / ln 2 (or 1 - u), clamped to [0, 1].
WeightedSamples WeightFromUncertainty(std::span<const ProxyRecord> proxies, const Dataset& d1,
                                      WeightFormula formula = WeightFormula::kNormalizedEntropy);

// Rows with u >= h; sensitive stays masked.
Dataset SelectUncertain(std::span<const ProxyRecord> proxies, const Dataset& d1, double h);

// Majority sensitive value among the k nearest D2 rows (Euclidean); ties
// go to 1. Nearest-distance ties resolve to the lower D2 index.
std::vector<int> KnnImpute(const Dataset& d1, const Dataset& d2, std::size_t k);

}  // namespace fairscarce

#endif  // FAIRSCARCE_FAIR_TRAINING_HPP_
