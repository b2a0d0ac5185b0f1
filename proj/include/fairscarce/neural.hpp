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

// Feed-forward network engine: rectifier hidden layers with inverted
// dropout, a single output logit, analytic back-propagation and Adam.

#ifndef FAIRSCARCE_NEURAL_HPP_
#define FAIRSCARCE_NEURAL_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairscarce {

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::VectorXd bias;    // fan_out

  bool operator==(const DenseLayer& o) const {
    return weight == o.weight && bias == o.bias;
  }
};

// Hidden layers use the rectifier and are each followed by dropout; the
// last layer has fan_out 1 and produces the logit.
struct MlpParams {
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;

  static MlpParams Create(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          double dropout_rate, std::uint64_t seed);

  std::size_t input_dim() const;
  bool SameShape(const MlpParams& other) const;
  // Throws kShapeMismatch / kFormat when layers do not chain or hold
  // non-finite values.
  void Validate() const;
  bool operator==(const MlpParams& o) const {
    return dropout_rate == o.dropout_rate && layers == o.layers;
  }
};

using Gradient = std::vector<DenseLayer>;

enum class DropoutMode { kTrain, kEval, kMonteCarlo };

// Masks for call k are drawn from a stream seeded by (seed, k), so a plan
// copied before a call replays the same masks.
class DropoutPlan {
 public:
  DropoutPlan(DropoutMode mode, std::uint64_t seed) : mode_(mode), seed_(seed) {}
  static DropoutPlan Eval() { return DropoutPlan(DropoutMode::kEval, 0); }

  DropoutMode mode() const { return mode_; }
  bool stochastic() const { return mode_ != DropoutMode::kEval; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t calls() const { return calls_; }
  std::uint64_t NextStreamSeed();

 private:
  DropoutMode mode_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer (post-dropout)
  std::vector<Eigen::MatrixXd> pre_activations;  // hidden layers only
  std::vector<Eigen::MatrixXd> masks;        // scaled keep masks, hidden layers
};

struct ForwardResult {
  Eigen::VectorXd logits;
  ForwardCache cache;
};

ForwardResult Forward(const MlpParams& params, const Eigen::MatrixXd& x, DropoutPlan& plan);
Eigen::VectorXd ForwardLogits(const MlpParams& params, const Eigen::MatrixXd& x,
                              DropoutPlan& plan);

// Where the consistency term compares student and teacher: squared
// difference of sigmoid outputs, or of raw logits.
enum class ConsistencySpace { kProbability, kLogit };

// Per-row supervision for one batch. labels[i] < 0 marks an unlabeled row;
// consistency_mask selects rows compared against teacher_logits.
struct BatchTargets {
  std::vector<int> labels;
  Eigen::VectorXd teacher_logits;
  std::vector<char> consistency_mask;
  // Denominator of the consistency term; 0 means "rows in this batch".
  double universe_size = 0.0;
  ConsistencySpace consistency_space = ConsistencySpace::kProbability;
};

// total = ce_scale * L_s + consistency_scale * L_c
struct LossSpec {
  double ce_scale = 1.0;
  double consistency_scale = 0.0;

  static LossSpec CrossEntropy() { return {1.0, 0.0}; }
  static LossSpec Consistency() { return {0.0, 1.0}; }
  static LossSpec Combined(double lambda) { return {1.0, lambda}; }
};

double Sigmoid(double z);

// Mean of -[a log s(z) + (1-a) log(1-s(z))], computed in logit space.
double BinaryCrossEntropy(const Eigen::VectorXd& logits, const std::vector<int>& targets);

// Sum of squared student/teacher differences over masked rows divided by
// universe_size.
double ConsistencyLoss(const Eigen::VectorXd& student_logits,
                       const Eigen::VectorXd& teacher_logits,
                       const std::vector<char>& mask, double universe_size,
                       ConsistencySpace space = ConsistencySpace::kProbability);

double EvaluateLoss(const Eigen::VectorXd& logits, const BatchTargets& targets,
                    const LossSpec& spec);
double EvaluateLoss(const MlpParams& params, const Eigen::MatrixXd& x,
                    const BatchTargets& targets, const LossSpec& spec, DropoutPlan plan);

struct GradResult {
  Gradient grad;
  double loss = 0.0;
  Eigen::VectorXd logits;
};

GradResult ComputeGradient(const MlpParams& params, const Eigen::MatrixXd& x,
                           const BatchTargets& targets, const LossSpec& spec,
                           DropoutPlan& plan);

struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState ZerosLike(const MlpParams& params, double lr = 1e-3);
  bool operator==(const AdamState& o) const;
};

void AdamStep(AdamState& state, MlpParams& params, const Gradient& grad);

// Text checkpoint, lossless for every double.
std::string SerializeMlp(const MlpParams& params);
MlpParams ParseMlp(const std::string& text);
void SaveMlp(const MlpParams& params, const std::string& path);
MlpParams LoadMlp(const std::string& path);

}  // namespace fairscarce

#endif  // FAIRSCARCE_NEURAL_HPP_
