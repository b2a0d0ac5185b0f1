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

// Uncertainty-aware sensitive-attribute classifier. A student network is
// trained on group-labeled rows with cross-entropy plus a consistency term
// against an exponential-moving-average teacher; the teacher's MC-dropout
// entropy is both the consistency gate and the emitted uncertainty.

#ifndef FAIRSCARCE_ATTRIBUTE_MODEL_HPP_
#define FAIRSCARCE_ATTRIBUTE_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairscarce/neural.hpp"
#include "fairscarce/tabular.hpp"
#include "fairscarce/uncertainty.hpp"

namespace fairscarce {

// value(t) = max_value * exp(-5 (1 - min(t / ramp_length, 1))^2)
struct RampSchedule {
  double max_value = 1.0;
  double ramp_length = 30.0;  // epochs

  double Value(double epoch) const;
  double Floor() const { return Value(0.0); }
};

double GaussianRampup(double epoch, const RampSchedule& schedule);

struct StudentTeacherState {
  MlpParams student;
  MlpParams teacher;
  AdamState adam;
  double ema_decay = 0.99;
  int epoch = 0;
  RampSchedule lambda_schedule;
  RampSchedule r_schedule;
};

// teacher <- decay * teacher + (1 - decay) * student, element-wise.
void EmaUpdate(StudentTeacherState& state);
void EmaUpdate(MlpParams& teacher, const MlpParams& student, double decay);

struct McPrediction {
  double p_group = 0.5;
  double u = kLn2;
};

// Mean sigmoid over `passes` MC-dropout forward passes, and its entropy.
// Rows are processed in fixed-size chunks, each with its own derived seed.
std::vector<McPrediction> McDropoutPredict(const MlpParams& teacher, const Eigen::MatrixXd& x,
                                           int passes, std::uint64_t seed);

// Rows whose teacher entropy is at most r take part in the consistency term.
std::vector<char> ConsistencyMask(std::span<const double> teacher_probs, double r);

struct AttributeConfig {
  std::vector<std::size_t> hidden = {64, 32};
  double dropout = 0.3;
  int max_epochs = 100;
  int patience = 10;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double ema_decay = 0.99;
  double lambda_max = 1.0;
  double r_max = kLn2;
  double ramp_length = 30.0;
  int mc_passes = 30;        // proxy prediction
  int train_mc_passes = 8;   // consistency gate during training
  double validation_fraction = 0.1;
  double calibration_fraction = 0.1;
  ConsistencySpace consistency_space = ConsistencySpace::kProbability;
  // Consistency denominator: rows in the mini-batch (true) or |D1| + |D2|.
  bool batch_universe = true;
  // An epoch is one pass over the unlabeled rows (labeled batches cycle);
  // otherwise one pass over the labeled rows.
  bool epoch_over_unlabeled = true;
  // Take a_hat from the student's deterministic output instead of the
  // teacher's MC mean. Uncertainty always comes from the teacher.
  bool proxy_from_student = false;
  // Roll back to the best validation epoch when training stops; otherwise
  // the state at the stopping epoch is kept.
  bool restore_best = false;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Positions within D2.
struct AttributeDataPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> calibration;
};

AttributeDataPlan PlanAttributeData(std::size_t d2_size, const AttributeConfig& config);

struct TrainingLogEntry {
  int epoch = 0;
  double supervised_loss = 0.0;
  double consistency_loss = 0.0;
  double lambda = 0.0;
  double r_threshold = 0.0;
  double mask_fraction = 0.0;
  double mean_uncertainty = 0.0;  // teacher, validation slice
  double validation_accuracy = 0.0;
};

struct AttributeTrainingResult {
  StudentTeacherState state;
  std::vector<TrainingLogEntry> log;
  AttributeDataPlan plan;
  int best_epoch = 0;
};

// Trains on the plan's D2 training rows (labeled) and all D1 rows
// (unlabeled). Throws kDivergedTraining on a non-finite loss.
AttributeTrainingResult TrainAttributeClassifier(const ScarceSplit& split,
                                                 const AttributeConfig& config);

struct ProxyRecord {
  std::uint64_t sample_id = 0;
  int a_hat = 1;
  double p_group = 0.5;
  double u = kLn2;
};

// One record per row, sorted by sample_id. a_hat = 1 iff p_group >= 0.5.
std::vector<ProxyRecord> PredictProxy(const StudentTeacherState& state, const Dataset& rows,
                                      int passes, std::uint64_t seed,
                                      bool proxy_from_student = false);

void WriteProxies(const std::vector<ProxyRecord>& proxies, const std::string& path);
std::vector<ProxyRecord> ReadProxies(const std::string& path);

void SaveAttributeCheckpoint(const StudentTeacherState& state, const std::string& path);
StudentTeacherState LoadAttributeCheckpoint(const std::string& path);

void WriteTrainingLog(const std::vector<TrainingLogEntry>& log, const std::string& path);

}  // namespace fairscarce

#endif  // FAIRSCARCE_ATTRIBUTE_MODEL_HPP_
