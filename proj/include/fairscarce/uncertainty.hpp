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

#ifndef FAIRSCARCE_UNCERTAINTY_HPP_
#define FAIRSCARCE_UNCERTAINTY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairscarce {

inline constexpr double kLn2 = 0.69314718055994530942;

// -[p ln p + (1-p) ln(1-p)] with 0 ln 0 = 0. Inputs are clamped to [0, 1].
double BinaryEntropy(double p);

// Split conformal calibrator for a binary attribute; the nonconformity
// score of a label is one minus the probability assigned to it.
struct ConformalCalibrator {
  double epsilon = 0.1;
  double q_hat = 1.0;
  std::size_t calibration_size = 0;
};

ConformalCalibrator ConformalCalibrate(std::span<const double> probs,
                                       std::span<const int> truths, double epsilon);

struct PredictionSet {
  std::uint64_t sample_id = 0;
  bool has0 = false;
  bool has1 = false;

  int size() const { return static_cast<int>(has0) + static_cast<int>(has1); }
  bool Contains(int a) const { return a == 0 ? has0 : has1; }
  // "", "0", "1" or "01".
  std::string Encode() const;
};

PredictionSet ConformalSet(const ConformalCalibrator& cal, double p_group, std::uint64_t id);

struct CertaintyPartition {
  std::vector<std::uint64_t> certain;
  std::vector<std::uint64_t> uncertain;
};

// Singletons are certain; empty and two-element sets are uncertain.
CertaintyPartition PartitionByCertainty(std::span<const PredictionSet> sets);

// Low uncertainty iff p <= 1 - tau or p >= tau.
CertaintyPartition ConfidenceBandFilter(std::span<const double> probs,
                                        std::span<const std::uint64_t> ids, double tau);

// CSV with header sample_id,set.
void WritePredictionSets(std::span<const PredictionSet> sets, const std::string& path);
std::vector<PredictionSet> ReadPredictionSets(const std::string& path);

}  // namespace fairscarce

#endif  // FAIRSCARCE_UNCERTAINTY_HPP_
