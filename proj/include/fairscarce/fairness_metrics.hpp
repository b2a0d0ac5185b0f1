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

// Group fairness metrics. Predictions may be fractional: for a randomized
// classifier each entry is the probability of a positive prediction, and
// every rate below becomes an expected rate.

#ifndef FAIRSCARCE_FAIRNESS_METRICS_HPP_
#define FAIRSCARCE_FAIRNESS_METRICS_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace fairscarce {

// |E[f=1 | A=0] - E[f=1 | A=1]|. Throws kDegenerateGroup if a group is absent.
double DemographicParityDiff(std::span<const double> preds, std::span<const int> sensitive);

// |E[f=1 | A=0, Y=j] - E[f=1 | A=1, Y=j]|. Throws kDegenerateCell.
double AlphaJ(std::span<const double> preds, std::span<const int> labels,
              std::span<const int> sensitive, int j);

// alpha_0 + alpha_1
double EqualizedOddsDiff(std::span<const double> preds, std::span<const int> labels,
                         std::span<const int> sensitive);

struct GroupCounts {
  double n = 0.0;
  double positives = 0.0;  // predicted positive mass
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double tn = 0.0;
};

struct FairnessReport {
  double accuracy = 0.0;
  double dp_diff = 0.0;
  double eop_diff = 0.0;
  double eod_diff = 0.0;
  std::array<GroupCounts, 2> groups;

  // Recomputes every metric from the stored counts.
  static FairnessReport FromCounts(const std::array<GroupCounts, 2>& groups);
};

FairnessReport EvaluateReport(std::span<const double> preds, std::span<const int> labels,
                              std::span<const int> sensitive);

// method,seed,accuracy,dp,eop,eod followed by per-group count columns.
std::string ReportCsvHeader();
std::string ReportCsvRow(const std::string& method, std::uint64_t seed, const FairnessReport& r);

}  // namespace fairscarce

#endif  // FAIRSCARCE_FAIRNESS_METRICS_HPP_
