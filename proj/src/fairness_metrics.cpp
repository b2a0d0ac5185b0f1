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

#include "fairscarce/fairness_metrics.hpp"

#include <cmath>

#include "fairscarce/error.hpp"
#include "fairscarce/text_util.hpp"

namespace fairscarce {

namespace {

void CheckLengths(std::size_t a, std::size_t b) {
  if (a != b) Fail(ErrorCode::kShapeMismatch, "prediction and attribute lengths differ");
}

void CheckBinary(std::span<const int> v, const char* what) {
  for (const int x : v) {
    if (x != 0 && x != 1) Fail(ErrorCode::kInvalidArgument, std::string(what) + " must be 0 or 1");
  }
}

void CheckPreds(std::span<const double> preds) {
  for (const double p : preds) {
    if (!(p >= 0.0 && p <= 1.0)) Fail(ErrorCode::kInvalidArgument, "prediction outside [0, 1]");
  }
}

double RateGap(double pos0, double n0, double pos1, double n1) {
  return std::abs(pos0 / n0 - pos1 / n1);
}

}  // namespace

double DemographicParityDiff(std::span<const double> preds, std::span<const int> sensitive) {
  CheckLengths(preds.size(), sensitive.size());
  CheckPreds(preds);
  CheckBinary(sensitive, "sensitive attribute");
  double pos[2] = {0.0, 0.0}, n[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pos[sensitive[i]] += preds[i];
    n[sensitive[i]] += 1.0;
  }
  if (n[0] == 0.0 || n[1] == 0.0) Fail(ErrorCode::kDegenerateGroup, "a sensitive group is empty");
  return RateGap(pos[0], n[0], pos[1], n[1]);
}

double AlphaJ(std::span<const double> preds, std::span<const int> labels,
              std::span<const int> sensitive, int j) {
  CheckLengths(preds.size(), sensitive.size());
  CheckLengths(preds.size(), labels.size());
  CheckPreds(preds);
  CheckBinary(labels, "label");
  CheckBinary(sensitive, "sensitive attribute");
  double pos[2] = {0.0, 0.0}, n[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != j) continue;
    pos[sensitive[i]] += preds[i];
    n[sensitive[i]] += 1.0;
  }
  if (n[0] == 0.0 || n[1] == 0.0) {
    Fail(ErrorCode::kDegenerateCell, "no rows with Y=" + std::to_string(j) + " in some group");
  }
  return RateGap(pos[0], n[0], pos[1], n[1]);
}

double EqualizedOddsDiff(std::span<const double> preds, std::span<const int> labels,
                         std::span<const int> sensitive) {
  return AlphaJ(preds, labels, sensitive, 0) + AlphaJ(preds, labels, sensitive, 1);
}

FairnessReport FairnessReport::FromCounts(const std::array<GroupCounts, 2>& groups) {
  FairnessReport r;
  r.groups = groups;
  const auto& g0 = groups[0];
  const auto& g1 = groups[1];
  if (g0.n == 0.0 || g1.n == 0.0) Fail(ErrorCode::kDegenerateGroup, "a sensitive group is empty");
  const double y1_0 = g0.tp + g0.fn, y1_1 = g1.tp + g1.fn;
  const double y0_0 = g0.fp + g0.tn, y0_1 = g1.fp + g1.tn;
  if (y1_0 == 0.0 || y1_1 == 0.0 || y0_0 == 0.0 || y0_1 == 0.0) {
    Fail(ErrorCode::kDegenerateCell, "a (group, label) cell is empty");
  }
  r.accuracy = (g0.tp + g0.tn + g1.tp + g1.tn) / (g0.n + g1.n);
  r.dp_diff = RateGap(g0.positives, g0.n, g1.positives, g1.n);
  const double alpha1 = RateGap(g0.tp, y1_0, g1.tp, y1_1);
  const double alpha0 = RateGap(g0.fp, y0_0, g1.fp, y0_1);
  r.eop_diff = alpha1;
  r.eod_diff = alpha0 + alpha1;
  return r;
}

FairnessReport EvaluateReport(std::span<const double> preds, std::span<const int> labels,
                              std::span<const int> sensitive) {
  CheckLengths(preds.size(), sensitive.size());
  CheckLengths(preds.size(), labels.size());
  CheckPreds(preds);
  CheckBinary(labels, "label");
  CheckBinary(sensitive, "sensitive attribute");
  std::array<GroupCounts, 2> groups{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& g = groups[sensitive[i]];
    const double p = preds[i];
    g.n += 1.0;
    g.positives += p;
    if (labels[i] == 1) {
      g.tp += p;
      g.fn += 1.0 - p;
    } else {
      g.fp += p;
      g.tn += 1.0 - p;
    }
  }
  return FairnessReport::FromCounts(groups);
}

std::string ReportCsvHeader() {
  std::string h = "method,seed,accuracy,dp,eop,eod";
  for (int g = 0; g < 2; ++g) {
    const std::string p = "g" + std::to_string(g) + "_";
    h += "," + p + "n," + p + "positives," + p + "tp," + p + "fp," + p + "fn," + p + "tn";
  }
  return h;
}

std::string ReportCsvRow(const std::string& method, std::uint64_t seed, const FairnessReport& r) {
  std::string row = method + "," + std::to_string(seed) + "," + FormatFixed(r.accuracy) + "," +
                    FormatFixed(r.dp_diff) + "," + FormatFixed(r.eop_diff) + "," +
                    FormatFixed(r.eod_diff);
  for (const auto& g : r.groups) {
    for (const double v : {g.n, g.positives, g.tp, g.fp, g.fn, g.tn}) row += "," + FormatFixed(v, 4);
  }
  return row;
}

}  // namespace fairscarce
