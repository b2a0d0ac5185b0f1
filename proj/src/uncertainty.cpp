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

#include "fairscarce/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "fairscarce/error.hpp"
#include "fairscarce/tabular.hpp"
#include "fairscarce/text_util.hpp"

namespace fairscarce {

double BinaryEntropy(double p) {
  p = std::clamp(p, 0.0, 1.0);
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return std::clamp(h, 0.0, kLn2);
}

ConformalCalibrator ConformalCalibrate(std::span<const double> probs,
                                       std::span<const int> truths, double epsilon) {
  if (probs.empty()) Fail(ErrorCode::kEmptyCalibration, "no calibration rows");
  if (probs.size() != truths.size()) {
    Fail(ErrorCode::kShapeMismatch, "calibration probabilities and truths differ in length");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1)");
  }
  std::vector<double> scores;
  scores.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p1 = std::clamp(probs[i], 0.0, 1.0);
    if (truths[i] != 0 && truths[i] != 1) {
      Fail(ErrorCode::kInvalidArgument, "calibration truth must be 0 or 1");
    }
    scores.push_back(truths[i] == 1 ? 1.0 - p1 : p1);
  }
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  // The small guard absorbs representation error such as 5 * 0.8.
  const auto rank = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - epsilon) - 1e-9));

  ConformalCalibrator cal;
  cal.epsilon = epsilon;
  cal.calibration_size = scores.size();
  cal.q_hat = rank > scores.size() ? 1.0 : std::clamp(scores[rank == 0 ? 0 : rank - 1], 0.0, 1.0);
  return cal;
}

std::string PredictionSet::Encode() const {
  std::string s;
  if (has0) s += '0';
  if (has1) s += '1';
  return s;
}

PredictionSet ConformalSet(const ConformalCalibrator& cal, double p_group, std::uint64_t id) {
  const double p1 = std::clamp(p_group, 0.0, 1.0);
  PredictionSet set;
  set.sample_id = id;
  set.has1 = 1.0 - p1 <= cal.q_hat;
  set.has0 = p1 <= cal.q_hat;
  return set;
}

CertaintyPartition PartitionByCertainty(std::span<const PredictionSet> sets) {
  CertaintyPartition out;
  for (const auto& s : sets) {
    (s.size() == 1 ? out.certain : out.uncertain).push_back(s.sample_id);
  }
  return out;
}

CertaintyPartition ConfidenceBandFilter(std::span<const double> probs,
                                        std::span<const std::uint64_t> ids, double tau) {
  if (!(tau >= 0.5 && tau <= 1.0)) Fail(ErrorCode::kInvalidArgument, "tau must lie in [0.5, 1]");
  if (probs.size() != ids.size()) Fail(ErrorCode::kShapeMismatch, "probabilities and ids differ");
  CertaintyPartition out;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool low = probs[i] <= 1.0 - tau || probs[i] >= tau;
    (low ? out.certain : out.uncertain).push_back(ids[i]);
  }
  return out;
}

void WritePredictionSets(std::span<const PredictionSet> sets, const std::string& path) {
  std::string out = "sample_id,set\n";
  for (const auto& s : sets) out += std::to_string(s.sample_id) + "," + s.Encode() + "\n";
  WriteTextFile(path, out);
}

std::vector<PredictionSet> ReadPredictionSets(const std::string& path) {
  const auto lines = SplitString(ReadTextFile(path), '\n');
  if (lines.empty() || Trim(lines[0]) != "sample_id,set") {
    Fail(ErrorCode::kFormat, path + ": expected header sample_id,set");
  }
  std::vector<PredictionSet> sets;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const auto cells = SplitCsvLine(lines[i]);
    const auto id = ParseInt(cells[0]);
    if (cells.size() != 2 || !id || *id < 0) Fail(ErrorCode::kFormat, path + ": bad row");
    PredictionSet s;
    s.sample_id = static_cast<std::uint64_t>(*id);
    const std::string& m = cells[1];
    if (m != "" && m != "0" && m != "1" && m != "01") {
      Fail(ErrorCode::kFormat, path + ": bad set '" + m + "'");
    }
    s.has0 = m.find('0') != std::string::npos;
    s.has1 = m.find('1') != std::string::npos;
    sets.push_back(s);
  }
  return sets;
}

}  // namespace fairscarce
