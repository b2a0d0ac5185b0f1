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
#include <functional>

#include <gtest/gtest.h>

#include "fairscarce/error.hpp"
#include "fairscarce/fairness_metrics.hpp"
#include "fairscarce/rng.hpp"
#include "test_support.hpp"

namespace fairscarce {
namespace {

struct RandomRows {
  std::vector<double> preds;
  std::vector<int> labels;
  std::vector<int> groups;
};

// Predictions are multiples of 1/4 so the enumeration is exact in binary.
RandomRows Draw(Rng& rng, std::size_t max_rows) {
  RandomRows r;
  const std::size_t n = 1 + rng.UniformIndex(max_rows);
  for (std::size_t i = 0; i < n; ++i) {
    r.preds.push_back(static_cast<double>(rng.UniformIndex(5)) / 4.0);
    r.labels.push_back(rng.Bernoulli(0.5));
    r.groups.push_back(rng.Bernoulli(0.5));
  }
  return r;
}

std::optional<double> Guarded(const std::function<double()>& fn, ErrorCode expected) {
  try {
    return fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected);
    return std::nullopt;
  }
}

TEST(Metrics, MatchExhaustiveEnumeration) {
  Rng rng(17);
  for (int trial = 0; trial < 400; ++trial) {
    const RandomRows r = Draw(rng, 10);
    const auto oracle = testing::EnumerateRates(r.preds, r.labels, r.groups);

    const auto dp = Guarded([&] { return DemographicParityDiff(r.preds, r.groups); }, ErrorCode::kDegenerateGroup);
    ASSERT_EQ(dp.has_value(), oracle.dp[0] && oracle.dp[1]);
    if (dp) {
      EXPECT_EQ(*dp, std::abs(*oracle.dp[0] - *oracle.dp[1]));
    }
    for (int j = 0; j < 2; ++j) {
      const auto alpha =
          Guarded([&] { return AlphaJ(r.preds, r.labels, r.groups, j); }, ErrorCode::kDegenerateCell);
      ASSERT_EQ(alpha.has_value(), oracle.cell[j][0] && oracle.cell[j][1]);
      if (alpha) {
        EXPECT_EQ(*alpha, std::abs(*oracle.cell[j][0] - *oracle.cell[j][1]));
      }
    }
  }
}

TEST(Metrics, RangeSymmetryAndComplement) {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    RandomRows r = Draw(rng, 40);
    for (auto& p : r.preds) p = rng.Uniform();
    FairnessReport rep;
    try {
      rep = EvaluateReport(r.preds, r.labels, r.groups);
    } catch (const Error&) {
      continue;
    }
    ++checked;
    for (const double v : {rep.accuracy, rep.dp_diff, rep.eop_diff}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    // A sum of two rate gaps.
    EXPECT_LE(rep.eod_diff, 2.0);
    EXPECT_GE(rep.eod_diff, rep.eop_diff);

    std::vector<int> swapped = r.groups;
    for (auto& g : swapped) g = 1 - g;
    const auto sw = EvaluateReport(r.preds, r.labels, swapped);
    EXPECT_NEAR(sw.dp_diff, rep.dp_diff, 1e-12);
    EXPECT_NEAR(sw.eop_diff, rep.eop_diff, 1e-12);
    EXPECT_NEAR(sw.eod_diff, rep.eod_diff, 1e-12);

    std::vector<double> comp = r.preds;
    for (auto& p : comp) p = 1.0 - p;
    EXPECT_NEAR(DemographicParityDiff(comp, r.groups), rep.dp_diff, 1e-12);

    const auto again = FairnessReport::FromCounts(rep.groups);
    EXPECT_NEAR(again.eod_diff, AlphaJ(r.preds, r.labels, r.groups, 0) + AlphaJ(r.preds, r.labels, r.groups, 1),
                1e-12);
    EXPECT_NEAR(again.eop_diff, AlphaJ(r.preds, r.labels, r.groups, 1), 1e-12);
  }
  EXPECT_GT(checked, 400);
}

TEST(Metrics, HandExample) {
  // group 0: preds 1, 0 (labels 1, 0); group 1: preds 1, 1 (labels 1, 0)
  const std::vector<double> p = {1, 0, 1, 1};
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<int> a = {0, 0, 1, 1};
  const auto r = EvaluateReport(p, y, a);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.dp_diff, 0.5);
  EXPECT_DOUBLE_EQ(r.eop_diff, 0.0);
  EXPECT_DOUBLE_EQ(r.eod_diff, 1.0);
  EXPECT_DOUBLE_EQ(r.groups[1].fp, 1.0);
}

TEST(Metrics, InputChecks) {
  const std::vector<double> p = {0.5, 1.5};
  const std::vector<int> a = {0, 1};
  EXPECT_THROW(DemographicParityDiff(p, a), Error);
  const std::vector<double> q = {0.5};
  EXPECT_THROW(DemographicParityDiff(q, a), Error);
}

TEST(ReportCsv, HeaderAndRowAgree) {
  const std::vector<double> p = {1, 0, 0.5, 1};
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<int> a = {0, 0, 1, 1};
  const auto r = EvaluateReport(p, y, a);
  const std::string header = ReportCsvHeader();
  const std::string row = ReportCsvRow("certain", 3, r);
  EXPECT_EQ(header.rfind("method,seed,accuracy,dp,eop,eod", 0), 0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.rfind("certain,3,", 0), 0u);
}

}  // namespace
}  // namespace fairscarce
