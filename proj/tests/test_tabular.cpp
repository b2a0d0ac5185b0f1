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

#include <algorithm>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "fairscarce/error.hpp"
#include "fairscarce/tabular.hpp"
#include "fairscarce/text_util.hpp"
#include "test_support.hpp"

namespace fairscarce {
namespace {

using testing::TempDir;

const char* kSchema =
    "# comment\n"
    "target = income\n"
    "positive = >50K\n"
    "sensitive = sex\n"
    "privileged = Male\n"
    "kind.zip = categorical\n";

const char* kCsv =
    "age,zip,job,sex,income\n"
    "39,100,\"Adm-clerical\",Male,<=50K\n"
    "50,200,Exec-managerial,Female,>50K\n"
    "38,100,\"Handlers, cleaners\",Male,<=50K\n"
    "53,300,Handlers-cleaners,Female,>50K\n"
    "28,200,Prof-specialty,Female,<=50K\n";

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(Schema, ParsesKeysAndOverrides) {
  const Schema s = Schema::Parse(kSchema);
  EXPECT_EQ(s.target, "income");
  EXPECT_EQ(s.positive_token, ">50K");
  EXPECT_EQ(s.sensitive, "sex");
  EXPECT_EQ(s.privileged_token, "Male");
  ASSERT_EQ(s.kind_overrides.count("zip"), 1u);
  EXPECT_EQ(s.kind_overrides.at("zip"), ColumnKind::kCategorical);
}

TEST(Schema, RejectsUnknownKeysAndMissingFields) {
  EXPECT_EQ(CodeOf([] { Schema::Parse("target = y\nbogus = 1\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { Schema::Parse("target = y\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { Schema::Parse("target = y\npositive = 1\nsensitive = y\nprivileged = 1\n"); }),
            ErrorCode::kConfig);
}

TEST(Csv, SplitsQuotedFields) {
  const auto cells = SplitCsvLine("a,\"b, c\",\"d \"\"e\"\"\",");
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[1], "b, c");
  EXPECT_EQ(cells[2], "d \"e\"");
  EXPECT_EQ(cells[3], "");
  EXPECT_EQ(SplitCsvLine(QuoteCsvField("x,\"y\""))[0], "x,\"y\"");
}

TEST(Csv, ErrorKinds) {
  const Schema s = Schema::Parse(kSchema);
  EXPECT_EQ(CodeOf([&] { ParseCsv("", s); }), ErrorCode::kEmptyFile);
  EXPECT_EQ(CodeOf([&] { ParseCsv("age,zip,job,sex,income\n", s); }), ErrorCode::kEmptyFile);
  EXPECT_EQ(CodeOf([&] { ParseCsv("age,zip,job,income\n1,2,3,4\n", s); }), ErrorCode::kMissingColumn);
  EXPECT_EQ(CodeOf([&] { ParseCsv("age,zip,job,sex,income\n1,2,3\n", s); }), ErrorCode::kMalformedRow);
  EXPECT_EQ(CodeOf([&] { LoadCsv("/nonexistent/file.csv", s); }), ErrorCode::kIo);
}

TEST(Csv, LenientModeDropsBadRows) {
  const Schema s = Schema::Parse(kSchema);
  LoadStats stats;
  const RawTable t = ParseCsv("age,zip,job,sex,income\n1,2,3\n1,2,x,Male,>50K\n", s, true, &stats);
  EXPECT_EQ(t.n_rows(), 1u);
  EXPECT_EQ(stats.dropped_rows, 1u);
}

TEST(Encoder, VocabularyIsSortedAndConstantColumnsPassThrough) {
  const Schema s = Schema::Parse(kSchema);
  RawTable t = ParseCsv(kCsv, s);
  for (auto& row : t.rows) row[0] = "7";  // constant age
  std::vector<std::size_t> all(t.n_rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Encoder enc = FitEncoder(t, s, all);
  for (const auto& col : enc.columns) {
    EXPECT_TRUE(std::is_sorted(col.vocabulary.begin(), col.vocabulary.end())) << col.name;
    if (col.name == "age") {
      EXPECT_EQ(col.scale, 1.0);
    }
  }
  const Dataset ds = Encode(t, enc);
  // age column is the first feature; constant columns centre to 0.
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.features(static_cast<Eigen::Index>(i), 0), 0.0);
  // numeric age + 3 zip codes + 5 job tokens
  EXPECT_EQ(ds.dim(), 1u + 3u + 5u);
  EXPECT_EQ((*ds.labels)[1], 1);
  EXPECT_EQ((*ds.sensitive)[0], 1);
}

TEST(Encoder, StatisticsComeFromFittingRowsOnly) {
  const Schema s = Schema::Parse(kSchema);
  const RawTable t = ParseCsv(kCsv, s);
  const std::vector<std::size_t> fit = {0, 2};  // ages 39 and 38
  const Encoder enc = FitEncoder(t, s, fit);
  EXPECT_DOUBLE_EQ(enc.columns[0].mean, 38.5);
  EXPECT_DOUBLE_EQ(enc.columns[0].scale, 0.5);
  RawTable unseen = t;
  unseen.rows[0][2] = "Armed-Forces";
  EXPECT_EQ(CodeOf([&] { Encode(unseen, enc); }), ErrorCode::kUnknownCategory);
}

TEST(Encoder, RoundTripThroughCsv) {
  TempDir dir("csv_roundtrip");
  const Schema s = Schema::Parse(kSchema);
  const RawTable t = ParseCsv(kCsv, s);
  std::vector<std::size_t> all(t.n_rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Encoder enc = FitEncoder(t, s, all);
  WriteCsv(t, dir.file("t.csv"));
  const Dataset a = Encode(t, enc);
  const Dataset b = Encode(LoadCsv(dir.file("t.csv"), s), enc);
  EXPECT_TRUE(a == b);
}

TEST(DatasetFile, RoundTripsBitExactly) {
  TempDir dir("dataset_file");
  Rng rng(3);
  Eigen::MatrixXd x(20, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal() * 1e-3 + 1.0 / 3.0;
  std::vector<int> y(20), a(20);
  for (int i = 0; i < 20; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    a[static_cast<std::size_t>(i)] = i % 3 == 0;
  }
  const Dataset ds = testing::MakeDataset(x, y, a, 100).WithSensitiveMasked();
  ds.Save(dir.file("d.data"));
  const Dataset back = Dataset::Load(dir.file("d.data"));
  EXPECT_TRUE(ds == back);
  EXPECT_FALSE(back.sensitive.has_value());
  EXPECT_EQ(EvaluationAccess::TrueSensitive(back), a);
}

TEST(DatasetFile, RejectsNonFiniteFeatures) {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, std::numeric_limits<double>::quiet_NaN();
  const Dataset ds = testing::MakeDataset(x, std::nullopt, std::nullopt);
  EXPECT_EQ(CodeOf([&] { ds.Validate(); }), ErrorCode::kFormat);
}

Dataset SyntheticEncoded(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  std::vector<int> y(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = rng.Normal();
    x(static_cast<Eigen::Index>(i), 1) = rng.Normal();
    a[i] = rng.Bernoulli(0.67);
    y[i] = rng.Bernoulli(a[i] ? 0.3 : 0.1);
  }
  return testing::MakeDataset(x, y, a);
}

class SplitProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SplitProperty, DisjointCoveringStratifiedAndRatio) {
  const std::uint64_t seed = GetParam();
  const std::size_t n = 200 + 97 * (seed % 7);
  const Dataset ds = SyntheticEncoded(n, seed);
  const double test_fraction = 0.2, ratio = 0.2;
  const ScarceSplit split = SplitScarce(ds, ratio, seed, test_fraction);

  std::set<std::uint64_t> seen;
  for (const Dataset* part : {&split.d1, &split.d2, &split.test}) {
    for (const auto id : part->sample_ids) EXPECT_TRUE(seen.insert(id).second) << "duplicate id " << id;
  }
  EXPECT_EQ(seen.size(), n);

  const double labeled_pool = static_cast<double>(split.d1.size() + split.d2.size());
  EXPECT_LE(std::abs(static_cast<double>(split.d2.size()) - ratio * labeled_pool), 1.0);

  int full[2][2] = {{0, 0}, {0, 0}}, test[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) ++full[(*ds.labels)[i]][(*ds.sensitive)[i]];
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    ++test[(*split.test.labels)[i]][(*split.test.sensitive)[i]];
  }
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      EXPECT_LE(std::abs(test[y][a] - full[y][a] * test_fraction), 2.0) << "cell " << y << a;
    }
  }

  // Masking: D1 hides the group, D2 hides the label.
  EXPECT_TRUE(split.d1.labels.has_value());
  EXPECT_FALSE(split.d1.sensitive.has_value());
  EXPECT_FALSE(split.d2.labels.has_value());
  EXPECT_TRUE(split.d2.sensitive.has_value());
  EXPECT_EQ(EvaluationAccess::TrueSensitive(split.d1).size(), split.d1.size());

  const ScarceSplit again = SplitScarce(ds, ratio, seed, test_fraction);
  EXPECT_TRUE(again.d1 == split.d1);
  EXPECT_TRUE(again.d2 == split.d2);
  EXPECT_TRUE(again.test == split.test);
}

INSTANTIATE_TEST_SUITE_P(Seeds, SplitProperty, ::testing::Range<std::uint64_t>(0, 12));

TEST(Split, ZeroTestFractionAndTooFewRows) {
  const Dataset ds = SyntheticEncoded(300, 1);
  const ScarceSplit split = SplitScarce(ds, 0.2, 5, 0.0);
  EXPECT_EQ(split.test.size(), 0u);
  EXPECT_EQ(split.d1.size() + split.d2.size(), 300u);
  EXPECT_EQ(CodeOf([&] { SplitScarce(SyntheticEncoded(3, 1), 0.2, 5, 0.2); }), ErrorCode::kInsufficientRows);
}

TEST(RandomSlice, PartitionsIndices) {
  const auto [a, b] = RandomSlice(101, 0.3, 9);
  std::set<std::size_t> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 101u);
  EXPECT_EQ(a.size() + b.size(), 101u);
  EXPECT_EQ(RandomSlice(101, 0.3, 9), RandomSlice(101, 0.3, 9));
}

TEST(TextUtil, ExactFormattingRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.Normal() * std::pow(10.0, rng.Uniform(-30, 30));
    EXPECT_EQ(*ParseDouble(FormatExact(v)), v);
  }
  EXPECT_FALSE(ParseDouble("1.5x").has_value());
  EXPECT_EQ(FormatFixed(0.12345, 3), "0.123");
}

}  // namespace
}  // namespace fairscarce
