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

// Tabular ingestion: CSV parsing, schema-driven encoding, and the
// demographic-scarce partition (D1 with labels only, D2 with groups only,
// and a fully observed test split).

#ifndef FAIRSCARCE_TABULAR_HPP_
#define FAIRSCARCE_TABULAR_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fairscarce {

enum class ColumnKind { kNumeric, kCategorical };

// Column roles, read from a `key = value` text file:
//   target = income
//   positive = >50K
//   sensitive = sex
//   privileged = Male
//   kind.age = numeric          (optional per-column override)
//   drop = fnlwgt,education     (optional, comma separated)
struct Schema {
  std::string target;
  std::string positive_token;
  std::string sensitive;
  std::string privileged_token;
  std::map<std::string, ColumnKind> kind_overrides;
  std::vector<std::string> dropped;

  static Schema Parse(std::string_view text);
  static Schema Load(const std::string& path);
};

struct RawTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<std::string>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return column_names.size(); }
  // -1 when absent.
  int ColumnIndex(std::string_view name) const;
};

struct LoadStats {
  std::size_t dropped_rows = 0;
};

// Splits one CSV record. Double quotes delimit fields that contain commas;
// a doubled quote inside a quoted field is a literal quote.
std::vector<std::string> SplitCsvLine(std::string_view line);
std::string QuoteCsvField(std::string_view field);

RawTable ParseCsv(std::string_view text, const Schema& schema,
                  bool lenient = false, LoadStats* stats = nullptr);
RawTable LoadCsv(const std::string& path, const Schema& schema,
                 bool lenient = false, LoadStats* stats = nullptr);
void WriteCsv(const RawTable& table, const std::string& path);

struct ColumnEncoding {
  std::string name;
  std::size_t source_column = 0;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> vocabulary;  // sorted, categorical only
  double mean = 0.0;
  double scale = 1.0;  // population std, or 1 for constant columns
};

struct Encoder {
  std::vector<ColumnEncoding> columns;  // feature columns, table order
  std::size_t target_column = 0;
  std::size_t sensitive_column = 0;
  std::string positive_token;
  std::string privileged_token;

  std::size_t feature_dim() const;
  std::vector<std::string> FeatureNames() const;
};

class EvaluationAccess;

// Encoded rows. Labels or groups hidden by the scarce split stay attached
// but are reachable only through EvaluationAccess, which training code
// never touches.
class Dataset {
 public:
  Eigen::MatrixXd features;  // n x d
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<int>> sensitive;
  std::vector<std::uint64_t> sample_ids;
  std::vector<std::string> feature_names;

  std::size_t size() const { return sample_ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  Dataset Subset(std::span<const std::size_t> rows) const;
  Dataset WithLabelsMasked() const;
  Dataset WithSensitiveMasked() const;

  // Throws kFormat when features are non-finite or column lengths disagree.
  void Validate() const;

  void Save(const std::string& path) const;
  static Dataset Load(const std::string& path);

  bool operator==(const Dataset& other) const;

 private:
  friend class EvaluationAccess;
  std::optional<std::vector<int>> hidden_labels_;
  std::optional<std::vector<int>> hidden_sensitive_;
};

// Evaluation-only path to ground truth that was masked by the split.
class EvaluationAccess {
 public:
  static const std::vector<int>& TrueLabels(const Dataset& ds);
  static const std::vector<int>& TrueSensitive(const Dataset& ds);
};

Encoder FitEncoder(const RawTable& table, const Schema& schema,
                   std::span<const std::size_t> fitting_rows);
Dataset Encode(const RawTable& table, const Encoder& encoder);

struct ScarceSplit {
  Dataset d1;    // labels visible, sensitive masked
  Dataset d2;    // sensitive visible, labels masked
  Dataset test;  // both visible
  double group_labeled_ratio = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> d1;
  std::vector<std::size_t> d2;
  std::vector<std::size_t> test;
};

// Stratified by (sensitive, label). Stratum quotas use largest-remainder
// rounding so the totals hit round(fraction * n) exactly.
SplitIndices SplitScarceIndices(const Dataset& ds, double ratio,
                                std::uint64_t seed, double test_fraction);
ScarceSplit SplitScarce(const Dataset& ds, double ratio, std::uint64_t seed,
                        double test_fraction);

// Full pipeline: partition first, then refit the encoder on D1 and D2 rows
// only so test statistics never leak into standardization.
ScarceSplit PrepareScarceSplit(const RawTable& table, const Schema& schema,
                               double ratio, std::uint64_t seed,
                               double test_fraction);

// Seeded random partition of positions [0, n) into a slice of
// round(fraction * n) and its complement, both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> RandomSlice(
    std::size_t n, double fraction, std::uint64_t seed);

}  // namespace fairscarce

#endif  // FAIRSCARCE_TABULAR_HPP_
