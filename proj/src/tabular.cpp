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

#include "fairscarce/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "fairscarce/error.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/text_util.hpp"

namespace fairscarce {

Schema Schema::Parse(std::string_view text) {
  Schema schema;
  for (const auto& [key, value] : ParseKeyValues(text)) {
    if (key == "target") {
      schema.target = value;
    } else if (key == "positive") {
      schema.positive_token = value;
    } else if (key == "sensitive") {
      schema.sensitive = value;
    } else if (key == "privileged") {
      schema.privileged_token = value;
    } else if (key == "drop") {
      for (const auto& name : SplitString(value, ',')) {
        if (!Trim(name).empty()) schema.dropped.emplace_back(Trim(name));
      }
    } else if (key.rfind("kind.", 0) == 0) {
      const std::string column = key.substr(5);
      if (value == "numeric") {
        schema.kind_overrides[column] = ColumnKind::kNumeric;
      } else if (value == "categorical") {
        schema.kind_overrides[column] = ColumnKind::kCategorical;
      } else {
        Fail(ErrorCode::kConfig, "unknown column kind '" + value + "'");
      }
    } else {
      Fail(ErrorCode::kConfig, "unknown schema key '" + key + "'");
    }
  }
  if (schema.target.empty() || schema.sensitive.empty() ||
      schema.positive_token.empty() || schema.privileged_token.empty()) {
    Fail(ErrorCode::kConfig,
         "schema must declare target, positive, sensitive and privileged");
  }
  if (schema.target == schema.sensitive) {
    Fail(ErrorCode::kConfig, "target and sensitive must be distinct columns");
  }
  return schema;
}

Schema Schema::Load(const std::string& path) {
  return Parse(ReadTextFile(path));
}

int RawTable::ColumnIndex(std::string_view name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    if (column_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(Trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) Fail(ErrorCode::kMalformedRow, "unterminated quoted field");
  cells.emplace_back(Trim(cell));
  return cells;
}

std::string QuoteCsvField(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos &&
      Trim(field).size() == field.size()) {
    return std::string(field);
  }
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

RawTable ParseCsv(std::string_view text, const Schema& schema, bool lenient,
                  LoadStats* stats) {
  // Strip a UTF-8 byte order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!Trim(line).empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) Fail(ErrorCode::kEmptyFile, "no header row");

  RawTable table;
  table.column_names = SplitCsvLine(lines.front());
  for (const auto* name : {&schema.target, &schema.sensitive}) {
    if (table.ColumnIndex(*name) < 0) {
      Fail(ErrorCode::kMissingColumn, "column '" + *name + "' not in header");
    }
  }
  for (const auto& [name, kind] : schema.kind_overrides) {
    if (table.ColumnIndex(name) < 0) {
      Fail(ErrorCode::kMissingColumn, "override names absent column '" + name + "'");
    }
  }
  if (lines.size() == 1) Fail(ErrorCode::kEmptyFile, "header without data rows");

  std::vector<int> forced_numeric;
  for (const auto& [name, kind] : schema.kind_overrides) {
    if (kind == ColumnKind::kNumeric) forced_numeric.push_back(table.ColumnIndex(name));
  }

  std::size_t dropped = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto cells = SplitCsvLine(lines[li]);
    std::string problem;
    if (cells.size() != table.n_cols()) {
      problem = "expected " + std::to_string(table.n_cols()) + " cells, got " +
                std::to_string(cells.size());
    } else {
      for (const int col : forced_numeric) {
        if (!ParseDouble(cells[col])) {
          problem = "non-numeric cell '" + cells[col] + "' in column '" +
                    table.column_names[col] + "'";
          break;
        }
      }
    }
    if (!problem.empty()) {
      if (!lenient) {
        Fail(ErrorCode::kMalformedRow,
             "line " + std::to_string(li + 1) + ": " + problem);
      }
      ++dropped;
      continue;
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.rows.empty()) Fail(ErrorCode::kEmptyFile, "every data row was dropped");
  if (stats != nullptr) stats->dropped_rows = dropped;
  return table;
}

RawTable LoadCsv(const std::string& path, const Schema& schema, bool lenient,
                 LoadStats* stats) {
  return ParseCsv(ReadTextFile(path), schema, lenient, stats);
}

void WriteCsv(const RawTable& table, const std::string& path) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out.push_back(',');
      out += QuoteCsvField(cells[i]);
    }
    out.push_back('\n');
  };
  append_row(table.column_names);
  for (const auto& row : table.rows) append_row(row);
  WriteTextFile(path, out);
}

std::size_t Encoder::feature_dim() const {
  std::size_t d = 0;
  for (const auto& c : columns) {
    d += c.kind == ColumnKind::kNumeric ? 1 : c.vocabulary.size();
  }
  return d;
}

std::vector<std::string> Encoder::FeatureNames() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::kNumeric) {
      names.push_back(c.name);
    } else {
      for (const auto& token : c.vocabulary) names.push_back(c.name + "=" + token);
    }
  }
  return names;
}

Encoder FitEncoder(const RawTable& table, const Schema& schema,
                   std::span<const std::size_t> fitting_rows) {
  if (fitting_rows.empty()) Fail(ErrorCode::kEmptyFit, "no fitting rows");
  for (const auto row : fitting_rows) {
    if (row >= table.n_rows()) {
      Fail(ErrorCode::kInvalidArgument, "fitting row out of range");
    }
  }
  const int target = table.ColumnIndex(schema.target);
  const int sensitive = table.ColumnIndex(schema.sensitive);
  if (target < 0 || sensitive < 0) {
    Fail(ErrorCode::kMissingColumn, "target or sensitive column absent");
  }

  Encoder enc;
  enc.target_column = static_cast<std::size_t>(target);
  enc.sensitive_column = static_cast<std::size_t>(sensitive);
  enc.positive_token = schema.positive_token;
  enc.privileged_token = schema.privileged_token;

  for (std::size_t col = 0; col < table.n_cols(); ++col) {
    const std::string& name = table.column_names[col];
    if (static_cast<int>(col) == target || static_cast<int>(col) == sensitive) continue;
    if (std::find(schema.dropped.begin(), schema.dropped.end(), name) !=
        schema.dropped.end()) {
      continue;
    }
    ColumnEncoding ce;
    ce.name = name;
    ce.source_column = col;
    if (auto it = schema.kind_overrides.find(name); it != schema.kind_overrides.end()) {
      ce.kind = it->second;
    } else {
      const bool all_numeric =
          std::all_of(table.rows.begin(), table.rows.end(),
                      [col](const auto& row) { return ParseDouble(row[col]).has_value(); });
      ce.kind = all_numeric ? ColumnKind::kNumeric : ColumnKind::kCategorical;
    }
    if (ce.kind == ColumnKind::kNumeric) {
      double sum = 0.0;
      for (const auto row : fitting_rows) sum += *ParseDouble(table.rows[row][col]);
      ce.mean = sum / static_cast<double>(fitting_rows.size());
      double sq = 0.0;
      for (const auto row : fitting_rows) {
        const double d = *ParseDouble(table.rows[row][col]) - ce.mean;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / static_cast<double>(fitting_rows.size()));
      ce.scale = sd > 0.0 ? sd : 1.0;
    } else {
      std::set<std::string> vocab;
      for (const auto& row : table.rows) vocab.insert(row[col]);
      ce.vocabulary.assign(vocab.begin(), vocab.end());
    }
    enc.columns.push_back(std::move(ce));
  }
  return enc;
}

Dataset Encode(const RawTable& table, const Encoder& encoder) {
  const std::size_t n = table.n_rows();
  const std::size_t d = encoder.feature_dim();
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.feature_names = encoder.FeatureNames();
  ds.sample_ids.resize(n);
  std::vector<int> labels(n), groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.n_cols()) {
      Fail(ErrorCode::kMalformedRow, "row " + std::to_string(i) + " has wrong width");
    }
    ds.sample_ids[i] = i;
    Eigen::Index j = 0;
    for (const auto& ce : encoder.columns) {
      const std::string& cell = row[ce.source_column];
      if (ce.kind == ColumnKind::kNumeric) {
        const auto v = ParseDouble(cell);
        if (!v) Fail(ErrorCode::kMalformedRow, "non-numeric cell '" + cell + "'");
        ds.features(static_cast<Eigen::Index>(i), j++) = (*v - ce.mean) / ce.scale;
      } else {
        const auto it = std::lower_bound(ce.vocabulary.begin(), ce.vocabulary.end(), cell);
        if (it == ce.vocabulary.end() || *it != cell) {
          Fail(ErrorCode::kUnknownCategory,
               "token '" + cell + "' unseen in column '" + ce.name + "'");
        }
        const auto hot = static_cast<Eigen::Index>(it - ce.vocabulary.begin());
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(ce.vocabulary.size()); ++k) {
          ds.features(static_cast<Eigen::Index>(i), j + k) = k == hot ? 1.0 : 0.0;
        }
        j += static_cast<Eigen::Index>(ce.vocabulary.size());
      }
    }
    labels[i] = row[encoder.target_column] == encoder.positive_token ? 1 : 0;
    groups[i] = row[encoder.sensitive_column] == encoder.privileged_token ? 1 : 0;
  }
  ds.labels = std::move(labels);
  ds.sensitive = std::move(groups);
  ds.Validate();
  return ds;
}

namespace {

std::vector<int> PickRows(const std::vector<int>& values,
                          std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(values[r]);
  return out;
}

std::optional<std::vector<int>> PickOptional(const std::optional<std::vector<int>>& values,
                                             std::span<const std::size_t> rows) {
  if (!values) return std::nullopt;
  return PickRows(*values, rows);
}

// Quotas per stratum summing to round(fraction * total), largest remainder
// first, ties to the lower stratum index.
std::vector<std::size_t> AllocateQuotas(const std::vector<std::size_t>& sizes,
                                        double fraction) {
  std::size_t total = 0;
  for (const auto s : sizes) total += s;
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> quotas(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double exact = fraction * static_cast<double>(sizes[k]);
    quotas[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += quotas[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r) {
    const std::size_t k = remainders[r].second;
    if (quotas[k] < sizes[k]) {
      ++quotas[k];
      ++assigned;
    }
  }
  return quotas;
}

}  // namespace

Dataset Dataset::Subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) Fail(ErrorCode::kInvalidArgument, "subset row out of range");
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.sample_ids.push_back(sample_ids[rows[i]]);
  }
  out.feature_names = feature_names;
  out.labels = PickOptional(labels, rows);
  out.sensitive = PickOptional(sensitive, rows);
  out.hidden_labels_ = PickOptional(hidden_labels_, rows);
  out.hidden_sensitive_ = PickOptional(hidden_sensitive_, rows);
  return out;
}

Dataset Dataset::WithLabelsMasked() const {
  Dataset out = *this;
  if (out.labels) {
    out.hidden_labels_ = std::move(out.labels);
    out.labels.reset();
  }
  return out;
}

Dataset Dataset::WithSensitiveMasked() const {
  Dataset out = *this;
  if (out.sensitive) {
    out.hidden_sensitive_ = std::move(out.sensitive);
    out.sensitive.reset();
  }
  return out;
}

void Dataset::Validate() const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(features.rows()) != n) {
    Fail(ErrorCode::kFormat, "feature rows disagree with sample ids");
  }
  if (!features.allFinite()) Fail(ErrorCode::kFormat, "non-finite feature value");
  for (const auto* col : {&labels, &sensitive, &hidden_labels_, &hidden_sensitive_}) {
    if (*col && col->value().size() != n) {
      Fail(ErrorCode::kFormat, "label or group column has wrong length");
    }
    if (*col) {
      for (const int v : col->value()) {
        if (v != 0 && v != 1) Fail(ErrorCode::kFormat, "binary column holds non-binary value");
      }
    }
  }
  if (!feature_names.empty() && feature_names.size() != dim()) {
    Fail(ErrorCode::kFormat, "feature names disagree with feature width");
  }
}

bool Dataset::operator==(const Dataset& other) const {
  return features == other.features && labels == other.labels &&
         sensitive == other.sensitive && sample_ids == other.sample_ids &&
         feature_names == other.feature_names && hidden_labels_ == other.hidden_labels_ &&
         hidden_sensitive_ == other.hidden_sensitive_;
}

// Layout:
//   fairscarce-dataset 1
//   rows <n> dim <d>
//   columns sample_id,label,sensitive,label_eval,sensitive_eval,<features...>
//   one data line per row; "-" marks an absent value
void Dataset::Save(const std::string& path) const {
  Validate();
  std::string out = "fairscarce-dataset 1\n";
  out += "rows " + std::to_string(size()) + " dim " + std::to_string(dim()) + "\n";
  out += "columns sample_id,label,sensitive,label_eval,sensitive_eval";
  for (std::size_t j = 0; j < dim(); ++j) {
    out += ",";
    out += QuoteCsvField(j < feature_names.size() ? feature_names[j] : "f" + std::to_string(j));
  }
  out += "\n";
  auto cell = [](const std::optional<std::vector<int>>& col, std::size_t i) {
    return col ? std::to_string((*col)[i]) : std::string("-");
  };
  for (std::size_t i = 0; i < size(); ++i) {
    out += std::to_string(sample_ids[i]);
    out += "," + cell(labels, i) + "," + cell(sensitive, i) + "," +
           cell(hidden_labels_, i) + "," + cell(hidden_sensitive_, i);
    for (std::size_t j = 0; j < dim(); ++j) {
      out += ",";
      out += FormatExact(features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += "\n";
  }
  WriteTextFile(path, out);
}

Dataset Dataset::Load(const std::string& path) {
  const std::string text = ReadTextFile(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || Trim(line) != "fairscarce-dataset 1") {
    Fail(ErrorCode::kFormat, path + ": not a dataset file (version 1)");
  }
  std::size_t n = 0, d = 0;
  {
    std::getline(in, line);
    std::istringstream hdr(line);
    std::string k1, k2;
    if (!(hdr >> k1 >> n >> k2 >> d) || k1 != "rows" || k2 != "dim") {
      Fail(ErrorCode::kFormat, path + ": bad shape line");
    }
  }
  std::getline(in, line);
  if (line.rfind("columns ", 0) != 0) Fail(ErrorCode::kFormat, path + ": missing columns line");
  auto names = SplitCsvLine(std::string_view(line).substr(8));
  if (names.size() != d + 5) Fail(ErrorCode::kFormat, path + ": column count mismatch");

  Dataset ds;
  ds.feature_names.assign(names.begin() + 5, names.end());
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::optional<std::vector<int>>> cols(4);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) Fail(ErrorCode::kFormat, path + ": truncated");
    const auto cells = SplitString(line, ',');
    if (cells.size() != d + 5) Fail(ErrorCode::kFormat, path + ": bad row width");
    const auto id = ParseInt(cells[0]);
    if (!id || *id < 0) Fail(ErrorCode::kFormat, path + ": bad sample id");
    ds.sample_ids.push_back(static_cast<std::uint64_t>(*id));
    for (std::size_t c = 0; c < 4; ++c) {
      const bool present = cells[c + 1] != "-";
      if (i == 0 && present) cols[c] = std::vector<int>();
      if (present != cols[c].has_value()) Fail(ErrorCode::kFormat, path + ": ragged column");
      if (present) {
        const auto v = ParseInt(cells[c + 1]);
        if (!v) Fail(ErrorCode::kFormat, path + ": bad binary cell");
        cols[c]->push_back(static_cast<int>(*v));
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = ParseDouble(cells[j + 5]);
      if (!v) Fail(ErrorCode::kFormat, path + ": bad feature cell");
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  ds.labels = std::move(cols[0]);
  ds.sensitive = std::move(cols[1]);
  ds.hidden_labels_ = std::move(cols[2]);
  ds.hidden_sensitive_ = std::move(cols[3]);
  ds.Validate();
  return ds;
}

const std::vector<int>& EvaluationAccess::TrueLabels(const Dataset& ds) {
  if (ds.labels) return *ds.labels;
  if (ds.hidden_labels_) return *ds.hidden_labels_;
  Fail(ErrorCode::kInvalidArgument, "dataset carries no labels");
}

const std::vector<int>& EvaluationAccess::TrueSensitive(const Dataset& ds) {
  if (ds.sensitive) return *ds.sensitive;
  if (ds.hidden_sensitive_) return *ds.hidden_sensitive_;
  Fail(ErrorCode::kInvalidArgument, "dataset carries no sensitive attribute");
}

SplitIndices SplitScarceIndices(const Dataset& ds, double ratio, std::uint64_t seed,
                                double test_fraction) {
  if (!ds.labels || !ds.sensitive) {
    Fail(ErrorCode::kInvalidArgument, "split needs both labels and sensitive attributes");
  }
  if (!(ratio > 0.0 && ratio < 1.0) || !(test_fraction >= 0.0 && test_fraction < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "ratio must lie in (0, 1) and test_fraction in [0, 1)");
  }
  // Stratum index = 2 * sensitive + label.
  std::vector<std::vector<std::size_t>> strata(4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    strata[2 * (*ds.sensitive)[i] + (*ds.labels)[i]].push_back(i);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (strata[k].empty()) {
      Fail(ErrorCode::kInsufficientRows,
           "stratum (sensitive=" + std::to_string(k / 2) + ", label=" +
               std::to_string(k % 2) + ") is empty");
    }
  }
  Rng rng(seed);
  for (auto& s : strata) rng.Shuffle(s);

  std::vector<std::size_t> sizes;
  for (const auto& s : strata) sizes.push_back(s.size());
  const auto test_quota = AllocateQuotas(sizes, test_fraction);
  std::vector<std::size_t> rest_sizes;
  for (std::size_t k = 0; k < 4; ++k) rest_sizes.push_back(sizes[k] - test_quota[k]);
  const auto d2_quota = AllocateQuotas(rest_sizes, ratio);

  SplitIndices out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& s = strata[k];
    std::size_t pos = 0;
    for (; pos < test_quota[k]; ++pos) out.test.push_back(s[pos]);
    for (std::size_t j = 0; j < d2_quota[k]; ++j, ++pos) out.d2.push_back(s[pos]);
    for (; pos < s.size(); ++pos) out.d1.push_back(s[pos]);
  }
  std::sort(out.d1.begin(), out.d1.end());
  std::sort(out.d2.begin(), out.d2.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

ScarceSplit SplitScarce(const Dataset& ds, double ratio, std::uint64_t seed,
                        double test_fraction) {
  const auto idx = SplitScarceIndices(ds, ratio, seed, test_fraction);
  ScarceSplit split;
  split.d1 = ds.Subset(idx.d1).WithSensitiveMasked();
  split.d2 = ds.Subset(idx.d2).WithLabelsMasked();
  split.test = ds.Subset(idx.test);
  split.group_labeled_ratio = ratio;
  return split;
}

ScarceSplit PrepareScarceSplit(const RawTable& table, const Schema& schema, double ratio,
                               std::uint64_t seed, double test_fraction) {
  std::vector<std::size_t> all(table.n_rows());
  std::iota(all.begin(), all.end(), 0);
  const Dataset provisional = Encode(table, FitEncoder(table, schema, all));
  const auto idx = SplitScarceIndices(provisional, ratio, seed, test_fraction);

  std::vector<std::size_t> fitting = idx.d1;
  fitting.insert(fitting.end(), idx.d2.begin(), idx.d2.end());
  std::sort(fitting.begin(), fitting.end());
  const Dataset ds = Encode(table, FitEncoder(table, schema, fitting));

  ScarceSplit split;
  split.d1 = ds.Subset(idx.d1).WithSensitiveMasked();
  split.d2 = ds.Subset(idx.d2).WithLabelsMasked();
  split.test = ds.Subset(idx.test);
  split.group_labeled_ratio = ratio;
  return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> RandomSlice(
    std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.Shuffle(order);
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> slice(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)), order.end());
  std::sort(slice.begin(), slice.end());
  std::sort(rest.begin(), rest.end());
  return {slice, rest};
}

}  // namespace fairscarce
