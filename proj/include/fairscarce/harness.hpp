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

// End-to-end runs: attribute run directories, threshold tuning, sweep cells,
// aggregation into results / Pareto files, and the threshold study.

#ifndef FAIRSCARCE_HARNESS_HPP_
#define FAIRSCARCE_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairscarce/attribute_model.hpp"
#include "fairscarce/fair_training.hpp"
#include "fairscarce/fairness_metrics.hpp"
#include "fairscarce/tabular.hpp"

namespace fairscarce {

// ---- attribute runs ----

struct AttributeRunConfig {
  std::string data;
  std::string schema;
  double ratio = 0.2;
  double test_fraction = 0.0;
  AttributeConfig attr;  // attr.seed drives the split and training

  // key = value text; Apply accepts the same keys.
  std::string Serialize() const;
  // Returns false for keys it does not own.
  bool Apply(const std::string& key, const std::string& value);
};

struct AttributeSummary {
  double attribute_accuracy = 0.0;  // a_hat vs true D1 sensitive
  double mean_uncertainty = 0.0;    // mean teacher u over D1
  std::size_t d1_rows = 0;
  std::size_t d2_rows = 0;
  int epochs = 0;
  int best_epoch = 0;
};

struct AttributeRun {
  std::string dir;
  AttributeRunConfig config;
  Dataset d1;
  Dataset d2;
  Dataset test;
  StudentTeacherState state;
  std::vector<ProxyRecord> proxies;  // D1, MC dropout
  std::vector<double> d1_eval_probs;  // teacher, eval mode, D1 order
  std::vector<double> calibration_probs;
  std::vector<int> calibration_truth;
  AttributeSummary summary;
};

// Trains the attribute classifier and writes the run directory:
// run.conf, d1/d2/test datasets, checkpoint, proxies.csv, eval_probs.csv,
// calibration.csv, train_log.csv and summary.txt.
AttributeSummary CreateAttributeRun(const AttributeRunConfig& config, const std::string& dir);
AttributeRun LoadAttributeRun(const std::string& dir);
// Loads `dir` if it holds a finished run with the same config, else creates it.
AttributeRun EnsureAttributeRun(const AttributeRunConfig& config, const std::string& dir);

AttributeSummary ReadAttributeSummary(const std::string& path);

// ---- sweep configuration ----

enum class Variant {
  kVanilla,               // unconstrained, all rows
  kClean,                 // constrained on true attributes
  kProxyDnn,              // constrained on a_hat, all rows
  kProxyKnn,              // constrained on k-NN imputed attributes
  kCertain,               // constrained on rows with u <= H
  kWeighted,              // constrained, per-row weight from u
  kUncertain,             // unconstrained on rows with u >= H
  kCertainUnconstrained,  // unconstrained on rows with u <= H
};

Variant ParseVariant(std::string_view name);
std::string VariantName(Variant v);
bool VariantUsesConstraint(Variant v);

struct UncertaintySource {
  enum class Kind { kMcDropout, kConformal, kConfidence };
  Kind kind = Kind::kMcDropout;
  double parameter = 0.0;  // conformal epsilon or confidence tau

  // "mc-dropout", "conformal:0.05", "confidence:0.8"
  static UncertaintySource Parse(std::string_view text);
  std::string Name() const;
};

// Proxy records under a given source. Conformal and confidence sources map
// certain rows to u = 0 and uncertain rows to u = ln 2.
std::vector<ProxyRecord> SourceProxies(const AttributeRun& run, const UncertaintySource& source);

struct SweepConfig {
  AttributeRunConfig attribute;
  std::string out_dir;
  std::string attr_run;  // empty: <out_dir>/attr
  std::uint64_t seed = 0;
  std::size_t seeds = 7;
  std::vector<Variant> variants = {Variant::kCertain};
  ConstraintKind constraint = ConstraintKind::kDemographicParity;
  std::vector<double> eps_grid;
  std::optional<double> h_fixed;  // nullopt: tune
  double h_min = 0.1;
  double h_max = 0.7;
  double h_step = 0.05;
  std::optional<double> tune_eps;  // default: smallest grid value
  UncertaintySource source;
  BaseLearnerOptions base;
  int iterations = 50;
  double eta = 2.0;
  double bound = 100.0;
  double gap_tolerance = 1e-3;
  std::size_t knn_k = 5;
  WeightFormula weight_formula = WeightFormula::kNormalizedEntropy;
  double train_fraction = 0.7;
  double tune_fraction = 0.1;

  static SweepConfig Parse(std::string_view text);
  static SweepConfig Load(const std::string& path);
  // Every resolved value; parsing the output yields an identical config.
  std::string Serialize() const;
  void Validate() const;

  std::string AttributeDir() const;
  std::vector<double> ThresholdGrid() const;
  std::uint64_t CellSeed(std::size_t seed_index) const;
};

// 12 log-spaced values in [lo, hi].
std::vector<double> LogSpace(double lo, double hi, std::size_t count);

// ---- cells ----

struct CellSpec {
  Variant variant = Variant::kCertain;
  double eps = 0.0;
  std::size_t seed_index = 0;
};

struct CellResult {
  CellSpec spec;
  std::uint64_t seed = 0;
  double h = 0.0;
  bool ok = false;
  std::string error;
  FairnessReport report;
  std::size_t train_rows = 0;  // rows the final model was fit on
};

struct CellContext {
  const SweepConfig* config = nullptr;
  const AttributeRun* run = nullptr;
  const std::vector<ProxyRecord>* proxies = nullptr;
  double h = 0.3;
};

// D1 positions of the training and held-out portions for a seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> TrainEvalSplit(
    std::size_t d1_rows, double train_fraction, std::uint64_t seed);

// Trains one variant on the seed's training portion of D1 and evaluates on
// the held-out portion with the true attributes.
FairnessReport TrainAndEvaluate(const CellContext& ctx, Variant variant, double eps, std::uint64_t seed,
                                RandomizedClassifier* model_out = nullptr,
                                std::size_t* train_rows = nullptr);

// TrainAndEvaluate with the cell's derived seed.
FairnessReport RunCell(const CellContext& ctx, const CellSpec& spec, std::size_t* train_rows = nullptr);

struct TuningRow {
  double h = 0.0;
  std::size_t rows = 0;
  bool ok = false;
  double accuracy = 0.0;
  double dp = 0.0;  // against proxy attributes on the validation slice
  double objective = 0.0;
};

struct TuningResult {
  double h = 0.0;
  std::vector<TuningRow> table;
};

// Grid search of H for the certain variant: fit on the seed-0 training
// portion minus a validation slice, score accuracy - dp on the slice.
// Ties keep the smaller H.
TuningResult TuneThreshold(const SweepConfig& config, const AttributeRun& run,
                           const std::vector<ProxyRecord>& proxies);

// ---- aggregation ----

struct ParetoInput {
  double accuracy = 0.0;
  double unfairness = 0.0;
};

// Indices of non-dominated points (higher accuracy, lower unfairness),
// sorted by accuracy then index. Identical points never dominate each other.
std::vector<std::size_t> ParetoFront(const std::vector<ParetoInput>& points);

double Median(std::vector<double> values);

struct SweepOutcome {
  std::vector<CellResult> cells;
  double h = 0.0;
  std::size_t failed = 0;
};

// Runs every cell on a worker pool sized by FAIRSCARCE_WORKERS and writes
// results.csv, reports.csv, pareto.csv, tuning.csv and manifest.conf.
SweepOutcome RunSweep(const SweepConfig& config);

std::size_t WorkerCount();

// Mean +- std rows per (variant, constraint, eps) from <dir>/results.csv,
// written to <dir>/table.csv and returned as text.
std::string WriteTable(const std::string& run_dir);

struct ThresholdStudyOptions {
  std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::size_t seeds = 7;
  double train_fraction = 0.7;
  UncertaintySource source;
  BaseLearnerOptions base;
};

struct ThresholdStudyRow {
  double h = 0.0;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  bool ok = false;
  FairnessReport report;
};

// Unconstrained models on {u >= H} per grid value and seed. Writes fig2.csv
// and fig2_summary.csv (medians) into `out_dir`.
std::vector<ThresholdStudyRow> RunThresholdStudy(const AttributeRun& run,
                                                 const ThresholdStudyOptions& options,
                                                 const std::string& out_dir);

}  // namespace fairscarce

#endif  // FAIRSCARCE_HARNESS_HPP_
