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

#include "fairscarce/fairscarce.h"

#include <array>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include "fairscarce/attribute_model.hpp"
#include "fairscarce/error.hpp"
#include "fairscarce/fair_training.hpp"
#include "fairscarce/fairness_metrics.hpp"
#include "fairscarce/harness.hpp"
#include "fairscarce/neural.hpp"
#include "fairscarce/tabular.hpp"
#include "fairscarce/uncertainty.hpp"

using namespace fairscarce;

struct fs_dataset {
  Dataset ds;
};

struct fs_calibrator {
  ConformalCalibrator cal;
};

struct fs_mlp {
  MlpParams params;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
fs_status Guard(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<fs_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FS_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FS_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) Fail(ErrorCode::kInvalidArgument, what);
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void FillReport(const FairnessReport& r, std::size_t train_rows, fs_report* out) {
  out->accuracy = r.accuracy;
  out->dp = r.dp_diff;
  out->eop = r.eop_diff;
  out->eod = r.eod_diff;
  for (int g = 0; g < 2; ++g) {
    const GroupCounts& c = r.groups[static_cast<std::size_t>(g)];
    out->groups[g] = {c.n, c.positives, c.tp, c.fp, c.fn, c.tn};
  }
  out->train_rows = train_rows;
}

FairnessReport ToReport(const fs_report* in) {
  std::array<GroupCounts, 2> groups;
  for (int g = 0; g < 2; ++g) {
    const fs_group_counts& c = in->groups[g];
    groups[static_cast<std::size_t>(g)] = {c.n, c.positives, c.tp, c.fp, c.fn, c.tn};
  }
  return FairnessReport::FromCounts(groups);
}

void FillSummary(const AttributeSummary& s, fs_attr_summary* out) {
  out->attribute_accuracy = s.attribute_accuracy;
  out->mean_uncertainty = s.mean_uncertainty;
  out->d1_rows = s.d1_rows;
  out->d2_rows = s.d2_rows;
  out->epochs = s.epochs;
  out->best_epoch = s.best_epoch;
}

}  // namespace

extern "C" {

FS_API const char* fs_version(void) { return "0.1.0"; }

FS_API const char* fs_status_name(int status) {
  return ErrorCodeName(static_cast<ErrorCode>(status));
}

FS_API const char* fs_last_error_message(void) { return g_last_error.c_str(); }

FS_API void fs_string_free(char* s) { std::free(s); }

FS_API fs_status fs_dataset_load_csv(const char* csv_path, const char* schema_path, fs_dataset** out) {
  return Guard([&] {
    Require(csv_path && schema_path && out, "null argument");
    *out = nullptr;
    const Schema schema = Schema::Load(schema_path);
    const RawTable table = LoadCsv(csv_path, schema);
    std::vector<std::size_t> all(table.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto handle = std::make_unique<fs_dataset>();
    handle->ds = Encode(table, FitEncoder(table, schema, all));
    *out = handle.release();
  });
}

FS_API size_t fs_dataset_rows(const fs_dataset* ds) { return ds ? ds->ds.size() : 0; }

FS_API size_t fs_dataset_dim(const fs_dataset* ds) { return ds ? ds->ds.dim() : 0; }

FS_API fs_status fs_dataset_features(const fs_dataset* ds, double* out, size_t capacity) {
  return Guard([&] {
    Require(ds && out, "null argument");
    const auto& x = ds->ds.features;
    Require(capacity >= static_cast<std::size_t>(x.size()), "buffer too small");
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) out[r * x.cols() + c] = x(r, c);
    }
  });
}

FS_API void fs_dataset_free(fs_dataset* ds) { delete ds; }

FS_API void fs_attr_options_default(fs_attr_options* opts) {
  if (!opts) return;
  const AttributeConfig d;
  opts->ratio = 0.2;
  opts->test_fraction = 0.0;
  opts->seed = 0;
  opts->lambda_max = d.lambda_max;
  opts->max_epochs = d.max_epochs;
  opts->patience = d.patience;
  opts->mc_passes = d.mc_passes;
  opts->batch_universe = d.batch_universe ? 1 : 0;
}

FS_API fs_status fs_train_attribute(const char* csv_path, const char* schema_path, const fs_attr_options* opts,
                                    const char* run_dir, fs_attr_summary* summary) {
  return Guard([&] {
    Require(csv_path && schema_path && opts && run_dir, "null argument");
    AttributeRunConfig cfg;
    cfg.data = csv_path;
    cfg.schema = schema_path;
    cfg.ratio = opts->ratio;
    cfg.test_fraction = opts->test_fraction;
    cfg.attr.seed = opts->seed;
    cfg.attr.lambda_max = opts->lambda_max;
    cfg.attr.max_epochs = opts->max_epochs;
    cfg.attr.patience = opts->patience;
    cfg.attr.mc_passes = opts->mc_passes;
    cfg.attr.batch_universe = opts->batch_universe != 0;
    const AttributeSummary s = CreateAttributeRun(cfg, run_dir);
    if (summary) FillSummary(s, summary);
  });
}

FS_API fs_status fs_read_attribute_summary(const char* run_dir, fs_attr_summary* summary) {
  return Guard([&] {
    Require(run_dir && summary, "null argument");
    FillSummary(ReadAttributeSummary(std::string(run_dir) + "/summary.txt"), summary);
  });
}

FS_API void fs_fair_options_default(fs_fair_options* opts) {
  if (!opts) return;
  const SweepConfig d;
  opts->variant = "certain";
  opts->constraint = "dp";
  opts->uncertainty = "mc-dropout";
  opts->eps = 0.01;
  opts->h = 0.3;
  opts->seed = 0;
  opts->iterations = d.iterations;
  opts->eta = d.eta;
  opts->bound = d.bound;
  opts->use_stumps = 0;
  opts->knn_k = d.knn_k;
  opts->train_fraction = d.train_fraction;
}

FS_API fs_status fs_train_fair(const char* run_dir, const char* proxies_path, const fs_fair_options* opts,
                               const char* model_out, fs_report* report) {
  return Guard([&] {
    Require(run_dir && opts && opts->variant && opts->constraint, "null argument");
    SweepConfig cfg;
    cfg.out_dir = run_dir;
    cfg.constraint = ParseConstraintKind(opts->constraint);
    cfg.source = UncertaintySource::Parse(opts->uncertainty ? opts->uncertainty : "mc-dropout");
    cfg.iterations = opts->iterations;
    cfg.eta = opts->eta;
    cfg.bound = opts->bound;
    cfg.base.kind = opts->use_stumps ? BaseLearnerKind::kStumps : BaseLearnerKind::kLogistic;
    cfg.knn_k = opts->knn_k;
    cfg.train_fraction = opts->train_fraction;
    if (!(opts->eps >= 0.0)) Fail(ErrorCode::kConfig, "eps must be >= 0");
    if (!(opts->h >= 0.0)) Fail(ErrorCode::kConfig, "H must be >= 0");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) Fail(ErrorCode::kConfig, "train fraction in (0,1)");
    const Variant variant = ParseVariant(opts->variant);

    AttributeRun run = LoadAttributeRun(run_dir);
    if (proxies_path) run.proxies = ReadProxies(proxies_path);
    const std::vector<ProxyRecord> proxies = SourceProxies(run, cfg.source);
    CellContext ctx{&cfg, &run, &proxies, opts->h};
    RandomizedClassifier model;
    std::size_t rows = 0;
    const FairnessReport r = TrainAndEvaluate(ctx, variant, opts->eps, opts->seed, &model, &rows);
    if (model_out) SaveClassifier(model, model_out);
    if (report) FillReport(r, rows, report);
  });
}

FS_API fs_status fs_report_csv(const char* method, uint64_t seed, const fs_report* report, char** header,
                               char** row) {
  return Guard([&] {
    Require(method && report && header && row, "null argument");
    *header = nullptr;
    *row = nullptr;
    FairnessReport r = ToReport(report);
    std::string h = ReportCsvHeader();
    std::string line = ReportCsvRow(method, seed, r);
    *header = CopyString(h);
    *row = CopyString(line);
  });
}

FS_API fs_status fs_run_sweep(const char* config_path, const char* out_override, size_t* failed_cells) {
  return Guard([&] {
    Require(config_path != nullptr, "null argument");
    SweepConfig cfg = SweepConfig::Load(config_path);
    if (out_override) cfg.out_dir = out_override;
    const SweepOutcome o = RunSweep(cfg);
    if (failed_cells) *failed_cells = o.failed;
  });
}

FS_API fs_status fs_write_table(const char* run_dir, char** text) {
  return Guard([&] {
    Require(run_dir && text, "null argument");
    *text = nullptr;
    *text = CopyString(WriteTable(run_dir));
  });
}

FS_API fs_status fs_run_threshold_study(const char* run_dir, const char* out_dir, size_t seeds,
                                        const char* uncertainty, int use_stumps) {
  return Guard([&] {
    Require(run_dir && out_dir, "null argument");
    const AttributeRun run = LoadAttributeRun(run_dir);
    ThresholdStudyOptions o;
    o.seeds = seeds;
    if (use_stumps) o.base.kind = BaseLearnerKind::kStumps;
    if (uncertainty) o.source = UncertaintySource::Parse(uncertainty);
    RunThresholdStudy(run, o, out_dir);
  });
}

FS_API fs_status fs_evaluate_report(const double* preds, const int* labels, const int* sensitive, size_t n,
                                    fs_report* report) {
  return Guard([&] {
    Require(preds && labels && sensitive && report, "null argument");
    const FairnessReport r = EvaluateReport({preds, n}, {labels, n}, {sensitive, n});
    FillReport(r, n, report);
  });
}

FS_API fs_status fs_pareto_front(const double* accuracy, const double* unfairness, size_t n, size_t* idx_out,
                                 size_t* count) {
  return Guard([&] {
    Require(accuracy && unfairness && idx_out && count, "null argument");
    Require(n > 0, "pareto front of no points");
    std::vector<ParetoInput> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {accuracy[i], unfairness[i]};
    const auto front = ParetoFront(pts);
    for (std::size_t i = 0; i < front.size(); ++i) idx_out[i] = front[i];
    *count = front.size();
  });
}

FS_API fs_status fs_calibrator_create(const double* probs, const int* truths, size_t n, double epsilon,
                                      fs_calibrator** out) {
  return Guard([&] {
    Require(out != nullptr, "null argument");
    *out = nullptr;
    Require(n == 0 || (probs && truths), "null argument");
    auto handle = std::make_unique<fs_calibrator>();
    handle->cal = ConformalCalibrate({probs, n}, {truths, n}, epsilon);
    *out = handle.release();
  });
}

FS_API double fs_calibrator_qhat(const fs_calibrator* cal) { return cal ? cal->cal.q_hat : 0.0; }

FS_API fs_status fs_calibrator_set(const fs_calibrator* cal, double p_group, char* set_out, size_t capacity) {
  return Guard([&] {
    Require(cal && set_out, "null argument");
    Require(capacity >= 3, "buffer too small");
    const std::string s = ConformalSet(cal->cal, p_group, 0).Encode();
    std::memcpy(set_out, s.c_str(), s.size() + 1);
  });
}

FS_API void fs_calibrator_free(fs_calibrator* cal) { delete cal; }

FS_API fs_status fs_mlp_load(const char* checkpoint_path, fs_mlp** out) {
  return Guard([&] {
    Require(checkpoint_path && out, "null argument");
    *out = nullptr;
    auto handle = std::make_unique<fs_mlp>();
    handle->params = LoadAttributeCheckpoint(checkpoint_path).teacher;
    *out = handle.release();
  });
}

FS_API size_t fs_mlp_input_dim(const fs_mlp* mlp) { return mlp ? mlp->params.input_dim() : 0; }

FS_API fs_status fs_mlp_predict(const fs_mlp* mlp, const double* x, size_t rows, size_t dim, int passes,
                                uint64_t seed, double* p_out, double* u_out) {
  return Guard([&] {
    Require(mlp && x && p_out && u_out, "null argument");
    Require(passes >= 1, "passes must be >= 1");
    if (dim != mlp->params.input_dim()) Fail(ErrorCode::kShapeMismatch, "input width differs from network");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x[r * dim + c];
      }
    }
    const auto preds = McDropoutPredict(mlp->params, m, passes, seed);
    for (std::size_t r = 0; r < rows; ++r) {
      p_out[r] = preds[r].p_group;
      u_out[r] = preds[r].u;
    }
  });
}

FS_API void fs_mlp_free(fs_mlp* mlp) { delete mlp; }

}  // extern "C"
