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

// fairscarce command-line driver. Talks to the library only through the C API.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "fairscarce/fairscarce.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

int Report(fs_status status, const char* what) {
  if (status == FS_OK) return kExitOk;
  std::fprintf(stderr, "fairscarce %s: %s\n", what, fs_last_error_message());
  return status == FS_CONFIG ? kExitConfig : kExitFailure;
}

// A sweep directory holds its attribute run under attr/.
std::string ResolveAttributeDir(const std::string& dir) {
  fs_attr_summary s;
  if (fs_read_attribute_summary(dir.c_str(), &s) == FS_OK) return dir;
  const std::string nested = dir + "/attr";
  if (fs_read_attribute_summary(nested.c_str(), &s) == FS_OK) return nested;
  return dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair classification with scarce demographic information"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fs_version());

  // train-attr
  auto* attr = app.add_subcommand("train-attr", "Train the attribute classifier and write a run directory");
  std::string data, schema, out;
  fs_attr_options attr_opts;
  fs_attr_options_default(&attr_opts);
  attr->add_option("--data", data, "CSV file")->required();
  attr->add_option("--schema", schema, "schema file")->required();
  attr->add_option("--ratio", attr_opts.ratio, "group-labeled fraction")->check(CLI::Range(0.0, 1.0));
  attr->add_option("--seed", attr_opts.seed, "seed")->required();
  attr->add_option("--out", out, "run directory")->required();
  attr->add_option("--test-fraction", attr_opts.test_fraction, "held-out test fraction");
  attr->add_option("--lambda-max", attr_opts.lambda_max, "consistency weight (0 disables)");
  attr->add_option("--epochs", attr_opts.max_epochs, "epoch budget");
  attr->add_option("--patience", attr_opts.patience, "early-stop patience");
  attr->add_option("--mc-passes", attr_opts.mc_passes, "MC-dropout passes for proxies");

  // train-fair
  auto* fair = app.add_subcommand("train-fair", "Train one fair classifier on a run's D1");
  std::string run_dir, proxies, model_out, report_out;
  std::string variant = "certain", constraint = "dp", uncertainty = "mc-dropout", base = "logistic";
  fs_fair_options fair_opts;
  fs_fair_options_default(&fair_opts);
  fair->add_option("--run", run_dir, "attribute run directory")->required();
  fair->add_option("--variant", variant, "certain|weighted|uncertain|proxy-dnn|proxy-knn|clean|vanilla");
  fair->add_option("--constraint", constraint, "dp|eod|eop");
  fair->add_option("--eps", fair_opts.eps, "constraint slack");
  fair->add_option("--H", fair_opts.h, "uncertainty threshold");
  fair->add_option("--proxies", proxies, "proxy CSV (default: the run's proxies.csv)");
  fair->add_option("--seed", fair_opts.seed, "seed")->required();
  fair->add_option("--uncertainty", uncertainty, "mc-dropout|conformal:E|confidence:T");
  fair->add_option("--iterations", fair_opts.iterations, "reduction iterations");
  fair->add_option("--eta", fair_opts.eta, "multiplier learning rate");
  fair->add_option("--bound", fair_opts.bound, "multiplier bound");
  fair->add_option("--base", base, "logistic|stumps");
  fair->add_option("--knn-k", fair_opts.knn_k, "neighbors for proxy-knn");
  fair->add_option("--model-out", model_out, "write the trained model here");
  fair->add_option("--report", report_out, "write the report CSV here");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a sweep from a config file");
  std::string config, sweep_out;
  sweep->add_option("--config", config, "sweep config")->required();
  sweep->add_option("--out", sweep_out, "override the output directory");

  // table
  auto* table = app.add_subcommand("table", "Mean and std per variant from a sweep's results.csv");
  std::string table_run;
  table->add_option("--run", table_run, "sweep directory")->required();

  // fig2
  auto* fig2 = app.add_subcommand("fig2", "Unconstrained models on rows with u >= H");
  std::string fig_run, fig_out, fig_source = "mc-dropout", fig_base = "logistic";
  std::size_t fig_seeds = 7;
  fig2->add_option("--run", fig_run, "attribute run or sweep directory")->required();
  fig2->add_option("--out", fig_out, "output directory (default: --run)");
  fig2->add_option("--seeds", fig_seeds, "seeds per threshold")->check(CLI::PositiveNumber);
  fig2->add_option("--uncertainty", fig_source, "mc-dropout|conformal:E|confidence:T");
  fig2->add_option("--base", fig_base, "logistic|stumps")->check(CLI::IsMember({"logistic", "stumps"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (attr->parsed()) {
    fs_attr_summary s;
    const int rc = Report(fs_train_attribute(data.c_str(), schema.c_str(), &attr_opts, out.c_str(), &s), "train-attr");
    if (rc != kExitOk) return rc;
    std::printf("attribute_accuracy=%.4f mean_uncertainty=%.4f d1_rows=%zu d2_rows=%zu epochs=%d best_epoch=%d\n",
                s.attribute_accuracy, s.mean_uncertainty, s.d1_rows, s.d2_rows, s.epochs, s.best_epoch);
    return kExitOk;
  }

  if (fair->parsed()) {
    if (base != "logistic" && base != "stumps") {
      std::fprintf(stderr, "fairscarce train-fair: --base must be logistic or stumps\n");
      return kExitConfig;
    }
    fair_opts.variant = variant.c_str();
    fair_opts.constraint = constraint.c_str();
    fair_opts.uncertainty = uncertainty.c_str();
    fair_opts.use_stumps = base == "stumps" ? 1 : 0;
    fs_report r;
    int rc = Report(fs_train_fair(run_dir.c_str(), proxies.empty() ? nullptr : proxies.c_str(), &fair_opts,
                                  model_out.empty() ? nullptr : model_out.c_str(), &r),
                    "train-fair");
    if (rc != kExitOk) return rc;
    char* header = nullptr;
    char* row = nullptr;
    rc = Report(fs_report_csv(variant.c_str(), fair_opts.seed, &r, &header, &row), "train-fair");
    if (rc != kExitOk) return rc;
    const std::string text = std::string(header) + "\n" + row + "\n";
    fs_string_free(header);
    fs_string_free(row);
    std::fputs(text.c_str(), stdout);
    if (!report_out.empty()) {
      std::FILE* f = std::fopen(report_out.c_str(), "w");
      if (!f || std::fputs(text.c_str(), f) < 0) {
        std::fprintf(stderr, "fairscarce train-fair: cannot write %s\n", report_out.c_str());
        if (f) std::fclose(f);
        return kExitFailure;
      }
      std::fclose(f);
    }
    return kExitOk;
  }

  if (sweep->parsed()) {
    std::size_t failed = 0;
    const int rc = Report(fs_run_sweep(config.c_str(), sweep_out.empty() ? nullptr : sweep_out.c_str(), &failed),
                          "sweep");
    if (rc != kExitOk) return rc;
    if (failed > 0) {
      std::fprintf(stderr, "fairscarce sweep: %zu cell(s) failed; see manifest.conf\n", failed);
      return kExitFailure;
    }
    return kExitOk;
  }

  if (table->parsed()) {
    char* text = nullptr;
    const int rc = Report(fs_write_table(table_run.c_str(), &text), "table");
    if (rc != kExitOk) return rc;
    std::fputs(text, stdout);
    fs_string_free(text);
    return kExitOk;
  }

  if (fig2->parsed()) {
    const std::string dir = ResolveAttributeDir(fig_run);
    const std::string dest = fig_out.empty() ? fig_run : fig_out;
    return Report(fs_run_threshold_study(dir.c_str(), dest.c_str(), fig_seeds, fig_source.c_str(),
                                         fig_base == "stumps" ? 1 : 0),
                  "fig2");
  }
  return kExitConfig;
}
