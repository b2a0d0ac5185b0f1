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

#include "fairscarce/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "fairscarce/error.hpp"
#include "fairscarce/neural.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/text_util.hpp"
#include "fairscarce/uncertainty.hpp"

namespace fairscarce {

namespace fs = std::filesystem;

namespace {

double ToDouble(const std::string& key, const std::string& value) {
  const auto v = ParseDouble(value);
  if (!v || !std::isfinite(*v)) Fail(ErrorCode::kConfig, key + ": expected a number, got '" + value + "'");
  return *v;
}

long long ToInt(const std::string& key, const std::string& value) {
  const auto v = ParseInt(value);
  if (!v) Fail(ErrorCode::kConfig, key + ": expected an integer, got '" + value + "'");
  return *v;
}

std::uint64_t ToSeed(const std::string& key, const std::string& value) {
  const auto v = ToInt(key, value);
  if (v < 0) Fail(ErrorCode::kConfig, key + ": seeds are non-negative");
  return static_cast<std::uint64_t>(v);
}

bool ToBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  Fail(ErrorCode::kConfig, key + ": expected true or false");
}

std::string BoolText(bool b) { return b ? "true" : "false"; }

std::string JoinDoubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += FormatExact(values[i]);
  }
  return out;
}

// Runs fn(i) for i in [0, n) on WorkerCount() threads.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(WorkerCount(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<std::vector<std::string>> ReadCsvRecords(const std::string& path, std::string* header) {
  std::istringstream in(ReadTextFile(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      if (header) *header = line;
      first = false;
      continue;
    }
    rows.push_back(SplitString(line, ','));
  }
  if (first) Fail(ErrorCode::kEmptyFile, path + " is empty");
  return rows;
}

std::unordered_map<std::uint64_t, std::size_t> IdIndex(const std::vector<ProxyRecord>& proxies) {
  std::unordered_map<std::uint64_t, std::size_t> out;
  for (std::size_t i = 0; i < proxies.size(); ++i) out[proxies[i].sample_id] = i;
  return out;
}

std::vector<int> ProxyAttributes(const std::vector<ProxyRecord>& proxies, const Dataset& ds) {
  const auto index = IdIndex(proxies);
  std::vector<int> out;
  out.reserve(ds.size());
  for (std::uint64_t id : ds.sample_ids) {
    const auto it = index.find(id);
    if (it == index.end()) Fail(ErrorCode::kInvalidArgument, "no proxy for sample " + std::to_string(id));
    out.push_back(proxies[it->second].a_hat);
  }
  return out;
}

std::uint64_t SeedFor(std::uint64_t base, std::size_t index) {
  return DeriveSeed(base, 1000 + static_cast<std::uint64_t>(index));
}

RandomizedClassifier Single(BaseModel model) {
  RandomizedClassifier clf;
  clf.members.push_back(std::move(model));
  clf.weights.push_back(1.0);
  return clf;
}

FairnessReport Evaluate(const RandomizedClassifier& clf, const Dataset& eval) {
  const Eigen::VectorXd preds = clf.ExpectedPredictions(eval.features);
  return EvaluateReport(std::span<const double>(preds.data(), static_cast<std::size_t>(preds.size())),
                        EvaluationAccess::TrueLabels(eval), EvaluationAccess::TrueSensitive(eval));
}

}  // namespace

// ---- attribute runs ----

std::string AttributeRunConfig::Serialize() const {
  std::ostringstream out;
  const AttributeConfig& a = attr;
  out << "data = " << data << "\n";
  out << "schema = " << schema << "\n";
  out << "ratio = " << FormatExact(ratio) << "\n";
  out << "test_fraction = " << FormatExact(test_fraction) << "\n";
  out << "seed = " << a.seed << "\n";
  std::string hidden;
  for (std::size_t i = 0; i < a.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(a.hidden[i]);
  out << "attr.hidden = " << hidden << "\n";
  out << "attr.dropout = " << FormatExact(a.dropout) << "\n";
  out << "attr.max_epochs = " << a.max_epochs << "\n";
  out << "attr.patience = " << a.patience << "\n";
  out << "attr.batch_size = " << a.batch_size << "\n";
  out << "attr.learning_rate = " << FormatExact(a.learning_rate) << "\n";
  out << "attr.ema_decay = " << FormatExact(a.ema_decay) << "\n";
  out << "attr.lambda_max = " << FormatExact(a.lambda_max) << "\n";
  out << "attr.r_max = " << FormatExact(a.r_max) << "\n";
  out << "attr.ramp_length = " << FormatExact(a.ramp_length) << "\n";
  out << "attr.mc_passes = " << a.mc_passes << "\n";
  out << "attr.train_mc_passes = " << a.train_mc_passes << "\n";
  out << "attr.validation_fraction = " << FormatExact(a.validation_fraction) << "\n";
  out << "attr.calibration_fraction = " << FormatExact(a.calibration_fraction) << "\n";
  out << "attr.consistency_space = "
      << (a.consistency_space == ConsistencySpace::kLogit ? "logit" : "probability") << "\n";
  out << "attr.batch_universe = " << BoolText(a.batch_universe) << "\n";
  out << "attr.epoch_over_unlabeled = " << BoolText(a.epoch_over_unlabeled) << "\n";
  out << "attr.proxy_from_student = " << BoolText(a.proxy_from_student) << "\n";
  out << "attr.restore_best = " << BoolText(a.restore_best) << "\n";
  return out.str();
}

bool AttributeRunConfig::Apply(const std::string& key, const std::string& value) {
  AttributeConfig& a = attr;
  if (key == "data") {
    data = value;
  } else if (key == "schema") {
    schema = value;
  } else if (key == "ratio") {
    ratio = ToDouble(key, value);
  } else if (key == "test_fraction") {
    test_fraction = ToDouble(key, value);
  } else if (key == "seed") {
    a.seed = ToSeed(key, value);
  } else if (key == "attr.hidden") {
    a.hidden.clear();
    for (const auto& tok : SplitString(value, ',')) {
      const auto v = ToInt(key, std::string(Trim(tok)));
      if (v <= 0) Fail(ErrorCode::kConfig, "attr.hidden: widths must be positive");
      a.hidden.push_back(static_cast<std::size_t>(v));
    }
  } else if (key == "attr.dropout") {
    a.dropout = ToDouble(key, value);
  } else if (key == "attr.max_epochs") {
    a.max_epochs = static_cast<int>(ToInt(key, value));
  } else if (key == "attr.patience") {
    a.patience = static_cast<int>(ToInt(key, value));
  } else if (key == "attr.batch_size") {
    const auto v = ToInt(key, value);
    if (v <= 0) Fail(ErrorCode::kConfig, "attr.batch_size must be positive");
    a.batch_size = static_cast<std::size_t>(v);
  } else if (key == "attr.learning_rate") {
    a.learning_rate = ToDouble(key, value);
  } else if (key == "attr.ema_decay") {
    a.ema_decay = ToDouble(key, value);
  } else if (key == "attr.lambda_max") {
    a.lambda_max = ToDouble(key, value);
  } else if (key == "attr.r_max") {
    a.r_max = ToDouble(key, value);
  } else if (key == "attr.ramp_length") {
    a.ramp_length = ToDouble(key, value);
  } else if (key == "attr.mc_passes") {
    a.mc_passes = static_cast<int>(ToInt(key, value));
  } else if (key == "attr.train_mc_passes") {
    a.train_mc_passes = static_cast<int>(ToInt(key, value));
  } else if (key == "attr.validation_fraction") {
    a.validation_fraction = ToDouble(key, value);
  } else if (key == "attr.calibration_fraction") {
    a.calibration_fraction = ToDouble(key, value);
  } else if (key == "attr.batch_universe") {
    a.batch_universe = ToBool(key, value);
  } else if (key == "attr.epoch_over_unlabeled") {
    a.epoch_over_unlabeled = ToBool(key, value);
  } else if (key == "attr.proxy_from_student") {
    a.proxy_from_student = ToBool(key, value);
  } else if (key == "attr.consistency_space") {
    if (value == "probability") {
      a.consistency_space = ConsistencySpace::kProbability;
    } else if (value == "logit") {
      a.consistency_space = ConsistencySpace::kLogit;
    } else {
      Fail(ErrorCode::kConfig, "attr.consistency_space must be probability or logit");
    }
  } else if (key == "attr.restore_best") {
    a.restore_best = ToBool(key, value);
  } else {
    return false;
  }
  return true;
}

namespace {

void WriteSummary(const AttributeSummary& s, const std::string& path) {
  std::ostringstream out;
  out << "attribute_accuracy = " << FormatExact(s.attribute_accuracy) << "\n";
  out << "mean_uncertainty = " << FormatExact(s.mean_uncertainty) << "\n";
  out << "d1_rows = " << s.d1_rows << "\n";
  out << "d2_rows = " << s.d2_rows << "\n";
  out << "epochs = " << s.epochs << "\n";
  out << "best_epoch = " << s.best_epoch << "\n";
  WriteTextFile(path, out.str());
}

Eigen::VectorXd EvalProbabilities(const MlpParams& net, const Eigen::MatrixXd& x) {
  DropoutPlan eval = DropoutPlan::Eval();
  return ForwardLogits(net, x, eval).unaryExpr([](double z) { return Sigmoid(z); });
}

}  // namespace

AttributeSummary ReadAttributeSummary(const std::string& path) {
  AttributeSummary s;
  for (const auto& [key, value] : ParseKeyValues(ReadTextFile(path))) {
    if (key == "attribute_accuracy") s.attribute_accuracy = ToDouble(key, value);
    else if (key == "mean_uncertainty") s.mean_uncertainty = ToDouble(key, value);
    else if (key == "d1_rows") s.d1_rows = static_cast<std::size_t>(ToInt(key, value));
    else if (key == "d2_rows") s.d2_rows = static_cast<std::size_t>(ToInt(key, value));
    else if (key == "epochs") s.epochs = static_cast<int>(ToInt(key, value));
    else if (key == "best_epoch") s.best_epoch = static_cast<int>(ToInt(key, value));
  }
  return s;
}

AttributeSummary CreateAttributeRun(const AttributeRunConfig& config, const std::string& dir) {
  config.attr.Validate();
  if (config.data.empty() || config.schema.empty()) Fail(ErrorCode::kConfig, "data and schema are required");
  const Schema schema = Schema::Load(config.schema);
  const RawTable table = LoadCsv(config.data, schema);
  const ScarceSplit split =
      PrepareScarceSplit(table, schema, config.ratio, config.attr.seed, config.test_fraction);
  const AttributeTrainingResult trained = TrainAttributeClassifier(split, config.attr);
  const auto proxies = PredictProxy(trained.state, split.d1, config.attr.mc_passes,
                                    DeriveSeed(config.attr.seed, 200), config.attr.proxy_from_student);

  fs::create_directories(dir);
  fs::remove(fs::path(dir) / "summary.txt");
  WriteTextFile((fs::path(dir) / "run.conf").string(), config.Serialize());
  split.d1.Save((fs::path(dir) / "d1.data").string());
  split.d2.Save((fs::path(dir) / "d2.data").string());
  split.test.Save((fs::path(dir) / "test.data").string());
  SaveAttributeCheckpoint(trained.state, (fs::path(dir) / "checkpoint.txt").string());
  WriteProxies(proxies, (fs::path(dir) / "proxies.csv").string());
  WriteTrainingLog(trained.log, (fs::path(dir) / "train_log.csv").string());

  const Eigen::VectorXd d1_probs = EvalProbabilities(trained.state.teacher, split.d1.features);
  std::ostringstream eval_out;
  eval_out << "sample_id,p_group\n";
  for (std::size_t i = 0; i < split.d1.size(); ++i) {
    eval_out << split.d1.sample_ids[i] << "," << FormatExact(d1_probs(static_cast<Eigen::Index>(i))) << "\n";
  }
  WriteTextFile((fs::path(dir) / "eval_probs.csv").string(), eval_out.str());

  const Dataset calib = split.d2.Subset(trained.plan.calibration);
  const Eigen::VectorXd calib_probs = EvalProbabilities(trained.state.teacher, calib.features);
  std::ostringstream cal_out;
  cal_out << "sample_id,p_group,truth\n";
  for (std::size_t i = 0; i < calib.size(); ++i) {
    cal_out << calib.sample_ids[i] << "," << FormatExact(calib_probs(static_cast<Eigen::Index>(i))) << ","
            << (*calib.sensitive)[i] << "\n";
  }
  WriteTextFile((fs::path(dir) / "calibration.csv").string(), cal_out.str());

  AttributeSummary summary;
  const auto& truth = EvaluationAccess::TrueSensitive(split.d1);
  const auto a_hat = ProxyAttributes(proxies, split.d1);
  double correct = 0.0, u_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += a_hat[i] == truth[i] ? 1.0 : 0.0;
  for (const auto& p : proxies) u_sum += p.u;
  summary.attribute_accuracy = truth.empty() ? 0.0 : correct / static_cast<double>(truth.size());
  summary.mean_uncertainty = proxies.empty() ? 0.0 : u_sum / static_cast<double>(proxies.size());
  summary.d1_rows = split.d1.size();
  summary.d2_rows = split.d2.size();
  summary.epochs = static_cast<int>(trained.log.size());
  summary.best_epoch = trained.best_epoch;
  // Written last: its presence marks a complete run.
  WriteSummary(summary, (fs::path(dir) / "summary.txt").string());
  return summary;
}

AttributeRun LoadAttributeRun(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "summary.txt")) Fail(ErrorCode::kIo, dir + " holds no finished attribute run");
  AttributeRun run;
  run.dir = dir;
  for (const auto& [key, value] : ParseKeyValues(ReadTextFile((root / "run.conf").string()))) {
    if (!run.config.Apply(key, value)) Fail(ErrorCode::kFormat, "unknown key '" + key + "' in run.conf");
  }
  run.d1 = Dataset::Load((root / "d1.data").string());
  run.d2 = Dataset::Load((root / "d2.data").string());
  run.test = Dataset::Load((root / "test.data").string());
  run.state = LoadAttributeCheckpoint((root / "checkpoint.txt").string());
  run.proxies = ReadProxies((root / "proxies.csv").string());
  run.summary = ReadAttributeSummary((root / "summary.txt").string());

  const auto eval_rows = ReadCsvRecords((root / "eval_probs.csv").string(), nullptr);
  if (eval_rows.size() != run.d1.size()) Fail(ErrorCode::kFormat, "eval_probs.csv does not match D1");
  for (std::size_t i = 0; i < eval_rows.size(); ++i) {
    if (eval_rows[i].size() != 2 || eval_rows[i][0] != std::to_string(run.d1.sample_ids[i])) {
      Fail(ErrorCode::kFormat, "eval_probs.csv row " + std::to_string(i + 1) + " is out of order");
    }
    run.d1_eval_probs.push_back(ToDouble("p_group", eval_rows[i][1]));
  }
  for (const auto& rec : ReadCsvRecords((root / "calibration.csv").string(), nullptr)) {
    if (rec.size() != 3) Fail(ErrorCode::kFormat, "calibration.csv needs three columns");
    run.calibration_probs.push_back(ToDouble("p_group", rec[1]));
    run.calibration_truth.push_back(static_cast<int>(ToInt("truth", rec[2])));
  }
  return run;
}

AttributeRun EnsureAttributeRun(const AttributeRunConfig& config, const std::string& dir) {
  const fs::path root(dir);
  if (fs::exists(root / "summary.txt") && fs::exists(root / "run.conf") &&
      ReadTextFile((root / "run.conf").string()) == config.Serialize()) {
    return LoadAttributeRun(dir);
  }
  CreateAttributeRun(config, dir);
  return LoadAttributeRun(dir);
}

// ---- variants and sources ----

Variant ParseVariant(std::string_view name) {
  if (name == "vanilla") return Variant::kVanilla;
  if (name == "clean") return Variant::kClean;
  if (name == "proxy-dnn") return Variant::kProxyDnn;
  if (name == "proxy-knn") return Variant::kProxyKnn;
  if (name == "certain") return Variant::kCertain;
  if (name == "weighted") return Variant::kWeighted;
  if (name == "uncertain") return Variant::kUncertain;
  if (name == "certain-unconstrained") return Variant::kCertainUnconstrained;
  Fail(ErrorCode::kConfig, "unknown variant '" + std::string(name) + "'");
}

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kClean: return "clean";
    case Variant::kProxyDnn: return "proxy-dnn";
    case Variant::kProxyKnn: return "proxy-knn";
    case Variant::kCertain: return "certain";
    case Variant::kWeighted: return "weighted";
    case Variant::kUncertain: return "uncertain";
    case Variant::kCertainUnconstrained: return "certain-unconstrained";
  }
  return "certain";
}

bool VariantUsesConstraint(Variant v) {
  return v == Variant::kClean || v == Variant::kProxyDnn || v == Variant::kProxyKnn ||
         v == Variant::kCertain || v == Variant::kWeighted;
}

namespace {

bool VariantUsesThreshold(Variant v) {
  return v == Variant::kCertain || v == Variant::kUncertain || v == Variant::kCertainUnconstrained;
}

}  // namespace

UncertaintySource UncertaintySource::Parse(std::string_view text) {
  UncertaintySource s;
  const std::string t(Trim(text));
  if (t == "mc-dropout") return s;
  const auto colon = t.find(':');
  const std::string head = t.substr(0, colon);
  if (colon == std::string::npos || (head != "conformal" && head != "confidence")) {
    Fail(ErrorCode::kConfig, "unknown uncertainty source '" + t + "'");
  }
  s.kind = head == "conformal" ? Kind::kConformal : Kind::kConfidence;
  s.parameter = ToDouble("uncertainty", t.substr(colon + 1));
  if (s.kind == Kind::kConformal && !(s.parameter > 0.0 && s.parameter < 1.0)) {
    Fail(ErrorCode::kConfig, "conformal epsilon must lie in (0, 1)");
  }
  if (s.kind == Kind::kConfidence && !(s.parameter >= 0.5 && s.parameter <= 1.0)) {
    Fail(ErrorCode::kConfig, "confidence tau must lie in [0.5, 1]");
  }
  return s;
}

std::string UncertaintySource::Name() const {
  switch (kind) {
    case Kind::kMcDropout: return "mc-dropout";
    case Kind::kConformal: return "conformal:" + FormatExact(parameter);
    case Kind::kConfidence: return "confidence:" + FormatExact(parameter);
  }
  return "mc-dropout";
}

std::vector<ProxyRecord> SourceProxies(const AttributeRun& run, const UncertaintySource& source) {
  if (source.kind == UncertaintySource::Kind::kMcDropout) return run.proxies;
  std::vector<ProxyRecord> out = run.proxies;
  const auto index = IdIndex(out);
  if (source.kind == UncertaintySource::Kind::kConformal) {
    const auto cal = ConformalCalibrate(run.calibration_probs, run.calibration_truth, source.parameter);
    for (std::size_t i = 0; i < run.d1.size(); ++i) {
      const std::uint64_t id = run.d1.sample_ids[i];
      const double p = run.d1_eval_probs[i];
      const PredictionSet set = ConformalSet(cal, p, id);
      ProxyRecord& rec = out[index.at(id)];
      rec.p_group = p;
      if (set.size() == 1) {
        rec.a_hat = set.has1 ? 1 : 0;
        rec.u = 0.0;
      } else {
        rec.a_hat = p >= 0.5 ? 1 : 0;
        rec.u = kLn2;
      }
    }
    return out;
  }
  std::vector<double> probs;
  std::vector<std::uint64_t> ids;
  for (const auto& p : out) {
    probs.push_back(p.p_group);
    ids.push_back(p.sample_id);
  }
  const auto part = ConfidenceBandFilter(probs, ids, source.parameter);
  for (auto& rec : out) rec.u = kLn2;
  for (std::uint64_t id : part.certain) out[index.at(id)].u = 0.0;
  return out;
}

// ---- sweep configuration ----

std::vector<double> LogSpace(double lo, double hi, std::size_t count) {
  if (count == 0 || !(lo > 0.0) || !(hi >= lo)) Fail(ErrorCode::kConfig, "bad log-spaced grid");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  return out;
}

SweepConfig SweepConfig::Parse(std::string_view text) {
  SweepConfig c;
  c.eps_grid = LogSpace(0.001, 0.3, 12);
  for (const auto& [key, value] : ParseKeyValues(text)) {
    if (c.attribute.Apply(key, value)) {
      if (key == "seed") c.seed = c.attribute.attr.seed;
      continue;
    }
    if (key == "out") {
      c.out_dir = value;
    } else if (key == "attr_run") {
      c.attr_run = value;
    } else if (key == "seeds") {
      const auto v = ToInt(key, value);
      if (v < 1) Fail(ErrorCode::kConfig, "seeds must be >= 1");
      c.seeds = static_cast<std::size_t>(v);
    } else if (key == "variants") {
      c.variants.clear();
      for (const auto& tok : SplitString(value, ',')) c.variants.push_back(ParseVariant(Trim(tok)));
    } else if (key == "constraint") {
      c.constraint = ParseConstraintKind(value);
    } else if (key == "eps") {
      c.eps_grid.clear();
      if (value.rfind("logspace:", 0) == 0) {
        const auto parts = SplitString(value.substr(9), ':');
        if (parts.size() != 3) Fail(ErrorCode::kConfig, "eps: logspace:lo:hi:count");
        c.eps_grid = LogSpace(ToDouble(key, parts[0]), ToDouble(key, parts[1]),
                              static_cast<std::size_t>(std::max(0LL, ToInt(key, parts[2]))));
      } else {
        for (const auto& tok : SplitString(value, ',')) c.eps_grid.push_back(ToDouble(key, std::string(Trim(tok))));
      }
    } else if (key == "H") {
      if (value == "tune") c.h_fixed.reset();
      else c.h_fixed = ToDouble(key, value);
    } else if (key == "h_range") {
      const auto parts = SplitString(value, ':');
      if (parts.size() != 3) Fail(ErrorCode::kConfig, "h_range: lo:hi:step");
      c.h_min = ToDouble(key, parts[0]);
      c.h_max = ToDouble(key, parts[1]);
      c.h_step = ToDouble(key, parts[2]);
    } else if (key == "tune_eps") {
      c.tune_eps = ToDouble(key, value);
    } else if (key == "uncertainty") {
      c.source = UncertaintySource::Parse(value);
    } else if (key == "base") {
      if (value == "logistic") c.base.kind = BaseLearnerKind::kLogistic;
      else if (value == "stumps") c.base.kind = BaseLearnerKind::kStumps;
      else Fail(ErrorCode::kConfig, "base: logistic or stumps");
    } else if (key == "base.rounds") {
      c.base.rounds = static_cast<int>(ToInt(key, value));
    } else if (key == "base.l2") {
      c.base.l2 = ToDouble(key, value);
    } else if (key == "iterations") {
      c.iterations = static_cast<int>(ToInt(key, value));
    } else if (key == "eta") {
      c.eta = ToDouble(key, value);
    } else if (key == "bound") {
      c.bound = ToDouble(key, value);
    } else if (key == "gap") {
      c.gap_tolerance = ToDouble(key, value);
    } else if (key == "knn_k") {
      const auto v = ToInt(key, value);
      if (v < 1) Fail(ErrorCode::kConfig, "knn_k must be >= 1");
      c.knn_k = static_cast<std::size_t>(v);
    } else if (key == "weight_formula") {
      if (value == "normalized") c.weight_formula = WeightFormula::kNormalizedEntropy;
      else if (value == "raw") c.weight_formula = WeightFormula::kRawEntropy;
      else Fail(ErrorCode::kConfig, "weight_formula: normalized or raw");
    } else if (key == "train_fraction") {
      c.train_fraction = ToDouble(key, value);
    } else if (key == "tune_fraction") {
      c.tune_fraction = ToDouble(key, value);
    } else {
      Fail(ErrorCode::kConfig, "unknown key '" + key + "'");
    }
  }
  c.Validate();
  return c;
}

SweepConfig SweepConfig::Load(const std::string& path) {
  std::string text;
  try {
    text = ReadTextFile(path);
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
  return Parse(text);
}

std::string SweepConfig::Serialize() const {
  std::ostringstream out;
  out << attribute.Serialize();
  out << "out = " << out_dir << "\n";
  if (!attr_run.empty()) out << "attr_run = " << attr_run << "\n";
  out << "seeds = " << seeds << "\n";
  std::string vs;
  for (std::size_t i = 0; i < variants.size(); ++i) vs += (i ? "," : "") + VariantName(variants[i]);
  out << "variants = " << vs << "\n";
  out << "constraint = " << ConstraintKindName(constraint) << "\n";
  out << "eps = " << JoinDoubles(eps_grid) << "\n";
  out << "H = " << (h_fixed ? FormatExact(*h_fixed) : std::string("tune")) << "\n";
  out << "h_range = " << FormatExact(h_min) << ":" << FormatExact(h_max) << ":" << FormatExact(h_step) << "\n";
  if (tune_eps) out << "tune_eps = " << FormatExact(*tune_eps) << "\n";
  out << "uncertainty = " << source.Name() << "\n";
  out << "base = " << (base.kind == BaseLearnerKind::kStumps ? "stumps" : "logistic") << "\n";
  out << "base.rounds = " << base.rounds << "\n";
  out << "base.l2 = " << FormatExact(base.l2) << "\n";
  out << "iterations = " << iterations << "\n";
  out << "eta = " << FormatExact(eta) << "\n";
  out << "bound = " << FormatExact(bound) << "\n";
  out << "gap = " << FormatExact(gap_tolerance) << "\n";
  out << "knn_k = " << knn_k << "\n";
  out << "weight_formula = " << (weight_formula == WeightFormula::kRawEntropy ? "raw" : "normalized") << "\n";
  out << "train_fraction = " << FormatExact(train_fraction) << "\n";
  out << "tune_fraction = " << FormatExact(tune_fraction) << "\n";
  return out.str();
}

void SweepConfig::Validate() const {
  if (out_dir.empty()) Fail(ErrorCode::kConfig, "out is required");
  if (attr_run.empty() && (attribute.data.empty() || attribute.schema.empty())) {
    Fail(ErrorCode::kConfig, "data and schema are required unless attr_run is given");
  }
  if (seeds < 1) Fail(ErrorCode::kConfig, "seeds must be >= 1");
  if (variants.empty()) Fail(ErrorCode::kConfig, "variants must be nonempty");
  if (eps_grid.empty()) Fail(ErrorCode::kConfig, "eps grid must be nonempty");
  for (double e : eps_grid) {
    if (!(e >= 0.0)) Fail(ErrorCode::kConfig, "eps values must be >= 0");
  }
  if (!(h_min >= 0.0 && h_min <= kLn2) || !(h_max >= h_min) || !(h_step > 0.0)) {
    Fail(ErrorCode::kConfig, "h_range must start inside [0, ln 2] with a positive step");
  }
  if (h_fixed && !(*h_fixed >= 0.0)) Fail(ErrorCode::kConfig, "H must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) Fail(ErrorCode::kConfig, "train_fraction in (0,1)");
  if (!(tune_fraction > 0.0 && tune_fraction < 1.0)) Fail(ErrorCode::kConfig, "tune_fraction in (0,1)");
  if (iterations < 1 || !(eta > 0.0) || !(bound > 0.0) || !(gap_tolerance >= 0.0)) {
    Fail(ErrorCode::kConfig, "bad reduction settings");
  }
  if (base.rounds < 1 || !(base.l2 >= 0.0)) Fail(ErrorCode::kConfig, "bad base learner settings");
  try {
    attribute.attr.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
}

std::string SweepConfig::AttributeDir() const {
  return attr_run.empty() ? (fs::path(out_dir) / "attr").string() : attr_run;
}

std::vector<double> SweepConfig::ThresholdGrid() const {
  // Entropy never exceeds ln 2, so grid points past it collapse onto ln 2.
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double h = h_min + h_step * static_cast<double>(i);
    if (h > h_max + 1e-9) break;
    const double v = std::min(h, kLn2);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

std::uint64_t SweepConfig::CellSeed(std::size_t seed_index) const { return SeedFor(seed, seed_index); }

// ---- cells ----

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> TrainEvalSplit(
    std::size_t d1_rows, double train_fraction, std::uint64_t seed) {
  return RandomSlice(d1_rows, train_fraction, DeriveSeed(seed, 1));
}

namespace {

ExpGradOptions ReductionOptions(const SweepConfig& c, double eps, std::uint64_t seed) {
  ExpGradOptions o;
  o.constraint.kind = c.constraint;
  o.constraint.slack = eps;
  o.iterations = c.iterations;
  o.eta = c.eta;
  o.bound = c.bound;
  o.gap_tolerance = c.gap_tolerance;
  o.base = c.base;
  o.seed = seed;
  return o;
}

RandomizedClassifier TrainVariant(const CellContext& ctx, Variant variant, double eps, std::uint64_t seed,
                                  const Dataset& train, std::size_t* rows_used) {
  const SweepConfig& c = *ctx.config;
  const auto& proxies = *ctx.proxies;
  const ExpGradOptions eg = ReductionOptions(c, eps, seed);
  auto constrained = [&](const WeightedSamples& s) {
    if (rows_used) *rows_used = s.size();
    return ExpGradTrain(s, eg).classifier;
  };
  auto unconstrained = [&](const Eigen::MatrixXd& x, const std::vector<int>& y) {
    if (rows_used) *rows_used = y.size();
    return Single(FitUnconstrained(x, y, c.base));
  };
  switch (variant) {
    case Variant::kVanilla:
      return unconstrained(train.features, *train.labels);
    case Variant::kClean:
      return constrained(SamplesFromDataset(train, EvaluationAccess::TrueSensitive(train)));
    case Variant::kProxyDnn:
      return constrained(SamplesFromDataset(train, ProxyAttributes(proxies, train)));
    case Variant::kProxyKnn:
      return constrained(SamplesFromDataset(train, KnnImpute(train, ctx.run->d2, c.knn_k)));
    case Variant::kCertain:
      return constrained(FilterCertain(proxies, train, ctx.h));
    case Variant::kWeighted:
      return constrained(WeightFromUncertainty(proxies, train, c.weight_formula));
    case Variant::kUncertain: {
      const Dataset sel = SelectUncertain(proxies, train, ctx.h);
      return unconstrained(sel.features, *sel.labels);
    }
    case Variant::kCertainUnconstrained: {
      const WeightedSamples s = FilterCertain(proxies, train, ctx.h);
      return unconstrained(s.features, s.labels);
    }
  }
  Fail(ErrorCode::kInternal, "unhandled variant");
}

}  // namespace

FairnessReport TrainAndEvaluate(const CellContext& ctx, Variant variant, double eps, std::uint64_t seed,
                                RandomizedClassifier* model_out, std::size_t* train_rows) {
  const Dataset& d1 = ctx.run->d1;
  const auto [train_pos, eval_pos] = TrainEvalSplit(d1.size(), ctx.config->train_fraction, seed);
  const Dataset train = d1.Subset(train_pos);
  const Dataset eval = d1.Subset(eval_pos);
  RandomizedClassifier clf = TrainVariant(ctx, variant, eps, seed, train, train_rows);
  const FairnessReport report = Evaluate(clf, eval);
  if (model_out) *model_out = std::move(clf);
  return report;
}

FairnessReport RunCell(const CellContext& ctx, const CellSpec& spec, std::size_t* train_rows) {
  return TrainAndEvaluate(ctx, spec.variant, spec.eps, ctx.config->CellSeed(spec.seed_index), nullptr,
                          train_rows);
}

TuningResult TuneThreshold(const SweepConfig& config, const AttributeRun& run,
                           const std::vector<ProxyRecord>& proxies) {
  TuningResult result;
  const auto grid = config.ThresholdGrid();
  if (grid.empty()) Fail(ErrorCode::kConfig, "empty threshold grid");
  if (grid.size() == 1) {
    result.h = grid.front();
    return result;
  }
  const std::uint64_t seed = config.CellSeed(0);
  const auto [train_pos, eval_pos] = TrainEvalSplit(run.d1.size(), config.train_fraction, seed);
  const Dataset train = run.d1.Subset(train_pos);
  const auto [val_pos, fit_pos] = RandomSlice(train.size(), config.tune_fraction, DeriveSeed(seed, 2));
  const Dataset fit = train.Subset(fit_pos);
  const Dataset val = train.Subset(val_pos);
  const std::vector<int> val_attr = ProxyAttributes(proxies, val);
  const double eps = config.tune_eps ? *config.tune_eps
                                     : *std::min_element(config.eps_grid.begin(), config.eps_grid.end());

  result.table.resize(grid.size());
  ParallelFor(grid.size(), [&](std::size_t i) {
    TuningRow& row = result.table[i];
    row.h = grid[i];
    try {
      const WeightedSamples s = FilterCertain(proxies, fit, grid[i]);
      row.rows = s.size();
      const auto clf = ExpGradTrain(s, ReductionOptions(config, eps, seed)).classifier;
      const Eigen::VectorXd preds = clf.ExpectedPredictions(val.features);
      const std::span<const double> ps(preds.data(), static_cast<std::size_t>(preds.size()));
      double correct = 0.0;
      for (std::size_t r = 0; r < val.size(); ++r) {
        correct += (*val.labels)[r] == 1 ? ps[r] : 1.0 - ps[r];
      }
      row.accuracy = correct / static_cast<double>(val.size());
      row.dp = DemographicParityDiff(ps, val_attr);
      row.objective = row.accuracy - row.dp;
      row.ok = true;
    } catch (const Error&) {
      row.ok = false;
    }
  });
  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  for (const TuningRow& row : result.table) {
    if (row.ok && row.objective > best) {
      best = row.objective;
      result.h = row.h;
      found = true;
    }
  }
  if (!found) Fail(ErrorCode::kEmptySelection, "no threshold candidate could be trained");
  return result;
}

// ---- aggregation ----

std::vector<std::size_t> ParetoFront(const std::vector<ParetoInput>& points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      const auto& a = points[j];
      const auto& b = points[i];
      dominated = a.accuracy >= b.accuracy && a.unfairness <= b.unfairness &&
                  (a.accuracy > b.accuracy || a.unfairness < b.unfairness);
    }
    if (!dominated) front.push_back(i);
  }
  std::stable_sort(front.begin(), front.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].accuracy < points[b].accuracy; });
  return front;
}

double Median(std::vector<double> values) {
  if (values.empty()) Fail(ErrorCode::kInvalidArgument, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::size_t WorkerCount() {
  if (const char* env = std::getenv("FAIRSCARCE_WORKERS")) {
    const auto v = ParseInt(env);
    if (v && *v >= 1) return static_cast<std::size_t>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double MetricOf(const FairnessReport& r, const std::string& metric) {
  if (metric == "dp") return r.dp_diff;
  if (metric == "eop") return r.eop_diff;
  return r.eod_diff;
}

}  // namespace

SweepOutcome RunSweep(const SweepConfig& config) {
  config.Validate();
  fs::create_directories(config.out_dir);
  const AttributeRun run = config.attr_run.empty()
                               ? EnsureAttributeRun(config.attribute, config.AttributeDir())
                               : LoadAttributeRun(config.attr_run);
  const std::vector<ProxyRecord> proxies = SourceProxies(run, config.source);
  const fs::path out(config.out_dir);

  SweepOutcome outcome;
  const bool needs_h = std::any_of(config.variants.begin(), config.variants.end(), VariantUsesThreshold);
  if (config.h_fixed) {
    outcome.h = *config.h_fixed;
  } else if (needs_h) {
    const TuningResult tuned = TuneThreshold(config, run, proxies);
    outcome.h = tuned.h;
    std::ostringstream t;
    t << "H,rows,status,accuracy,dp_proxy,objective\n";
    for (const auto& row : tuned.table) {
      t << FormatExact(row.h) << "," << row.rows << "," << (row.ok ? "ok" : "failed") << ","
        << FormatExact(row.accuracy) << "," << FormatExact(row.dp) << "," << FormatExact(row.objective) << "\n";
    }
    WriteTextFile((out / "tuning.csv").string(), t.str());
  }

  std::vector<CellSpec> specs;
  for (Variant v : config.variants) {
    for (double eps : config.eps_grid) {
      for (std::size_t s = 0; s < config.seeds; ++s) specs.push_back({v, eps, s});
    }
  }
  CellContext ctx{&config, &run, &proxies, outcome.h};
  outcome.cells.resize(specs.size());
  ParallelFor(specs.size(), [&](std::size_t i) {
    CellResult& cell = outcome.cells[i];
    cell.spec = specs[i];
    cell.seed = config.CellSeed(specs[i].seed_index);
    cell.h = outcome.h;
    try {
      cell.report = RunCell(ctx, specs[i], &cell.train_rows);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });

  // Single appender: files are written in cell order after the pool drains.
  std::ostringstream results, reports, manifest;
  results << "variant,constraint,eps_fair,seed,H,uncertainty_source,accuracy,dp,eop,eod\n";
  reports << ReportCsvHeader() << "\n";
  manifest << config.Serialize();
  manifest << "# resolved H = " << FormatExact(outcome.h) << "\n";
  manifest << "# attribute run = " << run.dir << "\n";
  for (const CellResult& cell : outcome.cells) {
    const std::string variant = VariantName(cell.spec.variant);
    manifest << "# cell " << variant << " " << FormatExact(cell.spec.eps) << " " << cell.spec.seed_index << " "
             << cell.seed << " " << (cell.ok ? "ok" : "failed: " + cell.error) << "\n";
    if (!cell.ok) {
      ++outcome.failed;
      std::cerr << "warning: cell " << variant << " eps=" << FormatExact(cell.spec.eps)
                << " seed=" << cell.seed << " failed: " << cell.error << "\n";
      continue;
    }
    results << variant << "," << ConstraintKindName(config.constraint) << "," << FormatExact(cell.spec.eps) << ","
            << cell.seed << "," << FormatExact(cell.h) << "," << config.source.Name() << ","
            << FormatExact(cell.report.accuracy) << "," << FormatExact(cell.report.dp_diff) << ","
            << FormatExact(cell.report.eop_diff) << "," << FormatExact(cell.report.eod_diff) << "\n";
    reports << ReportCsvRow(variant + "@" + FormatExact(cell.spec.eps), cell.seed, cell.report) << "\n";
  }

  std::ostringstream pareto;
  pareto << "variant,metric,eps_fair,accuracy_median,unfairness_median,accuracy_min,accuracy_max\n";
  for (Variant v : config.variants) {
    for (const std::string metric : {"dp", "eop", "eod"}) {
      std::vector<ParetoInput> points;
      std::vector<double> eps_of, acc_min, acc_max;
      for (double eps : config.eps_grid) {
        std::vector<double> accs, unf;
        for (const CellResult& cell : outcome.cells) {
          if (cell.ok && cell.spec.variant == v && cell.spec.eps == eps) {
            accs.push_back(cell.report.accuracy);
            unf.push_back(MetricOf(cell.report, metric));
          }
        }
        if (accs.empty()) continue;
        points.push_back({Median(accs), Median(unf)});
        eps_of.push_back(eps);
        acc_min.push_back(*std::min_element(accs.begin(), accs.end()));
        acc_max.push_back(*std::max_element(accs.begin(), accs.end()));
      }
      for (std::size_t i : ParetoFront(points)) {
        pareto << VariantName(v) << "," << metric << "," << FormatExact(eps_of[i]) << ","
               << FormatExact(points[i].accuracy) << "," << FormatExact(points[i].unfairness) << ","
               << FormatExact(acc_min[i]) << "," << FormatExact(acc_max[i]) << "\n";
      }
    }
  }
  WriteTextFile((out / "results.csv").string(), results.str());
  WriteTextFile((out / "reports.csv").string(), reports.str());
  WriteTextFile((out / "pareto.csv").string(), pareto.str());
  WriteTextFile((out / "manifest.conf").string(), manifest.str());
  return outcome;
}

std::string WriteTable(const std::string& run_dir) {
  std::string header;
  const auto rows = ReadCsvRecords((fs::path(run_dir) / "results.csv").string(), &header);
  if (header != "variant,constraint,eps_fair,seed,H,uncertainty_source,accuracy,dp,eop,eod") {
    Fail(ErrorCode::kFormat, "results.csv has an unexpected header");
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::array<double, 4>>> groups;
  for (const auto& r : rows) {
    if (r.size() != 10) Fail(ErrorCode::kFormat, "results.csv row has the wrong width");
    const std::string key = r[0] + "," + r[1] + "," + r[2];
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back({ToDouble("accuracy", r[6]), ToDouble("dp", r[7]), ToDouble("eop", r[8]),
                           ToDouble("eod", r[9])});
  }
  std::ostringstream out;
  out << "variant,constraint,eps_fair,n,accuracy_mean,accuracy_std,dp_mean,dp_std,eop_mean,eop_std,eod_mean,"
         "eod_std\n";
  for (const auto& key : order) {
    const auto& g = groups[key];
    out << key << "," << g.size();
    for (std::size_t m = 0; m < 4; ++m) {
      double mean = 0.0;
      for (const auto& v : g) mean += v[m];
      mean /= static_cast<double>(g.size());
      double var = 0.0;
      for (const auto& v : g) var += (v[m] - mean) * (v[m] - mean);
      const double sd = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1)) : 0.0;
      out << "," << FormatFixed(mean, 4) << "," << FormatFixed(sd, 4);
    }
    out << "\n";
  }
  WriteTextFile((fs::path(run_dir) / "table.csv").string(), out.str());
  return out.str();
}

std::vector<ThresholdStudyRow> RunThresholdStudy(const AttributeRun& run,
                                                 const ThresholdStudyOptions& options,
                                                 const std::string& out_dir) {
  if (options.grid.empty() || options.seeds < 1) Fail(ErrorCode::kConfig, "threshold study needs a grid and seeds");
  const std::vector<ProxyRecord> proxies = SourceProxies(run, options.source);
  std::vector<ThresholdStudyRow> rows(options.grid.size() * options.seeds);
  ParallelFor(rows.size(), [&](std::size_t i) {
    ThresholdStudyRow& row = rows[i];
    row.h = options.grid[i / options.seeds];
    row.seed_index = i % options.seeds;
    row.seed = SeedFor(run.config.attr.seed, row.seed_index);
    try {
      const auto [train_pos, eval_pos] = TrainEvalSplit(run.d1.size(), options.train_fraction, row.seed);
      const Dataset train = run.d1.Subset(train_pos);
      const Dataset eval = run.d1.Subset(eval_pos);
      const Dataset sel = SelectUncertain(proxies, train, row.h);
      row.rows = sel.size();
      row.report = Evaluate(Single(FitUnconstrained(sel.features, *sel.labels, options.base)), eval);
      row.ok = true;
    } catch (const Error&) {
      row.ok = false;
    }
  });

  fs::create_directories(out_dir);
  std::ostringstream detail, summary;
  detail << "H,seed,rows,status,accuracy,dp,eop,eod\n";
  summary << "H,runs,accuracy_median,dp_median,eop_median,eod_median\n";
  for (const auto& row : rows) {
    detail << FormatExact(row.h) << "," << row.seed << "," << row.rows << "," << (row.ok ? "ok" : "failed") << ","
           << FormatExact(row.report.accuracy) << "," << FormatExact(row.report.dp_diff) << ","
           << FormatExact(row.report.eop_diff) << "," << FormatExact(row.report.eod_diff) << "\n";
  }
  for (double h : options.grid) {
    std::vector<double> acc, dp, eop, eod;
    for (const auto& row : rows) {
      if (row.h != h || !row.ok) continue;
      acc.push_back(row.report.accuracy);
      dp.push_back(row.report.dp_diff);
      eop.push_back(row.report.eop_diff);
      eod.push_back(row.report.eod_diff);
    }
    if (acc.empty()) continue;
    summary << FormatExact(h) << "," << acc.size() << "," << FormatExact(Median(acc)) << ","
            << FormatExact(Median(dp)) << "," << FormatExact(Median(eop)) << "," << FormatExact(Median(eod)) << "\n";
  }
  WriteTextFile((fs::path(out_dir) / "fig2.csv").string(), detail.str());
  WriteTextFile((fs::path(out_dir) / "fig2_summary.csv").string(), summary.str());
  return rows;
}

}  // namespace fairscarce
