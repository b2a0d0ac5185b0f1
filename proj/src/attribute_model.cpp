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

#include "fairscarce/attribute_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairscarce/error.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/text_util.hpp"

namespace fairscarce {

double RampSchedule::Value(double epoch) const { return GaussianRampup(epoch, *this); }

double GaussianRampup(double epoch, const RampSchedule& schedule) {
  if (epoch < 0.0) Fail(ErrorCode::kInvalidArgument, "ramp epoch must be non-negative");
  if (schedule.ramp_length <= 0.0) return schedule.max_value;
  const double phase = 1.0 - std::min(epoch / schedule.ramp_length, 1.0);
  return schedule.max_value * std::exp(-5.0 * phase * phase);
}

void EmaUpdate(MlpParams& teacher, const MlpParams& student, double decay) {
  if (!teacher.SameShape(student)) Fail(ErrorCode::kShapeMismatch, "teacher and student differ");
  if (!(decay >= 0.0 && decay < 1.0)) Fail(ErrorCode::kInvalidArgument, "EMA decay outside [0, 1)");
  for (std::size_t k = 0; k < teacher.layers.size(); ++k) {
    auto& t = teacher.layers[k];
    const auto& s = student.layers[k];
    t.weight = decay * t.weight + (1.0 - decay) * s.weight;
    t.bias = decay * t.bias + (1.0 - decay) * s.bias;
  }
}

void EmaUpdate(StudentTeacherState& state) {
  EmaUpdate(state.teacher, state.student, state.ema_decay);
}

namespace {

constexpr Eigen::Index kChunkRows = 2048;

Eigen::MatrixXd GatherRows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::VectorXd McMeanProbability(const MlpParams& net, const Eigen::MatrixXd& x, int passes,
                                  DropoutPlan& plan) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.rows());
  for (int t = 0; t < passes; ++t) {
    const Eigen::VectorXd z = ForwardLogits(net, x, plan);
    mean += z.unaryExpr([](double v) { return Sigmoid(v); });
  }
  return mean / static_cast<double>(passes);
}

double Accuracy(const Eigen::VectorXd& probs, const std::vector<int>& truth) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += (probs(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0) == truth[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace

std::vector<McPrediction> McDropoutPredict(const MlpParams& teacher, const Eigen::MatrixXd& x,
                                           int passes, std::uint64_t seed) {
  if (passes < 1) Fail(ErrorCode::kInvalidArgument, "need at least one MC pass");
  std::vector<McPrediction> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index start = 0, chunk = 0; start < x.rows(); start += kChunkRows, ++chunk) {
    const Eigen::Index len = std::min(kChunkRows, x.rows() - start);
    DropoutPlan plan(DropoutMode::kMonteCarlo, DeriveSeed(seed, static_cast<std::uint64_t>(chunk)));
    const Eigen::VectorXd p = McMeanProbability(teacher, x.middleRows(start, len), passes, plan);
    for (Eigen::Index i = 0; i < len; ++i) {
      auto& rec = out[static_cast<std::size_t>(start + i)];
      rec.p_group = p(i);
      rec.u = BinaryEntropy(p(i));
    }
  }
  return out;
}

void AttributeConfig::Validate() const {
  if (hidden.empty()) Fail(ErrorCode::kConfig, "attribute network needs a hidden layer");
  if (!(dropout >= 0.0 && dropout < 1.0)) Fail(ErrorCode::kConfig, "dropout outside [0, 1)");
  if (max_epochs < 1 || patience < 1 || batch_size == 0) {
    Fail(ErrorCode::kConfig, "epochs, patience and batch size must be positive");
  }
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) Fail(ErrorCode::kConfig, "ema decay outside [0, 1)");
  if (lambda_max < 0.0 || r_max < 0.0 || ramp_length < 0.0) {
    Fail(ErrorCode::kConfig, "schedules must be non-negative");
  }
  if (mc_passes < 1 || train_mc_passes < 1) Fail(ErrorCode::kConfig, "MC passes must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5) ||
      !(calibration_fraction >= 0.0 && calibration_fraction < 0.5)) {
    Fail(ErrorCode::kConfig, "validation/calibration fractions out of range");
  }
}

std::vector<char> ConsistencyMask(std::span<const double> teacher_probs, double r) {
  std::vector<char> mask(teacher_probs.size());
  for (std::size_t i = 0; i < teacher_probs.size(); ++i) mask[i] = BinaryEntropy(teacher_probs[i]) <= r;
  return mask;
}

AttributeDataPlan PlanAttributeData(std::size_t d2_size, const AttributeConfig& config) {
  AttributeDataPlan plan;
  auto [calibration, rest] = RandomSlice(d2_size, config.calibration_fraction,
                                         DeriveSeed(config.seed, 101));
  auto [validation_pos, train_pos] = RandomSlice(
      rest.size(), config.validation_fraction * static_cast<double>(d2_size) /
                       std::max<double>(1.0, static_cast<double>(rest.size())),
      DeriveSeed(config.seed, 102));
  plan.calibration = std::move(calibration);
  for (const auto p : validation_pos) plan.validation.push_back(rest[p]);
  for (const auto p : train_pos) plan.train.push_back(rest[p]);
  if (plan.train.empty() || plan.validation.empty()) {
    Fail(ErrorCode::kInsufficientRows, "D2 too small for train/validation slices");
  }
  return plan;
}

AttributeTrainingResult TrainAttributeClassifier(const ScarceSplit& split,
                                                 const AttributeConfig& config) {
  config.Validate();
  const Dataset& d2 = split.d2;
  const Dataset& d1 = split.d1;
  if (!d2.sensitive) Fail(ErrorCode::kInvalidArgument, "D2 must carry sensitive attributes");
  if (d1.size() > 0 && d1.dim() != d2.dim()) Fail(ErrorCode::kShapeMismatch, "D1/D2 widths differ");

  AttributeTrainingResult result;
  result.plan = PlanAttributeData(d2.size(), config);
  const auto& plan = result.plan;

  const Eigen::MatrixXd x_val = GatherRows(d2.features, plan.validation);
  std::vector<int> a_val;
  for (const auto r : plan.validation) a_val.push_back((*d2.sensitive)[r]);

  StudentTeacherState& st = result.state;
  st.student = MlpParams::Create(d2.dim(), config.hidden, config.dropout, DeriveSeed(config.seed, 1));
  st.teacher = st.student;
  st.adam = AdamState::ZerosLike(st.student, config.learning_rate);
  st.ema_decay = config.ema_decay;
  st.lambda_schedule = {config.lambda_max, config.ramp_length};
  st.r_schedule = {config.r_max, config.ramp_length};

  const bool semi_supervised = config.lambda_max > 0.0 && d1.size() > 0;
  Rng order_rng(DeriveSeed(config.seed, 2));
  Rng unlabeled_rng(DeriveSeed(config.seed, 5));
  DropoutPlan student_plan(DropoutMode::kTrain, DeriveSeed(config.seed, 3));
  DropoutPlan teacher_plan(DropoutMode::kMonteCarlo, DeriveSeed(config.seed, 4));

  std::vector<std::size_t> labeled = plan.train;
  std::vector<std::size_t> unlabeled(d1.size());
  std::iota(unlabeled.begin(), unlabeled.end(), 0);
  std::size_t unlabeled_pos = unlabeled.size();
  const double universe_total = static_cast<double>(d1.size() + d2.size());

  const std::size_t batch = config.batch_size;
  const std::size_t labeled_steps = (labeled.size() + batch - 1) / batch;
  std::size_t steps = labeled_steps;
  if (config.epoch_over_unlabeled && d1.size() > 0) {
    steps = std::max(steps, (unlabeled.size() + batch - 1) / batch);
  }
  std::size_t labeled_pos = labeled.size();

  double best_accuracy = -1.0;
  StudentTeacherState best_state = st;
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    double sup_sum = 0.0, cons_sum = 0.0, mask_sum = 0.0;
    std::size_t mask_rows = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = epoch + static_cast<double>(s) / static_cast<double>(steps);
      const double lambda = semi_supervised ? st.lambda_schedule.Value(t) : 0.0;
      const double r = st.r_schedule.Value(t);

      // Labeled rows cycle through reshuffled passes; a pass never straddles a batch.
      if (labeled_pos >= labeled.size()) {
        order_rng.Shuffle(labeled);
        labeled_pos = 0;
      }
      const std::size_t lab_end = std::min(labeled.size(), labeled_pos + batch);
      std::vector<std::size_t> lab_rows(labeled.begin() + static_cast<std::ptrdiff_t>(labeled_pos),
                                        labeled.begin() + static_cast<std::ptrdiff_t>(lab_end));
      labeled_pos = lab_end;
      std::vector<std::size_t> unl_rows;
      if (semi_supervised) {
        while (unl_rows.size() < batch && unl_rows.size() < unlabeled.size()) {
          if (unlabeled_pos == unlabeled.size()) {
            unlabeled_rng.Shuffle(unlabeled);
            unlabeled_pos = 0;
          }
          unl_rows.push_back(unlabeled[unlabeled_pos++]);
        }
      }
      const auto n_lab = static_cast<Eigen::Index>(lab_rows.size());
      const auto n_unl = static_cast<Eigen::Index>(unl_rows.size());
      Eigen::MatrixXd x(n_lab + n_unl, d2.features.cols());
      BatchTargets targets;
      for (Eigen::Index i = 0; i < n_lab; ++i) {
        x.row(i) = d2.features.row(static_cast<Eigen::Index>(lab_rows[static_cast<std::size_t>(i)]));
        targets.labels.push_back((*d2.sensitive)[lab_rows[static_cast<std::size_t>(i)]]);
      }
      for (Eigen::Index i = 0; i < n_unl; ++i) {
        x.row(n_lab + i) = d1.features.row(static_cast<Eigen::Index>(unl_rows[static_cast<std::size_t>(i)]));
        targets.labels.push_back(-1);
      }

      if (semi_supervised) {
        const Eigen::VectorXd p = McMeanProbability(st.teacher, x, config.train_mc_passes, teacher_plan);
        targets.consistency_mask =
            ConsistencyMask(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), r);
        for (const char keep : targets.consistency_mask) mask_sum += keep ? 1.0 : 0.0;
        mask_rows += static_cast<std::size_t>(x.rows());
        DropoutPlan eval = DropoutPlan::Eval();
        targets.teacher_logits = ForwardLogits(st.teacher, x, eval);
        targets.consistency_space = config.consistency_space;
        targets.universe_size = config.batch_universe ? static_cast<double>(x.rows()) : universe_total;
      }

      const auto g = ComputeGradient(st.student, x, targets, LossSpec::Combined(lambda), student_plan);
      if (!std::isfinite(g.loss)) {
        Fail(ErrorCode::kDivergedTraining, "non-finite loss at epoch " + std::to_string(epoch));
      }
      std::vector<int> lab_targets(targets.labels.begin(), targets.labels.begin() + n_lab);
      const double sup = BinaryCrossEntropy(g.logits.head(n_lab), lab_targets);
      sup_sum += sup;
      if (lambda > 0.0) cons_sum += (g.loss - sup) / lambda;

      AdamStep(st.adam, st.student, g.grad);
      EmaUpdate(st);
    }
    st.epoch = epoch + 1;

    DropoutPlan eval = DropoutPlan::Eval();
    const Eigen::VectorXd val_logits = ForwardLogits(st.teacher, x_val, eval);
    const double val_acc = Accuracy(val_logits.unaryExpr([](double v) { return Sigmoid(v); }), a_val);
    double mean_u = 0.0;
    for (const auto& rec : McDropoutPredict(st.teacher, x_val, config.train_mc_passes,
                                            DeriveSeed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)))) {
      mean_u += rec.u;
    }
    mean_u /= static_cast<double>(plan.validation.size());

    TrainingLogEntry entry;
    entry.epoch = epoch + 1;
    entry.supervised_loss = sup_sum / static_cast<double>(steps);
    entry.consistency_loss = cons_sum / static_cast<double>(steps);
    entry.lambda = semi_supervised ? st.lambda_schedule.Value(epoch + 1.0) : 0.0;
    entry.r_threshold = st.r_schedule.Value(epoch + 1.0);
    entry.mask_fraction = mask_rows > 0 ? mask_sum / static_cast<double>(mask_rows) : 0.0;
    entry.mean_uncertainty = mean_u;
    entry.validation_accuracy = val_acc;
    result.log.push_back(entry);

    if (val_acc > best_accuracy) {
      best_accuracy = val_acc;
      best_state = st;
      result.best_epoch = epoch + 1;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (config.restore_best) {
    st = std::move(best_state);
  } else {
    result.best_epoch = static_cast<int>(result.log.size());
  }
  return result;
}

std::vector<ProxyRecord> PredictProxy(const StudentTeacherState& state, const Dataset& rows,
                                      int passes, std::uint64_t seed, bool proxy_from_student) {
  const auto mc = McDropoutPredict(state.teacher, rows.features, passes, seed);
  Eigen::VectorXd student_logits;
  if (proxy_from_student) {
    DropoutPlan eval = DropoutPlan::Eval();
    student_logits = ForwardLogits(state.student, rows.features, eval);
  }
  std::vector<ProxyRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ProxyRecord rec;
    rec.sample_id = rows.sample_ids[i];
    rec.p_group = mc[i].p_group;
    rec.u = mc[i].u;
    const double p_label = proxy_from_student
                               ? Sigmoid(student_logits(static_cast<Eigen::Index>(i)))
                               : rec.p_group;
    rec.a_hat = p_label >= 0.5 ? 1 : 0;
    out.push_back(rec);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return out;
}

void WriteProxies(const std::vector<ProxyRecord>& proxies, const std::string& path) {
  std::string out = "sample_id,a_hat,p_group,u\n";
  for (const auto& p : proxies) {
    out += std::to_string(p.sample_id) + "," + std::to_string(p.a_hat) + "," +
           FormatExact(p.p_group) + "," + FormatExact(p.u) + "\n";
  }
  WriteTextFile(path, out);
}

std::vector<ProxyRecord> ReadProxies(const std::string& path) {
  const auto lines = SplitString(ReadTextFile(path), '\n');
  if (lines.empty() || Trim(lines[0]) != "sample_id,a_hat,p_group,u") {
    Fail(ErrorCode::kFormat, path + ": expected header sample_id,a_hat,p_group,u");
  }
  std::vector<ProxyRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const auto cells = SplitString(Trim(lines[i]), ',');
    if (cells.size() != 4) Fail(ErrorCode::kFormat, path + ": bad row " + std::to_string(i + 1));
    const auto id = ParseInt(cells[0]);
    const auto a = ParseInt(cells[1]);
    const auto p = ParseDouble(cells[2]);
    const auto u = ParseDouble(cells[3]);
    if (!id || !a || !p || !u || *id < 0 || (*a != 0 && *a != 1) || *p < 0.0 || *p > 1.0 ||
        *u < 0.0 || *u > kLn2 + 1e-12) {
      Fail(ErrorCode::kFormat, path + ": bad values on row " + std::to_string(i + 1));
    }
    out.push_back({static_cast<std::uint64_t>(*id), static_cast<int>(*a), *p, *u});
  }
  return out;
}

// Layout:
//   fairscarce-attribute 1
//   ema_decay <a>
//   epoch <n>
//   lambda <max> <ramp>
//   r <max> <ramp>
//   student <line count>
//   <network checkpoint>
//   teacher <line count>
//   <network checkpoint>
void SaveAttributeCheckpoint(const StudentTeacherState& state, const std::string& path) {
  auto section = [](const std::string& name, const std::string& body) {
    const auto lines = std::count(body.begin(), body.end(), '\n');
    return name + " " + std::to_string(lines) + "\n" + body;
  };
  std::string out = "fairscarce-attribute 2\n";
  out += "ema_decay " + FormatExact(state.ema_decay) + "\n";
  out += "epoch " + std::to_string(state.epoch) + "\n";
  out += "lambda " + FormatExact(state.lambda_schedule.max_value) + " " +
         FormatExact(state.lambda_schedule.ramp_length) + "\n";
  out += "r " + FormatExact(state.r_schedule.max_value) + " " +
         FormatExact(state.r_schedule.ramp_length) + "\n";
  out += section("student", SerializeMlp(state.student));
  out += section("teacher", SerializeMlp(state.teacher));
  const AdamState& adam = state.adam;
  out += "adam " + std::to_string(adam.step) + " " + FormatExact(adam.lr) + " " + FormatExact(adam.beta1) +
         " " + FormatExact(adam.beta2) + " " + FormatExact(adam.epsilon) + "\n";
  // Moments have the parameters' shapes, so they reuse the network format.
  auto moments = [](const Gradient& g) {
    MlpParams m;
    m.layers = g;
    return SerializeMlp(m);
  };
  const bool has_moments = !adam.first_moment.empty();
  out += section("first_moment", has_moments ? moments(adam.first_moment) : "");
  out += section("second_moment", has_moments ? moments(adam.second_moment) : "");
  WriteTextFile(path, out);
}

StudentTeacherState LoadAttributeCheckpoint(const std::string& path) {
  const auto lines = SplitString(ReadTextFile(path), '\n');
  std::size_t pos = 0;
  auto next = [&]() -> std::vector<std::string> {
    if (pos >= lines.size()) Fail(ErrorCode::kFormat, path + ": truncated checkpoint");
    return SplitString(Trim(lines[pos++]), ' ');
  };
  auto number = [&](const std::string& s) {
    const auto v = ParseDouble(s);
    if (!v) Fail(ErrorCode::kFormat, path + ": bad number '" + s + "'");
    return *v;
  };
  auto expect = [&](const std::string& key, std::size_t fields) {
    auto f = next();
    if (f.size() != fields + 1 || f[0] != key) Fail(ErrorCode::kFormat, path + ": expected " + key);
    return f;
  };
  if (Trim(lines.empty() ? "" : lines[0]) != "fairscarce-attribute 2") {
    Fail(ErrorCode::kFormat, path + ": not an attribute checkpoint (version 2)");
  }
  pos = 1;
  StudentTeacherState st;
  st.ema_decay = number(expect("ema_decay", 1)[1]);
  st.epoch = static_cast<int>(number(expect("epoch", 1)[1]));
  auto lam = expect("lambda", 2);
  st.lambda_schedule = {number(lam[1]), number(lam[2])};
  auto r = expect("r", 2);
  st.r_schedule = {number(r[1]), number(r[2])};
  auto read_section = [&](const std::string& key) {
    const auto count = static_cast<std::size_t>(number(expect(key, 1)[1]));
    std::string body;
    for (std::size_t i = 0; i < count; ++i) {
      if (pos >= lines.size()) Fail(ErrorCode::kFormat, path + ": truncated " + key);
      body += lines[pos++];
      body += '\n';
    }
    return body;
  };
  st.student = ParseMlp(read_section("student"));
  st.teacher = ParseMlp(read_section("teacher"));
  if (!st.student.SameShape(st.teacher)) Fail(ErrorCode::kFormat, path + ": teacher/student shapes differ");
  auto adam = expect("adam", 5);
  st.adam.step = static_cast<std::uint64_t>(number(adam[1]));
  st.adam.lr = number(adam[2]);
  st.adam.beta1 = number(adam[3]);
  st.adam.beta2 = number(adam[4]);
  st.adam.epsilon = number(adam[5]);
  const std::string first = read_section("first_moment");
  const std::string second = read_section("second_moment");
  if (!first.empty()) {
    st.adam.first_moment = ParseMlp(first).layers;
    st.adam.second_moment = ParseMlp(second).layers;
    MlpParams shape;
    shape.layers = st.adam.first_moment;
    if (!shape.SameShape(st.student)) Fail(ErrorCode::kFormat, path + ": optimizer moments do not fit the network");
  }
  return st;
}

void WriteTrainingLog(const std::vector<TrainingLogEntry>& log, const std::string& path) {
  std::string out =
      "epoch,supervised_loss,consistency_loss,lambda,r_threshold,mask_fraction,"
      "mean_uncertainty,validation_accuracy\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + FormatFixed(e.supervised_loss, 6) + "," +
           FormatFixed(e.consistency_loss, 6) + "," + FormatFixed(e.lambda, 6) + "," +
           FormatFixed(e.r_threshold, 6) + "," + FormatFixed(e.mask_fraction, 6) + "," +
           FormatFixed(e.mean_uncertainty, 6) + "," + FormatFixed(e.validation_accuracy, 6) + "\n";
  }
  WriteTextFile(path, out);
}

}  // namespace fairscarce
