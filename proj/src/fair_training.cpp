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

#include "fairscarce/fair_training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Sparse>

#include "fairscarce/error.hpp"
#include "fairscarce/linprog.hpp"
#include "fairscarce/text_util.hpp"
#include "fairscarce/uncertainty.hpp"

namespace fairscarce {

ConstraintKind ParseConstraintKind(std::string_view name) {
  if (name == "dp") return ConstraintKind::kDemographicParity;
  if (name == "eod") return ConstraintKind::kEqualizedOdds;
  if (name == "eop") return ConstraintKind::kEqualOpportunity;
  Fail(ErrorCode::kConfig, "unknown constraint '" + std::string(name) + "'");
}

std::string ConstraintKindName(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kDemographicParity: return "dp";
    case ConstraintKind::kEqualizedOdds: return "eod";
    case ConstraintKind::kEqualOpportunity: return "eop";
  }
  return "dp";
}

std::vector<int> MomentConstraint::Events() const {
  switch (kind) {
    case ConstraintKind::kDemographicParity: return {-1};
    case ConstraintKind::kEqualizedOdds: return {0, 1};
    case ConstraintKind::kEqualOpportunity: return {1};
  }
  return {-1};
}

Eigen::VectorXd LinearModel::Decision(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights.size()) Fail(ErrorCode::kShapeMismatch, "feature width differs from model");
  return (x * weights).array() + intercept;
}

Eigen::VectorXd StumpEnsemble::Decision(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim) {
    Fail(ErrorCode::kShapeMismatch, "feature width differs from model");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const Stump& s : stumps) {
    const auto col = x.col(static_cast<Eigen::Index>(s.feature));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i) += s.alpha * (col(i) <= s.threshold ? s.left : s.right);
    }
  }
  return out;
}

Eigen::VectorXd PredictHard(const BaseModel& model, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd d = std::visit([&](const auto& m) { return m.Decision(x); }, model);
  return (d.array() >= 0.0).cast<double>();
}

Eigen::VectorXd RandomizedClassifier::ExpectedPredictions(const Eigen::MatrixXd& x) const {
  Validate();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (std::size_t j = 0; j < members.size(); ++j) out += weights[j] * PredictHard(members[j], x);
  return out;
}

void RandomizedClassifier::Validate() const {
  if (members.empty() || members.size() != weights.size()) {
    Fail(ErrorCode::kInvalidArgument, "classifier needs one weight per member");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) Fail(ErrorCode::kInvalidArgument, "negative mixing weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) Fail(ErrorCode::kInvalidArgument, "mixing weights must sum to 1");
}

// ---- model file ----

std::string SerializeClassifier(const RandomizedClassifier& clf) {
  clf.Validate();
  std::ostringstream out;
  out << "fairscarce-classifier 1\n";
  out << "members " << clf.members.size() << "\n";
  for (std::size_t j = 0; j < clf.members.size(); ++j) {
    if (const auto* lin = std::get_if<LinearModel>(&clf.members[j])) {
      out << "member linear " << FormatExact(clf.weights[j]) << " " << lin->weights.size() << "\n";
      out << FormatExact(lin->intercept);
      for (Eigen::Index k = 0; k < lin->weights.size(); ++k) out << " " << FormatExact(lin->weights(k));
      out << "\n";
    } else {
      const auto& ens = std::get<StumpEnsemble>(clf.members[j]);
      out << "member stumps " << FormatExact(clf.weights[j]) << " " << ens.dim << " "
          << ens.stumps.size() << "\n";
      for (const Stump& s : ens.stumps) {
        out << s.feature << " " << FormatExact(s.threshold) << " " << s.left << " " << s.right
            << " " << FormatExact(s.alpha) << "\n";
      }
    }
  }
  return out.str();
}

namespace {

double ReadNumber(std::istringstream& in) {
  std::string token;
  if (!(in >> token)) Fail(ErrorCode::kFormat, "model file truncated");
  const auto v = ParseDouble(token);
  if (!v) Fail(ErrorCode::kFormat, "bad number '" + token + "' in model file");
  return *v;
}

}  // namespace

RandomizedClassifier ParseClassifier(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic, key, kind;
  int version = 0;
  if (!(in >> magic >> version) || magic != "fairscarce-classifier") {
    Fail(ErrorCode::kFormat, "not a classifier file");
  }
  if (version != 1) Fail(ErrorCode::kFormat, "unsupported classifier version");
  std::size_t n = 0;
  if (!(in >> key >> n) || key != "members" || n == 0) Fail(ErrorCode::kFormat, "bad members line");
  RandomizedClassifier clf;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(in >> key >> kind) || key != "member") Fail(ErrorCode::kFormat, "bad member header");
    clf.weights.push_back(ReadNumber(in));
    if (kind == "linear") {
      Eigen::Index dim = 0;
      if (!(in >> dim) || dim < 0) Fail(ErrorCode::kFormat, "bad member width");
      LinearModel m;
      m.intercept = ReadNumber(in);
      m.weights.resize(dim);
      for (Eigen::Index k = 0; k < dim; ++k) m.weights(k) = ReadNumber(in);
      clf.members.emplace_back(std::move(m));
    } else if (kind == "stumps") {
      StumpEnsemble e;
      std::size_t count = 0;
      if (!(in >> e.dim >> count)) Fail(ErrorCode::kFormat, "bad ensemble header");
      for (std::size_t s = 0; s < count; ++s) {
        Stump st;
        if (!(in >> st.feature)) Fail(ErrorCode::kFormat, "bad stump");
        st.threshold = ReadNumber(in);
        if (!(in >> st.left >> st.right)) Fail(ErrorCode::kFormat, "bad stump votes");
        st.alpha = ReadNumber(in);
        if (st.feature >= e.dim) Fail(ErrorCode::kFormat, "stump feature out of range");
        e.stumps.push_back(st);
      }
      clf.members.emplace_back(std::move(e));
    } else {
      Fail(ErrorCode::kFormat, "unknown member kind '" + kind + "'");
    }
  }
  try {
    clf.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kFormat, e.what());
  }
  return clf;
}

void SaveClassifier(const RandomizedClassifier& clf, const std::string& path) {
  WriteTextFile(path, SerializeClassifier(clf));
}

RandomizedClassifier LoadClassifier(const std::string& path) {
  return ParseClassifier(ReadTextFile(path));
}

// ---- samples ----

WeightedSample WeightedSamples::at(std::size_t i) const {
  WeightedSample s;
  s.sample_id = sample_ids.at(i);
  s.features = features.row(static_cast<Eigen::Index>(i));
  s.label = labels[i];
  s.a_hat = a_hat[i];
  s.weight = weights[i];
  return s;
}

void WeightedSamples::Validate() const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(features.rows()) != n || labels.size() != n || a_hat.size() != n ||
      weights.size() != n) {
    Fail(ErrorCode::kShapeMismatch, "sample columns disagree in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) Fail(ErrorCode::kInvalidArgument, "label must be 0/1");
    if (a_hat[i] < -1 || a_hat[i] > 1) Fail(ErrorCode::kInvalidArgument, "attribute must be -1/0/1");
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0)) {
      Fail(ErrorCode::kInvalidArgument, "fairness weight outside [0,1]");
    }
  }
}

WeightedSamples SamplesFromDataset(const Dataset& ds, std::span<const int> a_hat) {
  if (!ds.labels) Fail(ErrorCode::kInvalidArgument, "training rows need labels");
  if (a_hat.size() != ds.size()) Fail(ErrorCode::kShapeMismatch, "one attribute per row required");
  WeightedSamples out;
  out.features = ds.features;
  out.sample_ids = ds.sample_ids;
  out.labels = *ds.labels;
  out.a_hat.assign(a_hat.begin(), a_hat.end());
  out.weights.assign(ds.size(), 1.0);
  return out;
}

// ---- base learners ----

namespace {

void CheckCosts(std::span<const double> costs, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(costs.size()) != rows) {
    Fail(ErrorCode::kShapeMismatch, "one cost per row required");
  }
  if (rows == 0) Fail(ErrorCode::kInvalidArgument, "no rows to fit");
  for (double c : costs) {
    if (!std::isfinite(c)) Fail(ErrorCode::kNonFiniteCost, "cost is not finite");
  }
}

double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double Logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Design matrix in whichever storage is cheaper; one-hot data is mostly zeros.
struct Design {
  bool sparse = false;
  const Eigen::MatrixXd* dense = nullptr;
  Eigen::SparseMatrix<double> sp;

  explicit Design(const Eigen::MatrixXd& x) : dense(&x) {
    const double nnz = static_cast<double>((x.array() != 0.0).count());
    if (nnz < 0.3 * static_cast<double>(x.size())) {
      sparse = true;
      sp = x.sparseView();
    }
  }
  Eigen::VectorXd Times(const Eigen::VectorXd& w) const { return sparse ? Eigen::VectorXd(sp * w) : Eigen::VectorXd(*dense * w); }
  Eigen::VectorXd TransposeTimes(const Eigen::VectorXd& r) const {
    return sparse ? Eigen::VectorXd(sp.transpose() * r) : Eigen::VectorXd(dense->transpose() * r);
  }
  Eigen::MatrixXd Gram(const Eigen::VectorXd& d) const {
    if (sparse) {
      const Eigen::SparseMatrix<double> scaled = d.asDiagonal() * sp;
      return Eigen::MatrixXd(sp.transpose() * scaled);
    }
    return dense->transpose() * (dense->array().colwise() * d.array()).matrix();
  }
};

}  // namespace

LinearModel WeightedLogRegFit(const Eigen::MatrixXd& x, std::span<const double> costs,
                              const BaseLearnerOptions& options, const LinearModel* warm_start) {
  CheckCosts(costs, x.rows());
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::VectorXd s(n), t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i) = std::abs(costs[static_cast<std::size_t>(i)]);
    t(i) = costs[static_cast<std::size_t>(i)] < 0.0 ? 1.0 : 0.0;
  }
  const double total = s.sum();
  LinearModel model;
  model.weights = Eigen::VectorXd::Zero(d);
  if (total <= 0.0) return model;
  s /= total;

  if (warm_start && warm_start->weights.size() == d && warm_start->weights.allFinite() &&
      std::isfinite(warm_start->intercept)) {
    model = *warm_start;
  }
  const Design design(x);
  const double l2 = options.l2;

  auto objective = [&](const Eigen::VectorXd& w, double b) {
    const Eigen::VectorXd z = design.Times(w).array() + b;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s(i) > 0.0) f += s(i) * (Softplus(z(i)) - t(i) * z(i));
    }
    return f + 0.5 * l2 * w.squaredNorm();
  };

  double f = objective(model.weights, model.intercept);
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd z = design.Times(model.weights).array() + model.intercept;
    Eigen::VectorXd p(n), r(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = Logistic(z(i));
      r(i) = s(i) * (p(i) - t(i));
      curv(i) = s(i) * p(i) * (1.0 - p(i));
    }
    Eigen::VectorXd g(d + 1);
    g.head(d) = design.TransposeTimes(r) + l2 * model.weights;
    g(d) = r.sum();
    if (!g.allFinite()) Fail(ErrorCode::kNonFiniteCost, "logistic gradient is not finite");
    if (g.norm() < options.gradient_tolerance) break;

    Eigen::MatrixXd h(d + 1, d + 1);
    h.topLeftCorner(d, d) = design.Gram(curv);
    h.topLeftCorner(d, d).diagonal().array() += l2;
    const Eigen::VectorXd cross = design.TransposeTimes(curv);
    h.block(0, d, d, 1) = cross;
    h.block(d, 0, 1, d) = cross.transpose();
    h(d, d) = curv.sum() + 1e-12;
    Eigen::VectorXd step = h.ldlt().solve(g);
    if (!step.allFinite() || g.dot(step) <= 0.0) step = g;  // fall back to steepest descent

    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-12) {
      const Eigen::VectorXd w_new = model.weights - alpha * step.head(d);
      const double b_new = model.intercept - alpha * step(d);
      const double f_new = objective(w_new, b_new);
      if (f_new <= f - 1e-4 * alpha * g.dot(step)) {
        model.weights = w_new;
        model.intercept = b_new;
        f = f_new;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  return model;
}

StumpEnsemble WeightedStumpFit(const Eigen::MatrixXd& x, std::span<const double> costs,
                               const BaseLearnerOptions& options) {
  CheckCosts(costs, x.rows());
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  StumpEnsemble ens;
  ens.dim = static_cast<std::size_t>(d);
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<int> y(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    dist[k] = std::abs(costs[k]);
    y[k] = costs[k] < 0.0 ? 1 : -1;
    total += dist[k];
  }
  if (total <= 0.0 || d == 0) return ens;
  for (double& v : dist) v /= total;

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(d));
  for (Eigen::Index f = 0; f < d; ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
  }

  for (int round = 0; round < options.rounds; ++round) {
    double pos_total = 0.0, neg_total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      (y[static_cast<std::size_t>(i)] > 0 ? pos_total : neg_total) += dist[static_cast<std::size_t>(i)];
    }
    Stump best;
    double best_err = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < d; ++f) {
      const auto& o = order[static_cast<std::size_t>(f)];
      double left_pos = 0.0, left_neg = 0.0;
      // Split before position k: rows o[0..k-1] go left.
      for (std::size_t k = 0; k <= o.size(); ++k) {
        const bool boundary = k == 0 || k == o.size() || x(o[k], f) != x(o[k - 1], f);
        if (boundary) {
          const double err_up = left_pos + (neg_total - left_neg);    // left -1, right +1
          const double err_down = left_neg + (pos_total - left_pos);  // left +1, right -1
          const double err = std::min(err_up, err_down);
          if (err < best_err - 1e-15) {
            best_err = err;
            best.feature = static_cast<std::size_t>(f);
            if (k == 0) {
              best.threshold = x(o[0], f) - 1.0;
            } else if (k == o.size()) {
              best.threshold = x(o[k - 1], f);
            } else {
              best.threshold = 0.5 * (x(o[k - 1], f) + x(o[k], f));
            }
            best.left = err_up <= err_down ? -1 : 1;
            best.right = -best.left;
          }
        }
        if (k < o.size()) {
          const auto row = static_cast<std::size_t>(o[k]);
          (y[row] > 0 ? left_pos : left_neg) += dist[row];
        }
      }
    }
    const double err = std::clamp(best_err, 1e-10, 1.0 - 1e-10);
    if (err >= 0.5) {
      if (ens.stumps.empty()) {
        best.alpha = 1e-3;
        ens.stumps.push_back(best);
      }
      break;
    }
    best.alpha = 0.5 * std::log((1.0 - err) / err);
    ens.stumps.push_back(best);
    const auto col = x.col(static_cast<Eigen::Index>(best.feature));
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const int vote = col(i) <= best.threshold ? best.left : best.right;
      dist[k] *= std::exp(-best.alpha * y[k] * vote);
      z += dist[k];
    }
    for (double& v : dist) v /= z;
  }
  return ens;
}

BaseModel FitBase(const Eigen::MatrixXd& x, std::span<const double> costs,
                  const BaseLearnerOptions& options) {
  if (options.kind == BaseLearnerKind::kStumps) return WeightedStumpFit(x, costs, options);
  return WeightedLogRegFit(x, costs, options);
}

BaseModel FitUnconstrained(const Eigen::MatrixXd& x, std::span<const int> labels,
                           const BaseLearnerOptions& options) {
  std::vector<double> costs(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) costs[i] = labels[i] == 1 ? -1.0 : 1.0;
  return FitBase(x, costs, options);
}

// ---- reduction ----

void LagrangeState::Normalize() {
  const double m = std::max(0.0, theta.size() ? theta.maxCoeff() : 0.0);
  // Shift by m for overflow safety: B e^{th-m} / (e^{-m} + sum e^{th-m}).
  const Eigen::VectorXd e = (theta.array() - m).exp();
  lambda = bound * e / (std::exp(-m) + e.sum());
}

namespace {

// Per-row derivative of each constraint with respect to the prediction.
struct MomentTable {
  Eigen::MatrixXd derivative;  // K x n
  double slack = 0.0;
};

MomentTable BuildMoments(const WeightedSamples& rows, const MomentConstraint& c) {
  const std::size_t n = rows.size();
  const auto events = c.Events();
  MomentTable table;
  table.slack = c.slack;
  table.derivative = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(events.size() * 4),
                                           static_cast<Eigen::Index>(n));
  for (std::size_t m = 0; m < events.size(); ++m) {
    const int ev = events[m];
    double mass[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      if ((ev < 0 || rows.labels[i] == ev) && rows.a_hat[i] >= 0) mass[rows.a_hat[i]] += rows.weights[i];
    }
    if (mass[0] <= 0.0 || mass[1] <= 0.0) {
      Fail(ErrorCode::kDegenerateGroup, "a constrained group has no weight in the training rows");
    }
    const double all = mass[0] + mass[1];
    for (int g = 0; g < 2; ++g) {
      const auto k = static_cast<Eigen::Index>(m * 4 + static_cast<std::size_t>(g) * 2);
      for (std::size_t i = 0; i < n; ++i) {
        if (!((ev < 0 || rows.labels[i] == ev) && rows.a_hat[i] >= 0)) continue;
        const double v = rows.weights[i] * ((rows.a_hat[i] == g ? 1.0 / mass[g] : 0.0) - 1.0 / all);
        table.derivative(k, static_cast<Eigen::Index>(i)) = v;
        table.derivative(k + 1, static_cast<Eigen::Index>(i)) = -v;
      }
    }
  }
  return table;
}

struct Candidate {
  BaseModel model;
  Eigen::VectorXd preds;
  double error = 0.0;
  Eigen::VectorXd gamma;
};

}  // namespace

Eigen::VectorXd ConstraintValues(const WeightedSamples& rows, const MomentConstraint& c,
                                 const Eigen::VectorXd& h) {
  return BuildMoments(rows, c).derivative * h;
}

ExpGradResult ExpGradTrain(const WeightedSamples& rows, const ExpGradOptions& options) {
  rows.Validate();
  if (rows.size() == 0) Fail(ErrorCode::kEmptySelection, "no training rows");
  if (options.iterations < 1 || !(options.bound > 0.0) || !(options.eta > 0.0) ||
      !(options.constraint.slack >= 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "bad reduction settings");
  }
  const MomentTable moments = BuildMoments(rows, options.constraint);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index k = moments.derivative.rows();
  const double eps = moments.slack;
  const double bound = options.bound;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = rows.labels[static_cast<std::size_t>(i)];
  const Eigen::VectorXd base_cost = (1.0 - 2.0 * y.array()) / static_cast<double>(n);

  std::vector<Candidate> pool;
  LinearModel last_linear;
  bool have_linear = false;

  // Returns the pool index of the best response to lambda.
  auto best_response = [&](const Eigen::VectorXd& lambda) -> std::size_t {
    const Eigen::VectorXd cost = base_cost + moments.derivative.transpose() * lambda;
    const std::span<const double> cs(cost.data(), static_cast<std::size_t>(n));
    Candidate c;
    if (options.base.kind == BaseLearnerKind::kLogistic) {
      LinearModel m = WeightedLogRegFit(rows.features, cs, options.base, have_linear ? &last_linear : nullptr);
      last_linear = m;
      have_linear = true;
      c.model = std::move(m);
    } else {
      c.model = WeightedStumpFit(rows.features, cs, options.base);
    }
    c.preds = PredictHard(c.model, rows.features);
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (pool[j].preds == c.preds) return j;
    }
    c.error = (c.preds - y).cwiseAbs().mean();
    c.gamma = moments.derivative * c.preds;
    pool.push_back(std::move(c));
    return pool.size() - 1;
  };

  auto lagrangian = [&](double err, const Eigen::VectorXd& gamma, const Eigen::VectorXd& lambda) {
    return err + lambda.dot((gamma.array() - eps).matrix());
  };
  auto mixture_stats = [&](const Eigen::VectorXd& q, double& err, Eigen::VectorXd& gamma) {
    err = 0.0;
    gamma = Eigen::VectorXd::Zero(k);
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (q(static_cast<Eigen::Index>(j)) == 0.0) continue;
      err += q(static_cast<Eigen::Index>(j)) * pool[j].error;
      gamma += q(static_cast<Eigen::Index>(j)) * pool[j].gamma;
    }
  };
  auto gap_of = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& lambda) {
    double err;
    Eigen::VectorXd gamma;
    mixture_stats(q, err, gamma);
    const double l_q = lagrangian(err, gamma, lambda);
    double l_low = std::numeric_limits<double>::infinity();
    for (const Candidate& c : pool) l_low = std::min(l_low, lagrangian(c.error, c.gamma, lambda));
    const double l_high = err + std::max(0.0, bound * (gamma.array() - eps).maxCoeff());
    return std::max(l_q - l_low, l_high - l_q);
  };
  auto padded = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool.size()));
    out.head(q.size()) = q;
    return out;
  };

  LagrangeState state;
  state.theta = Eigen::VectorXd::Zero(k);
  state.bound = bound;
  state.eta = options.eta / bound;
  Eigen::VectorXd lambda_sum = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd q_sum;
  std::vector<double> eg_gaps;
  ExpGradResult result;
  Eigen::VectorXd best_q;
  double best_gap = std::numeric_limits<double>::infinity();
  int last_checked = 5;
  double last_gap = std::numeric_limits<double>::infinity();

  for (int t = 0; t < options.iterations; ++t) {
    state.iteration = t;
    state.Normalize();
    const std::size_t h_idx = best_response(state.lambda);
    state.violations.push_back(pool[h_idx].gamma.array() - eps);
    lambda_sum += state.lambda;
    const Eigen::VectorXd lambda_avg = lambda_sum / static_cast<double>(t + 1);
    q_sum = padded(q_sum.size() ? q_sum : Eigen::VectorXd());
    q_sum(static_cast<Eigen::Index>(h_idx)) += 1.0;
    // Adds the best response to the averaged multipliers to the pool.
    best_response(lambda_avg);
    q_sum = padded(q_sum);

    const Eigen::VectorXd q_eg = q_sum / static_cast<double>(t + 1);
    const double gap_eg = gap_of(q_eg, lambda_avg);
    eg_gaps.push_back(gap_eg);
    double gap = gap_eg;
    Eigen::VectorXd q = q_eg;
    if (t > 0) {
      Eigen::VectorXd errors(static_cast<Eigen::Index>(pool.size()));
      Eigen::MatrixXd gammas(k, static_cast<Eigen::Index>(pool.size()));
      for (std::size_t j = 0; j < pool.size(); ++j) {
        errors(static_cast<Eigen::Index>(j)) = pool[j].error;
        gammas.col(static_cast<Eigen::Index>(j)) = pool[j].gamma;
      }
      if (auto q_lp = SolveBestMixture(errors, gammas, eps, bound)) {
        const double gap_lp = gap_of(*q_lp, lambda_avg);
        if (gap_lp < gap) {
          gap = gap_lp;
          q = *q_lp;
        }
      }
    }
    result.gap_history.push_back(gap);
    result.iterations = t + 1;
    if (gap < best_gap) {
      best_gap = gap;
      best_q = q;
    }
    if (gap < options.gap_tolerance && t >= options.min_iterations) {
      result.converged = true;
      break;
    }
    if (t >= static_cast<int>(1.6 * last_checked)) {
      const double recent = *std::min_element(eg_gaps.begin(), eg_gaps.end());
      if (recent > 0.8 * last_gap) state.eta *= 0.8;
      last_checked = t;
      last_gap = recent;
    }
    state.theta += state.eta * state.violations.back();
  }

  best_q = padded(best_q);
  double err;
  Eigen::VectorXd gamma;
  mixture_stats(best_q, err, gamma);
  result.gap = best_gap;
  result.max_violation = (gamma.array() - eps).maxCoeff();
  double total = 0.0;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (best_q(static_cast<Eigen::Index>(j)) > 1e-12) total += best_q(static_cast<Eigen::Index>(j));
  }
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const double w = best_q(static_cast<Eigen::Index>(j));
    if (w <= 1e-12) continue;
    result.classifier.members.push_back(pool[j].model);
    result.classifier.weights.push_back(w / total);
  }
  return result;
}

// ---- selections ----

namespace {

std::vector<const ProxyRecord*> MatchProxies(std::span<const ProxyRecord> proxies, const Dataset& d1) {
  std::unordered_map<std::uint64_t, const ProxyRecord*> by_id;
  by_id.reserve(proxies.size());
  for (const ProxyRecord& p : proxies) by_id[p.sample_id] = &p;
  std::vector<const ProxyRecord*> out;
  out.reserve(d1.size());
  for (std::uint64_t id : d1.sample_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      Fail(ErrorCode::kInvalidArgument, "no proxy for sample " + std::to_string(id));
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

WeightedSamples FilterCertain(std::span<const ProxyRecord> proxies, const Dataset& d1, double h) {
  const auto matched = MatchProxies(proxies, d1);
  std::vector<std::size_t> keep;
  std::vector<int> attrs;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (matched[i]->u <= h) {
      keep.push_back(i);
      attrs.push_back(matched[i]->a_hat);
    }
  }
  if (keep.empty()) Fail(ErrorCode::kEmptySelection, "no row has uncertainty <= " + FormatExact(h));
  return SamplesFromDataset(d1.Subset(keep), attrs);
}

WeightedSamples WeightFromUncertainty(std::span<const ProxyRecord> proxies, const Dataset& d1,
                                      WeightFormula formula) {
  const auto matched = MatchProxies(proxies, d1);
  std::vector<int> attrs;
  for (const ProxyRecord* p : matched) attrs.push_back(p->a_hat);
  WeightedSamples out = SamplesFromDataset(d1, attrs);
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const double u = matched[i]->u;
    const double w = formula == WeightFormula::kNormalizedEntropy ? 1.0 - u / kLn2 : 1.0 - u;
    out.weights[i] = std::clamp(w, 0.0, 1.0);
  }
  return out;
}

Dataset SelectUncertain(std::span<const ProxyRecord> proxies, const Dataset& d1, double h) {
  const auto matched = MatchProxies(proxies, d1);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (matched[i]->u >= h) keep.push_back(i);
  }
  if (keep.empty()) Fail(ErrorCode::kEmptySelection, "no row has uncertainty >= " + FormatExact(h));
  return d1.Subset(keep);
}

std::vector<int> KnnImpute(const Dataset& d1, const Dataset& d2, std::size_t k) {
  if (!d2.sensitive) Fail(ErrorCode::kInvalidArgument, "reference rows need the sensitive attribute");
  if (k < 1 || k > d2.size()) Fail(ErrorCode::kInvalidArgument, "k must lie in [1, |d2|]");
  if (d1.dim() != d2.dim()) Fail(ErrorCode::kShapeMismatch, "feature widths differ");
  const auto& ref = *d2.sensitive;
  const Eigen::VectorXd ref_sq = d2.features.rowwise().squaredNorm();
  std::vector<int> out(d1.size(), 1);
  constexpr Eigen::Index kChunk = 512;
  std::vector<std::pair<double, std::size_t>> cand(d2.size());
  for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(d1.size()); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, static_cast<Eigen::Index>(d1.size()) - start);
    const auto block = d1.features.middleRows(start, len);
    Eigen::MatrixXd dist = -2.0 * block * d2.features.transpose();
    dist.colwise() += block.rowwise().squaredNorm();
    dist.rowwise() += ref_sq.transpose();
    for (Eigen::Index r = 0; r < len; ++r) {
      for (std::size_t j = 0; j < d2.size(); ++j) {
        cand[j] = {std::max(0.0, dist(r, static_cast<Eigen::Index>(j))), j};
      }
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
      std::size_t ones = 0;
      for (std::size_t j = 0; j < k; ++j) ones += ref[cand[j].second] == 1 ? 1 : 0;
      out[static_cast<std::size_t>(start + r)] = 2 * ones >= k ? 1 : 0;
    }
  }
  return out;
}

}  // namespace fairscarce
