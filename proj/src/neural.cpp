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

#include "fairscarce/neural.hpp"

#include <cmath>
#include <sstream>

#include "fairscarce/error.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/text_util.hpp"

namespace fairscarce {

MlpParams MlpParams::Create(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                            double dropout_rate, std::uint64_t seed) {
  if (input_dim == 0) Fail(ErrorCode::kInvalidArgument, "input_dim must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "dropout rate must lie in [0, 1)");
  }
  MlpParams params;
  params.dropout_rate = dropout_rate;
  Rng rng(seed);
  std::vector<std::size_t> dims = {input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    if (dims[k + 1] == 0) Fail(ErrorCode::kInvalidArgument, "empty hidden layer");
    const auto fan_in = static_cast<Eigen::Index>(dims[k]);
    const auto fan_out = static_cast<Eigen::Index>(dims[k + 1]);
    // Uniform in +-1/sqrt(fan_in).
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weight.resize(fan_in, fan_out);
    layer.bias.resize(fan_out);
    for (Eigen::Index c = 0; c < fan_out; ++c) {
      for (Eigen::Index r = 0; r < fan_in; ++r) layer.weight(r, c) = rng.Uniform(-bound, bound);
    }
    for (Eigen::Index c = 0; c < fan_out; ++c) layer.bias(c) = rng.Uniform(-bound, bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows());
}

bool MlpParams::SameShape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].weight.rows() != other.layers[k].weight.rows() ||
        layers[k].weight.cols() != other.layers[k].weight.cols() ||
        layers[k].bias.size() != other.layers[k].bias.size()) {
      return false;
    }
  }
  return true;
}

void MlpParams::Validate() const {
  if (layers.empty()) Fail(ErrorCode::kShapeMismatch, "network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.size() != l.weight.cols()) Fail(ErrorCode::kShapeMismatch, "bias width");
    if (k + 1 < layers.size() && l.weight.cols() != layers[k + 1].weight.rows()) {
      Fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(k) + " does not chain");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      Fail(ErrorCode::kFormat, "non-finite parameter in layer " + std::to_string(k));
    }
  }
  if (layers.back().weight.cols() != 1) Fail(ErrorCode::kShapeMismatch, "output must be one logit");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    Fail(ErrorCode::kFormat, "dropout rate outside [0, 1)");
  }
}

std::uint64_t DropoutPlan::NextStreamSeed() { return DeriveSeed(seed_, calls_++); }

ForwardResult Forward(const MlpParams& params, const Eigen::MatrixXd& x, DropoutPlan& plan) {
  if (params.layers.empty() ||
      x.cols() != params.layers.front().weight.rows()) {
    Fail(ErrorCode::kShapeMismatch, "input has " + std::to_string(x.cols()) +
                                        " columns, network expects " +
                                        std::to_string(params.input_dim()));
  }
  const bool drop = plan.stochastic() && params.dropout_rate > 0.0;
  Rng rng(plan.stochastic() ? plan.NextStreamSeed() : 0);
  const double keep = 1.0 - params.dropout_rate;

  ForwardResult result;
  auto& cache = result.cache;
  Eigen::MatrixXd h = x;
  const std::size_t hidden = params.layers.size() - 1;
  for (std::size_t k = 0; k < hidden; ++k) {
    const auto& layer = params.layers[k];
    Eigen::MatrixXd z = h * layer.weight;
    z.rowwise() += layer.bias.transpose();
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    cache.inputs.push_back(std::move(h));
    if (drop) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        for (Eigen::Index r = 0; r < mask.rows(); ++r) {
          mask(r, c) = rng.Uniform() < keep ? 1.0 / keep : 0.0;
        }
      }
      a = a.cwiseProduct(mask);
      cache.masks.push_back(std::move(mask));
    }
    cache.pre_activations.push_back(std::move(z));
    h = std::move(a);
  }
  const auto& out = params.layers.back();
  result.logits = h * out.weight.col(0);
  result.logits.array() += out.bias(0);
  cache.inputs.push_back(std::move(h));
  return result;
}

Eigen::VectorXd ForwardLogits(const MlpParams& params, const Eigen::MatrixXd& x,
                              DropoutPlan& plan) {
  return Forward(params, x, plan).logits;
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double LogisticLoss(double z, int target) {
  return std::max(z, 0.0) - z * static_cast<double>(target) + std::log1p(std::exp(-std::abs(z)));
}

void CheckTargets(const Eigen::VectorXd& logits, const BatchTargets& t) {
  const auto n = static_cast<std::size_t>(logits.size());
  if (t.labels.size() != n) Fail(ErrorCode::kShapeMismatch, "labels do not match rows");
  if (!t.consistency_mask.empty() && t.consistency_mask.size() != n) {
    Fail(ErrorCode::kShapeMismatch, "consistency mask does not match rows");
  }
  if (!t.consistency_mask.empty() && t.teacher_logits.size() != logits.size()) {
    Fail(ErrorCode::kShapeMismatch, "teacher logits do not match rows");
  }
}

std::size_t CountLabeled(const std::vector<int>& labels) {
  std::size_t n = 0;
  for (const int y : labels) n += y >= 0 ? 1 : 0;
  return n;
}

}  // namespace

double BinaryCrossEntropy(const Eigen::VectorXd& logits, const std::vector<int>& targets) {
  if (static_cast<std::size_t>(logits.size()) != targets.size()) {
    Fail(ErrorCode::kShapeMismatch, "logits and targets differ in length");
  }
  if (targets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0 && targets[i] != 1) {
      Fail(ErrorCode::kInvalidArgument, "cross-entropy target must be 0 or 1");
    }
    sum += LogisticLoss(logits(static_cast<Eigen::Index>(i)), targets[i]);
  }
  return sum / static_cast<double>(targets.size());
}

double ConsistencyLoss(const Eigen::VectorXd& student_logits,
                       const Eigen::VectorXd& teacher_logits, const std::vector<char>& mask,
                       double universe_size, ConsistencySpace space) {
  if (student_logits.size() != teacher_logits.size() ||
      static_cast<std::size_t>(student_logits.size()) != mask.size()) {
    Fail(ErrorCode::kShapeMismatch, "consistency inputs differ in length");
  }
  if (universe_size <= 0.0) universe_size = static_cast<double>(mask.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double zs = student_logits(static_cast<Eigen::Index>(i));
    const double zt = teacher_logits(static_cast<Eigen::Index>(i));
    const double d = space == ConsistencySpace::kLogit ? zs - zt : Sigmoid(zs) - Sigmoid(zt);
    sum += d * d;
  }
  return mask.empty() ? 0.0 : sum / universe_size;
}

double EvaluateLoss(const Eigen::VectorXd& logits, const BatchTargets& t, const LossSpec& spec) {
  CheckTargets(logits, t);
  double loss = 0.0;
  if (spec.ce_scale != 0.0) {
    std::vector<int> labeled;
    Eigen::VectorXd labeled_logits(static_cast<Eigen::Index>(CountLabeled(t.labels)));
    Eigen::Index j = 0;
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
      if (t.labels[i] < 0) continue;
      labeled.push_back(t.labels[i]);
      labeled_logits(j++) = logits(static_cast<Eigen::Index>(i));
    }
    loss += spec.ce_scale * BinaryCrossEntropy(labeled_logits, labeled);
  }
  if (spec.consistency_scale != 0.0 && !t.consistency_mask.empty()) {
    loss += spec.consistency_scale *
            ConsistencyLoss(logits, t.teacher_logits, t.consistency_mask, t.universe_size,
                            t.consistency_space);
  }
  return loss;
}

double EvaluateLoss(const MlpParams& params, const Eigen::MatrixXd& x, const BatchTargets& t,
                    const LossSpec& spec, DropoutPlan plan) {
  return EvaluateLoss(ForwardLogits(params, x, plan), t, spec);
}

GradResult ComputeGradient(const MlpParams& params, const Eigen::MatrixXd& x,
                           const BatchTargets& t, const LossSpec& spec, DropoutPlan& plan) {
  auto fwd = Forward(params, x, plan);
  const Eigen::VectorXd& z = fwd.logits;
  CheckTargets(z, t);
  const Eigen::Index n = z.size();

  Eigen::VectorXd dz = Eigen::VectorXd::Zero(n);
  const std::size_t n_labeled = CountLabeled(t.labels);
  if (spec.ce_scale != 0.0 && n_labeled > 0) {
    const double scale = spec.ce_scale / static_cast<double>(n_labeled);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = t.labels[static_cast<std::size_t>(i)];
      if (y < 0) continue;
      if (y > 1) Fail(ErrorCode::kInvalidArgument, "cross-entropy target must be 0 or 1");
      dz(i) += scale * (Sigmoid(z(i)) - static_cast<double>(y));
    }
  }
  if (spec.consistency_scale != 0.0 && !t.consistency_mask.empty()) {
    const double universe =
        t.universe_size > 0.0 ? t.universe_size : static_cast<double>(n);
    const double scale = 2.0 * spec.consistency_scale / universe;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!t.consistency_mask[static_cast<std::size_t>(i)]) continue;
      if (t.consistency_space == ConsistencySpace::kLogit) {
        dz(i) += scale * (z(i) - t.teacher_logits(i));
      } else {
        const double ps = Sigmoid(z(i));
        dz(i) += scale * (ps - Sigmoid(t.teacher_logits(i))) * ps * (1.0 - ps);
      }
    }
  }

  GradResult result;
  result.loss = EvaluateLoss(z, t, spec);
  result.grad.resize(params.layers.size());
  const auto& cache = fwd.cache;
  const std::size_t last = params.layers.size() - 1;

  result.grad[last].weight = cache.inputs[last].transpose() * dz;
  result.grad[last].bias = Eigen::VectorXd::Constant(1, dz.sum());
  Eigen::MatrixXd dh = dz * params.layers[last].weight.col(0).transpose();
  for (std::size_t k = last; k-- > 0;) {
    Eigen::MatrixXd dpre = dh;
    if (!cache.masks.empty()) dpre = dpre.cwiseProduct(cache.masks[k]);
    dpre = dpre.cwiseProduct(
        (cache.pre_activations[k].array() > 0.0).cast<double>().matrix());
    result.grad[k].weight = cache.inputs[k].transpose() * dpre;
    result.grad[k].bias = dpre.colwise().sum().transpose();
    if (k > 0) dh = dpre * params.layers[k].weight.transpose();
  }
  result.logits = std::move(fwd.logits);
  return result;
}

AdamState AdamState::ZerosLike(const MlpParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& l : params.layers) {
    DenseLayer zero{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                    Eigen::VectorXd::Zero(l.bias.size())};
    s.first_moment.push_back(zero);
    s.second_moment.push_back(zero);
  }
  return s;
}

bool AdamState::operator==(const AdamState& o) const {
  return first_moment == o.first_moment && second_moment == o.second_moment &&
         step == o.step && lr == o.lr && beta1 == o.beta1 && beta2 == o.beta2 &&
         epsilon == o.epsilon;
}

void AdamStep(AdamState& state, MlpParams& params, const Gradient& grad) {
  if (grad.size() != params.layers.size() || state.first_moment.size() != grad.size()) {
    Fail(ErrorCode::kShapeMismatch, "gradient does not mirror parameters");
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (grad[k].weight.rows() != params.layers[k].weight.rows() ||
        grad[k].weight.cols() != params.layers[k].weight.cols() ||
        grad[k].bias.size() != params.layers[k].bias.size()) {
      Fail(ErrorCode::kShapeMismatch, "gradient layer " + std::to_string(k));
    }
    if (!grad[k].weight.allFinite() || !grad[k].bias.allFinite()) {
      Fail(ErrorCode::kNonFiniteGradient, "layer " + std::to_string(k));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t k = 0; k < grad.size(); ++k) {
    update(params.layers[k].weight, state.first_moment[k].weight,
           state.second_moment[k].weight, grad[k].weight);
    update(params.layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias,
           grad[k].bias);
  }
}

// Layout:
//   fairscarce-mlp 1
//   dropout <p>
//   layers <L>
//   layer <fan_in> <fan_out>
//   <fan_in lines of fan_out weights, row-major>
//   <one line of fan_out biases>
std::string SerializeMlp(const MlpParams& params) {
  params.Validate();
  std::string out = "fairscarce-mlp 1\n";
  out += "dropout " + FormatExact(params.dropout_rate) + "\n";
  out += "layers " + std::to_string(params.layers.size()) + "\n";
  for (const auto& l : params.layers) {
    out += "layer " + std::to_string(l.weight.rows()) + " " + std::to_string(l.weight.cols()) + "\n";
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        if (c > 0) out += ' ';
        out += FormatExact(l.weight(r, c));
      }
      out += '\n';
    }
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) {
      if (c > 0) out += ' ';
      out += FormatExact(l.bias(c));
    }
    out += '\n';
  }
  return out;
}

namespace {

double ReadNumber(std::istringstream& in) {
  std::string token;
  if (!(in >> token)) Fail(ErrorCode::kFormat, "checkpoint truncated");
  const auto v = ParseDouble(token);
  if (!v) Fail(ErrorCode::kFormat, "bad number '" + token + "' in checkpoint");
  return *v;
}

}  // namespace

MlpParams ParseMlp(const std::string& text) {
  std::istringstream in(text);
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != "fairscarce-mlp") {
    Fail(ErrorCode::kFormat, "not a network checkpoint");
  }
  if (version != 1) Fail(ErrorCode::kFormat, "unsupported checkpoint version");
  MlpParams params;
  if (!(in >> key) || key != "dropout") Fail(ErrorCode::kFormat, "missing dropout line");
  params.dropout_rate = ReadNumber(in);
  std::size_t n_layers = 0;
  if (!(in >> key >> n_layers) || key != "layers") Fail(ErrorCode::kFormat, "missing layers line");
  for (std::size_t k = 0; k < n_layers; ++k) {
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> key >> rows >> cols) || key != "layer" || rows <= 0 || cols <= 0) {
      Fail(ErrorCode::kFormat, "bad layer header");
    }
    DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(cols)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = ReadNumber(in);
    }
    for (Eigen::Index c = 0; c < cols; ++c) l.bias(c) = ReadNumber(in);
    params.layers.push_back(std::move(l));
  }
  params.Validate();
  return params;
}

void SaveMlp(const MlpParams& params, const std::string& path) {
  WriteTextFile(path, SerializeMlp(params));
}

MlpParams LoadMlp(const std::string& path) { return ParseMlp(ReadTextFile(path)); }

}  // namespace fairscarce
