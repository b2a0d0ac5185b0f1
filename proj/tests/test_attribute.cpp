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
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "fairscarce/attribute_model.hpp"
#include "fairscarce/error.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/uncertainty.hpp"
#include "test_support.hpp"

namespace fairscarce {
namespace {

ScarceSplit SmallSplit(std::uint64_t seed, const testing::TempDir& dir, std::size_t n = 800) {
  testing::WriteSyntheticCsv(dir.file("s.csv"), dir.file("s.schema"), n, seed);
  const Schema schema = Schema::Load(dir.file("s.schema"));
  return PrepareScarceSplit(LoadCsv(dir.file("s.csv"), schema), schema, 0.3, seed, 0.0);
}

AttributeConfig QuickConfig(std::uint64_t seed) {
  AttributeConfig c;
  c.max_epochs = 4;
  c.patience = 4;
  c.mc_passes = 6;
  c.train_mc_passes = 3;
  c.ramp_length = 2.0;
  c.seed = seed;
  return c;
}

TEST(Entropy, BoundsAndEndpoints) {
  EXPECT_EQ(BinaryEntropy(0.0), 0.0);
  EXPECT_EQ(BinaryEntropy(1.0), 0.0);
  EXPECT_DOUBLE_EQ(BinaryEntropy(0.5), kLn2);
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.Uniform();
    const double u = BinaryEntropy(p);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, kLn2);
    if (p != 0.5) {
      EXPECT_LT(u, kLn2);
    }
    EXPECT_NEAR(u, -(p * std::log(p) + (1 - p) * std::log1p(-p)), 1e-12);
  }
}

TEST(Ramp, NonDecreasingAndClamped) {
  const RampSchedule s{0.8, 30.0};
  double prev = s.Floor();
  EXPECT_NEAR(prev, 0.8 * std::exp(-5.0), 1e-15);
  for (double t = 0.0; t <= 60.0; t += 0.25) {
    const double v = s.Value(t);
    EXPECT_GE(v, prev);
    prev = v;
    if (t >= 30.0) {
      EXPECT_EQ(v, 0.8);
    }
  }
}

TEST(Ema, StaysBetweenTeacherAndStudent) {
  MlpParams teacher = MlpParams::Create(4, {5, 3}, 0.3, 1);
  const MlpParams student = MlpParams::Create(4, {5, 3}, 0.3, 2);
  const MlpParams before = teacher;
  EmaUpdate(teacher, student, 0.99);
  for (std::size_t l = 0; l < teacher.layers.size(); ++l) {
    const auto& t = teacher.layers[l].weight;
    const auto& a = before.layers[l].weight;
    const auto& s = student.layers[l].weight;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      EXPECT_GE(t.data()[i], std::min(a.data()[i], s.data()[i]));
      EXPECT_LE(t.data()[i], std::max(a.data()[i], s.data()[i]));
      EXPECT_NEAR(t.data()[i], 0.99 * a.data()[i] + 0.01 * s.data()[i], 1e-15);
    }
  }
}

TEST(ConsistencyMask, GrowsWithThreshold) {
  Rng rng(7);
  std::vector<double> p(300);
  for (auto& v : p) v = rng.Uniform();
  std::vector<char> prev = ConsistencyMask(p, 0.0);
  for (double r = 0.02; r <= kLn2 + 1e-9; r += 0.02) {
    const auto mask = ConsistencyMask(p, r);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (prev[i]) {
        EXPECT_TRUE(mask[i]);
      }
    }
    prev = mask;
  }
  const auto full = ConsistencyMask(p, kLn2);
  EXPECT_EQ(std::count(full.begin(), full.end(), 1), 300);
}

TEST(Mc, ProxyRecordsFollowTheirProbabilities) {
  const MlpParams net = MlpParams::Create(3, {8}, 0.3, 4);
  Eigen::MatrixXd x(50, 3);
  Rng rng(2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * rng.Normal();
  const auto preds = McDropoutPredict(net, x, 10, 3);
  ASSERT_EQ(preds.size(), 50u);
  for (const auto& p : preds) {
    EXPECT_GE(p.p_group, 0.0);
    EXPECT_LE(p.p_group, 1.0);
    EXPECT_DOUBLE_EQ(p.u, BinaryEntropy(p.p_group));
  }
  const auto again = McDropoutPredict(net, x, 10, 3);
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(preds[i].p_group, again[i].p_group);
}

TEST(Plan, SlicesOfD2AreDisjoint) {
  AttributeConfig c;
  c.seed = 3;
  const AttributeDataPlan plan = PlanAttributeData(1000, c);
  std::set<std::size_t> seen;
  for (const auto* part : {&plan.train, &plan.validation, &plan.calibration}) {
    for (const auto i : *part) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NEAR(static_cast<double>(plan.calibration.size()), 100.0, 1.0);
  EXPECT_NEAR(static_cast<double>(plan.validation.size()), 100.0, 1.0);
}

TEST(Config, ValidateRejectsBadValues) {
  AttributeConfig c;
  c.dropout = 1.0;
  EXPECT_THROW(c.Validate(), Error);
  c = AttributeConfig{};
  c.ema_decay = 1.0;
  EXPECT_THROW(c.Validate(), Error);
  c = AttributeConfig{};
  c.mc_passes = 0;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(Training, ProxiesAreDeterministicAndWellFormed) {
  testing::TempDir dir("attr_train");
  const ScarceSplit split = SmallSplit(11, dir);
  AttributeConfig config = QuickConfig(5);
  config.max_epochs = 30;
  config.patience = 30;
  config.learning_rate = 0.01;
  const auto a = TrainAttributeClassifier(split, config);
  const auto b = TrainAttributeClassifier(split, config);
  EXPECT_TRUE(a.state.student == b.state.student);
  EXPECT_TRUE(a.state.teacher == b.state.teacher);
  EXPECT_TRUE(a.state.student.SameShape(a.state.teacher));

  const auto pa = PredictProxy(a.state, split.d1, config.mc_passes, 9);
  const auto pb = PredictProxy(b.state, split.d1, config.mc_passes, 9);
  ASSERT_EQ(pa.size(), split.d1.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].sample_id, pb[i].sample_id);
    EXPECT_EQ(pa[i].p_group, pb[i].p_group);
    EXPECT_EQ(pa[i].a_hat, pa[i].p_group >= 0.5 ? 1 : 0);
    EXPECT_GE(pa[i].u, 0.0);
    EXPECT_LE(pa[i].u, kLn2);
    EXPECT_DOUBLE_EQ(pa[i].u, BinaryEntropy(pa[i].p_group));
    if (i > 0) {
      EXPECT_LT(pa[i - 1].sample_id, pa[i].sample_id);
    }
  }

  // The planted job column reveals the group for half the rows.
  const auto& truth = EvaluationAccess::TrueSensitive(split.d1);
  std::map<std::uint64_t, int> group_of;
  for (std::size_t i = 0; i < split.d1.size(); ++i) group_of[split.d1.sample_ids[i]] = truth[i];
  std::size_t correct = 0;
  for (const auto& r : pa) correct += r.a_hat == group_of.at(r.sample_id);
  EXPECT_GT(static_cast<double>(correct) / pa.size(), 0.65);
  EXPECT_FALSE(a.log.empty());
}

TEST(Training, TeacherIsNotTheOptimizerTarget) {
  testing::TempDir dir("attr_teacher");
  const ScarceSplit split = SmallSplit(12, dir, 400);
  AttributeConfig config = QuickConfig(6);
  config.ema_decay = 0.0;  // the teacher copies the student after every step
  config.max_epochs = 1;
  const auto r = TrainAttributeClassifier(split, config);
  EXPECT_TRUE(r.state.teacher == r.state.student);
}

TEST(Checkpoint, StudentTeacherRoundTrip) {
  testing::TempDir dir("attr_ckpt");
  StudentTeacherState s;
  s.student = MlpParams::Create(4, {3}, 0.3, 1);
  s.teacher = MlpParams::Create(4, {3}, 0.3, 2);
  s.adam = AdamState::ZerosLike(s.student);
  s.adam.step = 17;
  s.adam.first_moment[0].weight(0, 0) = 0.1;
  s.epoch = 9;
  s.lambda_schedule = {1.0, 30.0};
  s.r_schedule = {kLn2, 12.5};
  SaveAttributeCheckpoint(s, dir.file("c.txt"));
  const auto back = LoadAttributeCheckpoint(dir.file("c.txt"));
  EXPECT_TRUE(back.student == s.student);
  EXPECT_TRUE(back.teacher == s.teacher);
  EXPECT_TRUE(back.adam == s.adam);
  EXPECT_EQ(back.epoch, 9);
  EXPECT_EQ(back.ema_decay, s.ema_decay);
  EXPECT_EQ(back.r_schedule.max_value, kLn2);
  EXPECT_EQ(back.r_schedule.ramp_length, 12.5);
  SaveAttributeCheckpoint(back, dir.file("c2.txt"));
  EXPECT_EQ(testing::Slurp(dir.file("c.txt")), testing::Slurp(dir.file("c2.txt")));
}

TEST(ProxyFile, RoundTrip) {
  testing::TempDir dir("proxy_file");
  std::vector<ProxyRecord> recs = {{3, 1, 0.75, BinaryEntropy(0.75)}, {8, 0, 0.1, BinaryEntropy(0.1)},
                                   {9, 1, 0.5, kLn2}};
  WriteProxies(recs, dir.file("p.csv"));
  EXPECT_EQ(testing::Slurp(dir.file("p.csv")).substr(0, 22), "sample_id,a_hat,p_grou");
  const auto back = ReadProxies(dir.file("p.csv"));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].sample_id, recs[i].sample_id);
    EXPECT_EQ(back[i].a_hat, recs[i].a_hat);
    EXPECT_EQ(back[i].p_group, recs[i].p_group);
    EXPECT_EQ(back[i].u, recs[i].u);
  }
}

}  // namespace
}  // namespace fairscarce
