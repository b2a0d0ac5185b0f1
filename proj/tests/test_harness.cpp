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
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

#include <gtest/gtest.h>

#include "fairscarce/error.hpp"
#include "fairscarce/harness.hpp"
#include "fairscarce/rng.hpp"
#include "fairscarce/text_util.hpp"
#include "test_support.hpp"

namespace fairscarce {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(SweepConfig, ParseSerializeRoundTrip) {
  const SweepConfig c = SweepConfig::Parse(
      "data = a.csv\nschema = a.schema\nseed = 4\nattr.max_epochs = 7\nout = /tmp/x\n"
      "variants = certain, weighted,proxy-knn\nconstraint = eod\neps = logspace:0.001:0.3:5\n"
      "H = 0.35\nuncertainty = conformal:0.05\nbase = stumps\nbase.rounds = 9\nseeds = 3\n");
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.attribute.attr.seed, 4u);
  EXPECT_EQ(c.attribute.attr.max_epochs, 7);
  EXPECT_EQ(c.variants.size(), 3u);
  EXPECT_EQ(c.constraint, ConstraintKind::kEqualizedOdds);
  ASSERT_EQ(c.eps_grid.size(), 5u);
  EXPECT_NEAR(c.eps_grid.front(), 0.001, 1e-15);
  EXPECT_NEAR(c.eps_grid.back(), 0.3, 1e-15);
  EXPECT_EQ(*c.h_fixed, 0.35);
  EXPECT_EQ(c.source.kind, UncertaintySource::Kind::kConformal);
  EXPECT_EQ(c.base.kind, BaseLearnerKind::kStumps);
  const SweepConfig again = SweepConfig::Parse(c.Serialize());
  EXPECT_EQ(again.Serialize(), c.Serialize());
  EXPECT_EQ(again.eps_grid, c.eps_grid);
}

TEST(SweepConfig, DefaultsAndRejections) {
  const SweepConfig c = SweepConfig::Parse("data = a\nschema = b\nout = o\n");
  EXPECT_EQ(c.seeds, 7u);
  EXPECT_EQ(c.eps_grid.size(), 12u);
  EXPECT_FALSE(c.h_fixed.has_value());
  EXPECT_EQ(c.AttributeDir(), "o/attr");
  for (const char* bad : {"bogus = 1\n", "seeds = 0\n", "variants = nope\n", "constraint = xx\n", "eps = \n",
                          "uncertainty = conformal:2\n", "h_range = 0.8:0.9:0.1\n", "H = abc\n"}) {
    EXPECT_EQ(CodeOf([&] { SweepConfig::Parse(std::string("data = a\nschema = b\nout = o\n") + bad).Validate(); }),
              ErrorCode::kConfig)
        << bad;
  }
  EXPECT_EQ(CodeOf([] { SweepConfig::Load("/nonexistent/sweep.conf"); }), ErrorCode::kConfig);
}

TEST(SweepConfig, ThresholdGridStaysInsideEntropyRange) {
  SweepConfig c = SweepConfig::Parse("data = a\nschema = b\nout = o\n");
  const auto grid = c.ThresholdGrid();
  ASSERT_FALSE(grid.empty());
  EXPECT_NEAR(grid.front(), 0.1, 1e-12);
  EXPECT_LE(grid.back(), kLn2);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  EXPECT_EQ(std::adjacent_find(grid.begin(), grid.end()), grid.end());
  EXPECT_NE(c.CellSeed(0), c.CellSeed(1));
}

TEST(LogSpace, EndpointsAndRatio) {
  const auto v = LogSpace(0.001, 0.3, 12);
  ASSERT_EQ(v.size(), 12u);
  EXPECT_NEAR(v.front(), 0.001, 1e-15);
  EXPECT_NEAR(v.back(), 0.3, 1e-14);
  for (std::size_t i = 2; i < v.size(); ++i) EXPECT_NEAR(v[i] / v[i - 1], v[1] / v[0], 1e-12);
}

TEST(Uncertainty, SourceNames) {
  EXPECT_EQ(UncertaintySource::Parse("mc-dropout").Name(), "mc-dropout");
  EXPECT_EQ(UncertaintySource::Parse("conformal:0.05").parameter, 0.05);
  EXPECT_EQ(UncertaintySource::Parse("confidence:0.8").kind, UncertaintySource::Kind::kConfidence);
  EXPECT_EQ(CodeOf([] { UncertaintySource::Parse("entropy"); }), ErrorCode::kConfig);
}

TEST(Variants, NamesRoundTrip) {
  for (const auto v : {Variant::kVanilla, Variant::kClean, Variant::kProxyDnn, Variant::kProxyKnn, Variant::kCertain,
                       Variant::kWeighted, Variant::kUncertain, Variant::kCertainUnconstrained}) {
    EXPECT_EQ(ParseVariant(VariantName(v)), v);
  }
  EXPECT_FALSE(VariantUsesConstraint(Variant::kVanilla));
  EXPECT_FALSE(VariantUsesConstraint(Variant::kUncertain));
  EXPECT_TRUE(VariantUsesConstraint(Variant::kWeighted));
}

std::vector<std::size_t> BruteForceFront(const std::vector<ParetoInput>& pts) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].accuracy >= pts[i].accuracy && pts[j].unfairness <= pts[i].unfairness &&
                  (pts[j].accuracy > pts[i].accuracy || pts[j].unfairness < pts[i].unfairness);
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].accuracy != pts[b].accuracy ? pts[a].accuracy < pts[b].accuracy : a < b;
  });
  return front;
}

TEST(Pareto, MatchesPairwiseDominance) {
  Rng rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ParetoInput> pts(rng.UniformIndex(51));
    for (auto& p : pts) {
      // Coarse values force ties in one or both coordinates.
      p.accuracy = static_cast<double>(rng.UniformIndex(8)) / 8.0;
      p.unfairness = static_cast<double>(rng.UniformIndex(8)) / 8.0;
    }
    EXPECT_EQ(ParetoFront(pts), BruteForceFront(pts));
  }
}

TEST(Median, PermutationInvariantAndEvenCount) {
  EXPECT_EQ(Median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(Median({4.0, 1.0, 3.0, 2.0}), 2.5);
  Rng rng(1);
  std::vector<double> v(9);
  for (auto& x : v) x = rng.Normal();
  const double m = Median(v);
  for (int k = 0; k < 20; ++k) {
    rng.Shuffle(v);
    EXPECT_EQ(Median(v), m);
  }
  EXPECT_THROW(Median({}), Error);
}

TEST(Workers, EnvironmentOverride) {
  ::setenv("FAIRSCARCE_WORKERS", "3", 1);
  EXPECT_EQ(WorkerCount(), 3u);
  ::setenv("FAIRSCARCE_WORKERS", "junk", 1);
  EXPECT_GE(WorkerCount(), 1u);
  ::unsetenv("FAIRSCARCE_WORKERS");
  EXPECT_GE(WorkerCount(), 1u);
}

// One synthetic attribute run shared by the end-to-end tests below.
class HarnessRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("harness");
    testing::WriteSyntheticCsv(dir_->file("s.csv"), dir_->file("s.schema"), 3000, 31);
    config_ = new AttributeRunConfig;
    config_->data = dir_->file("s.csv");
    config_->schema = dir_->file("s.schema");
    config_->ratio = 0.2;
    config_->attr.seed = 2;
    config_->attr.max_epochs = 25;
    config_->attr.patience = 25;
    config_->attr.learning_rate = 0.005;
    config_->attr.ramp_length = 10;
    config_->attr.mc_passes = 10;
    CreateAttributeRun(*config_, dir_->file("attr"));
  }
  static void TearDownTestSuite() {
    delete config_;
    delete dir_;
  }

  static std::string SweepText(const std::string& out) {
    return "attr_run = " + dir_->file("attr") + "\nout = " + out +
           "\nseed = 2\nseeds = 2\nvariants = vanilla,clean,proxy-dnn,proxy-knn,certain,weighted,uncertain\n"
           "eps = 0.02,0.2\nh_range = 0.1:0.5:0.2\niterations = 8\n";
  }

  static testing::TempDir* dir_;
  static AttributeRunConfig* config_;
};

testing::TempDir* HarnessRun::dir_ = nullptr;
AttributeRunConfig* HarnessRun::config_ = nullptr;

TEST_F(HarnessRun, RunDirectoryReloadsIdentically) {
  const AttributeRun run = LoadAttributeRun(dir_->file("attr"));
  EXPECT_EQ(run.proxies.size(), run.d1.size());
  EXPECT_EQ(run.summary.d1_rows, run.d1.size());
  EXPECT_GT(run.summary.attribute_accuracy, 0.6);
  EXPECT_EQ(run.calibration_probs.size(), run.calibration_truth.size());
  const AttributeRun again = EnsureAttributeRun(*config_, dir_->file("attr"));
  EXPECT_EQ(again.summary.mean_uncertainty, run.summary.mean_uncertainty);
  EXPECT_EQ(ReadAttributeSummary(dir_->file("attr/summary.txt")).d2_rows, run.d2.size());
}

TEST_F(HarnessRun, NonMcSourcesCollapseToTwoLevels) {
  const AttributeRun run = LoadAttributeRun(dir_->file("attr"));
  for (const char* s : {"conformal:0.1", "confidence:0.8"}) {
    const auto proxies = SourceProxies(run, UncertaintySource::Parse(s));
    ASSERT_EQ(proxies.size(), run.d1.size());
    std::size_t certain = 0;
    for (const auto& p : proxies) {
      EXPECT_TRUE(p.u == 0.0 || p.u == kLn2) << s;
      certain += p.u == 0.0;
    }
    EXPECT_GT(certain, 0u) << s;
    EXPECT_LT(certain, proxies.size()) << s;
  }
}

TEST_F(HarnessRun, SweepIsIdenticalAcrossWorkerCounts) {
  std::map<std::string, std::string> first;
  for (const char* workers : {"1", "4"}) {
    const std::string out = dir_->file(std::string("sweep_w") + workers);
    ::setenv("FAIRSCARCE_WORKERS", workers, 1);
    const SweepOutcome outcome = RunSweep(SweepConfig::Parse(SweepText(out)));
    ::unsetenv("FAIRSCARCE_WORKERS");
    EXPECT_EQ(outcome.failed, 0u);
    EXPECT_EQ(outcome.cells.size(), 7u * 2u * 2u);
    EXPECT_GE(outcome.h, 0.1);
    EXPECT_LE(outcome.h, 0.5);
    for (const char* f : {"results.csv", "reports.csv", "pareto.csv", "tuning.csv"}) {
      const std::string text = testing::Slurp(out + "/" + f);
      EXPECT_FALSE(text.empty()) << f;
      if (first.count(f)) {
        EXPECT_EQ(text, first[f]) << f;
      } else {
        first[f] = text;
      }
    }
  }
  const std::string results = first["results.csv"];
  EXPECT_EQ(results.substr(0, results.find('\n')),
            "variant,constraint,eps_fair,seed,H,uncertainty_source,accuracy,dp,eop,eod");
  const std::string pareto = first["pareto.csv"];
  EXPECT_EQ(pareto.substr(0, pareto.find('\n')),
            "variant,metric,eps_fair,accuracy_median,unfairness_median,accuracy_min,accuracy_max");

  // The manifest alone reproduces the results.
  const std::string manifest = dir_->file("sweep_w1/manifest.conf");
  SweepConfig replay = SweepConfig::Load(manifest);
  replay.out_dir = dir_->file("sweep_replay");
  RunSweep(replay);
  EXPECT_EQ(testing::Slurp(dir_->file("sweep_replay/results.csv")), results);

  const std::string table = WriteTable(dir_->file("sweep_w1"));
  EXPECT_NE(table.find("certain"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir_->file("sweep_w1/table.csv")));
}

TEST_F(HarnessRun, FailedCellsSurfaceInTheManifest) {
  const std::string out = dir_->file("sweep_failing");
  // No row can reach the top of the entropy range.
  const SweepOutcome outcome = RunSweep(SweepConfig::Parse(
      "attr_run = " + dir_->file("attr") + "\nout = " + out +
      "\nseed = 2\nseeds = 1\nvariants = uncertain,vanilla\neps = 0.1\nH = 0.6931471805599453\n"));
  EXPECT_EQ(outcome.failed, 1u);
  const std::string manifest = testing::Slurp(out + "/manifest.conf");
  EXPECT_NE(manifest.find("failed"), std::string::npos);
  const std::string results = testing::Slurp(out + "/results.csv");
  EXPECT_EQ(results.find("uncertain,"), std::string::npos);
  EXPECT_NE(results.find("vanilla,"), std::string::npos);
}

TEST_F(HarnessRun, CleanVariantUsesTrueGroupsAndConstrains) {
  const AttributeRun run = LoadAttributeRun(dir_->file("attr"));
  SweepConfig c = SweepConfig::Parse(SweepText(dir_->file("unused")));
  CellContext ctx{&c, &run, &run.proxies, 0.3};
  const auto vanilla = TrainAndEvaluate(ctx, Variant::kVanilla, 0.0, 5);
  const auto clean = TrainAndEvaluate(ctx, Variant::kClean, 0.0, 5);
  EXPECT_LT(clean.dp_diff, vanilla.dp_diff);
  RandomizedClassifier model;
  std::size_t rows = 0;
  TrainAndEvaluate(ctx, Variant::kCertain, 0.01, 5, &model, &rows);
  EXPECT_GT(rows, 0u);
  EXPECT_LT(rows, run.d1.size());
  EXPECT_NO_THROW(model.Validate());
}

TEST_F(HarnessRun, UnfairnessFallsWithTheThreshold) {
  const AttributeRun run = LoadAttributeRun(dir_->file("attr"));
  ThresholdStudyOptions opt;
  const auto rows = RunThresholdStudy(run, opt, dir_->file("fig2"));
  std::map<double, std::vector<double>> by_h;
  for (const auto& r : rows) {
    if (r.ok) by_h[r.h].push_back(r.report.dp_diff);
  }
  ASSERT_EQ(by_h.size(), opt.grid.size());
  double prev = 1.0;
  for (auto& [h, dps] : by_h) {
    double mean = 0.0;
    for (const double d : dps) mean += d / dps.size();
    EXPECT_LE(mean, prev + 0.03) << "H " << h;
    prev = mean;
  }
  EXPECT_TRUE(std::filesystem::exists(dir_->file("fig2/fig2.csv")));
  EXPECT_TRUE(std::filesystem::exists(dir_->file("fig2/fig2_summary.csv")));
}

}  // namespace
}  // namespace fairscarce
