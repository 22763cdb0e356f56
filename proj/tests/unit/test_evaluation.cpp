#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "panoos/evaluation/metrics.hpp"
#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/synthdata/scene.hpp"

using namespace panoos;
using namespace panoos::eval;
using namespace panoos::testutil;

TEST(PrCurve, PerfectSeparation) {
  const std::vector<double> s = {0.9, 0.8, 0.1, 0.2};
  const std::vector<std::uint8_t> l = {OUT, OUT, 0, 1};
  const PrCurve c = pr_curve(s, l);
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_EQ(c.points[1].precision, 1.0);
  EXPECT_EQ(c.points[1].recall, 1.0);
  EXPECT_EQ(auprc(c), 1.0);
  EXPECT_EQ(fpr95(c), 0.0);
}

TEST(PrCurve, TwoPixelsInverted) {
  const std::vector<double> s = {0.2, 0.7};
  const std::vector<std::uint8_t> l = {OUT, 0};
  const PrCurve c = pr_curve(s, l);
  EXPECT_EQ(c.points.back().recall, 1.0);
  EXPECT_EQ(c.points.back().precision, 0.5);
  EXPECT_EQ(auprc(c), 0.5);
  EXPECT_EQ(fpr95(c), 1.0);
}

TEST(PrCurve, AllScoresEqual) {
  const std::vector<double> s(10, 0.3);
  const std::vector<std::uint8_t> l = {OUT, 0, 0, OUT, 1, IGN, 2, 0, OUT, 1};
  const PrCurve c = pr_curve(s, l);
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_DOUBLE_EQ(c.points[0].precision, 3.0 / 9.0);
  EXPECT_EQ(c.positives, 3u);
  EXPECT_EQ(c.negatives, 6u);
}

TEST(PrCurve, IgnoredPixelsDroppedAndErrors) {
  const std::vector<double> s = {0.1, 0.9, std::nan("")};
  const std::vector<std::uint8_t> l = {OUT, IGN, IGN};
  EXPECT_THROW(pr_curve(s, l), EvaluationError);  // no inliers
  const std::vector<std::uint8_t> no_out = {0, 1, IGN};
  EXPECT_THROW(pr_curve(s, no_out), EvaluationError);
  const std::vector<std::uint8_t> nan_counted = {OUT, 0, 1};
  EXPECT_THROW(pr_curve(s, nan_counted), EvaluationError);
  EXPECT_THROW(pr_curve(s, std::vector<std::uint8_t>{OUT}), DimensionError);
}

TEST(Fpr95, CountingExample) {
  // 20 outliers above all but 2 of 40 inliers.
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  for (int i = 0; i < 20; ++i) s.push_back(10.0 + i), l.push_back(OUT);
  for (int i = 0; i < 38; ++i) s.push_back(i * 0.1), l.push_back(0);
  s.push_back(50.0), l.push_back(1);
  s.push_back(60.0), l.push_back(2);
  EXPECT_EQ(fpr95(pr_curve(s, l)), 0.05);
}

TEST(Fpr95, InterleavedMatchesBruteForce) {
  Instance in;
  for (int i = 0; i < 40; ++i) {
    in.scores.push_back(static_cast<double>(i));
    in.labels.push_back(i % 2 == 0 ? OUT : 0);
  }
  EXPECT_EQ(fpr95(pr_curve(in.scores, in.labels)), oracle_fpr95(in));
}

TEST(Metrics, ExactAgainstBruteForceOn50Instances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance in = random_instance(seed);
    const PrCurve c = pr_curve(in.scores, in.labels);
    EXPECT_EQ(auprc(c), oracle_auprc(in)) << "seed " << seed;
    EXPECT_EQ(fpr95(c), oracle_fpr95(in)) << "seed " << seed;
    const double a = auprc(c);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].recall, c.points[i - 1].recall);
      EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
    }
  }
}

TEST(Metrics, RankInvariance) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance in = random_instance(seed + 100);
    const PrCurve before = pr_curve(in.scores, in.labels);
    for (double& v : in.scores) v = std::exp(3.0 * v) - 7.0;
    const PrCurve after = pr_curve(in.scores, in.labels);
    EXPECT_EQ(auprc(before), auprc(after));
    EXPECT_EQ(fpr95(before), fpr95(after));
  }
}

TEST(Metrics, Fpr95NonIncreasingAsOutliersRise) {
  Instance in = random_instance(7);
  double prev = fpr95(pr_curve(in.scores, in.labels));
  for (int step = 0; step < 10; ++step) {
    for (std::size_t i = 0; i < in.scores.size(); ++i)
      if (in.labels[i] == OUT) in.scores[i] += 0.05;
    const double now = fpr95(pr_curve(in.scores, in.labels));
    EXPECT_LE(now, prev);
    prev = now;
  }
}

TEST(Miou, Examples) {
  const std::vector<std::uint8_t> gt = {0, 0, 1, 1};
  EXPECT_EQ(miou(gt, gt, 2).miou, 1.0);
  const std::vector<std::uint8_t> pred = {0, 0, 0, 0};
  const MiouResult r = miou(pred, gt, 2);
  EXPECT_EQ(r.per_class[0], 0.5);
  EXPECT_EQ(r.per_class[1], 0.0);
  EXPECT_EQ(r.miou, 0.25);
  const std::vector<std::uint8_t> ignored = {IGN, OUT, IGN, OUT};
  EXPECT_THROW(miou(pred, ignored, 2), EvaluationError);
}

TEST(Miou, AbsentClassesExcluded) {
  const std::vector<std::uint8_t> gt = {0, 0, 2, OUT};
  const std::vector<std::uint8_t> pred = {0, 0, 2, 1};
  const MiouResult r = miou(pred, gt, 4);
  EXPECT_TRUE(std::isnan(r.per_class[1]));
  EXPECT_TRUE(std::isnan(r.per_class[3]));
  EXPECT_EQ(r.miou, 1.0);
  EXPECT_THROW(miou(std::vector<std::uint8_t>{5}, std::vector<std::uint8_t>{0}, 4), ContractError);
}

TEST(Miou, MatchesCountingOracleAndRelabeling) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 500);
    const std::size_t K = 2 + rng.below(5), n = 1 + rng.below(1000);
    std::vector<std::uint8_t> gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t r = rng.below(K + 2);
      gt[i] = r < K ? static_cast<std::uint8_t>(r) : (r == K ? OUT : IGN);
      pred[i] = static_cast<std::uint8_t>(rng.below(K));
    }
    gt[0] = 0;
    EXPECT_EQ(miou(pred, gt, K).miou, oracle_miou(pred, gt, K)) << "seed " << seed;

    // Reverse class ids on both sides.
    std::vector<std::uint8_t> g2 = gt, p2 = pred;
    for (auto* v : {&g2, &p2})
      for (std::uint8_t& x : *v)
        if (x < K) x = static_cast<std::uint8_t>(K - 1 - x);
    EXPECT_NEAR(miou(p2, g2, K).miou, miou(pred, gt, K).miou, 1e-15);
  }
}

TEST(EvaluateRun, PoolsAcrossScenesAndWritesReport) {
  const auto dir = std::filesystem::temp_directory_path() / "panoos_eval_run";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "scores");
  std::filesystem::create_directories(dir / "labels");

  std::vector<data::ManifestEntry> entries;
  PixelPool pool;
  IouCounter iou(3);
  for (int s = 0; s < 3; ++s) {
    const Instance in = random_instance(900 + s, 60);
    const std::size_t n = in.scores.size();
    const std::string stem = "scene_" + std::to_string(s);
    data::LabelMap gt{1, n, in.labels};
    data::LabelMap pred{1, n, std::vector<std::uint8_t>(n)};
    data::ScoreMap sm{1, n, {}};
    for (std::size_t i = 0; i < n; ++i) {
      pred.values[i] = static_cast<std::uint8_t>(i % 3);
      sm.values.push_back(static_cast<float>(in.scores[i]));
    }
    data::write_label_map(dir / "labels" / (stem + ".posl"), gt);
    data::write_label_map(dir / "scores" / (stem + ".pred.posl"), pred);
    data::write_score_map(dir / "scores" / (stem + ".posm"), sm);
    entries.push_back({dir / "labels" / (stem + ".pose"), dir / "labels" / (stem + ".posl")});
    pool.add(sm, gt);
    iou.add(pred.values, gt.values);
  }
  data::write_manifest(dir / "eval.txt", entries);

  const EvalReport r = evaluate_run(dir / "scores", dir / "labels", dir / "eval.txt");
  const PrCurve c = pool.curve();
  EXPECT_EQ(r.auprc, auprc(c));
  EXPECT_EQ(r.fpr95, fpr95(c));
  EXPECT_EQ(r.miou, iou.miou());
  EXPECT_EQ(r.images, 3u);
  EXPECT_EQ(r.outlier_pixels, pool.positives());
  EXPECT_EQ(r.csv().substr(0, 13), "metric,value\n");
  EXPECT_NE(r.csv().find("auprc,"), std::string::npos);
  EXPECT_NE(r.text().find("AuPRC"), std::string::npos);

  std::filesystem::remove(dir / "scores" / "scene_1.posm");
  EXPECT_THROW(evaluate_run(dir / "scores", dir / "labels", dir / "eval.txt"), IoError);
}
