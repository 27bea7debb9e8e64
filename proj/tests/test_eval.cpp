#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gasfeeg/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gasfeeg;

namespace {

constexpr Label F = Label::Focal, N = Label::Normal;

ClassMetrics cm(double p, double r, double f1) {
  ClassMetrics m;
  m.precision = p;
  m.recall = r;
  m.f1 = f1;
  return m;
}

}  // namespace

TEST(Confusion, Examples) {
  const std::vector<Label> p{F, F, N, N}, y{F, N, N, F};
  EXPECT_EQ(confusion(p, y), (ConfusionCounts{1, 1, 1, 1}));
  const auto perfect = confusion(y, y);
  EXPECT_EQ(perfect.fp, 0u);
  EXPECT_EQ(perfect.fn, 0u);
  const std::vector<Label> all{F, F, F, F};
  const auto c = confusion(all, y);
  EXPECT_EQ(c.tn, 0u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.total(), 4u);
  EXPECT_THROW(confusion(std::vector<Label>{F}, y), ShapeMismatch);
  EXPECT_THROW(confusion(std::vector<Label>{}, std::vector<Label>{}), Error);
}

TEST(Prf, Examples) {
  // 372 / 465 = 0.80 precision, 372 / 400 = 0.93 recall.
  const auto m = prf({372, 93, 0, 28});
  EXPECT_DOUBLE_EQ(m.precision, 0.80);
  EXPECT_DOUBLE_EQ(m.recall, 0.93);
  EXPECT_NEAR(m.f1, 0.8601, 1e-4);
  EXPECT_NEAR(f1_score(0.80, 0.93), 0.86, 0.005);

  const auto d = prf({0, 0, 5, 3});
  EXPECT_EQ(d.precision, 0.0);
  EXPECT_TRUE(d.precision_undefined);
  EXPECT_FALSE(d.recall_undefined);
  EXPECT_TRUE(d.f1_undefined);

  const auto e = prf({8, 2, 0, 2});
  EXPECT_DOUBLE_EQ(e.precision, 0.8);
  EXPECT_DOUBLE_EQ(e.recall, 0.8);
  EXPECT_DOUBLE_EQ(e.f1, 0.8);
  EXPECT_EQ(e.support, 10u);
}

TEST(Prf, RangeAndHarmonicMeanProperty) {
  Rng rng(1);
  for (int t = 0; t < 2000; ++t) {
    const ConfusionCounts c{rng.below(20), rng.below(20), rng.below(20), rng.below(20)};
    const auto m = prf(c);
    for (double v : {m.precision, m.recall, m.f1}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    if (m.precision + m.recall > 0) {
      ASSERT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-15);
      ASSERT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
    }
  }
}

TEST(MacroAverage, ReferenceRows) {
  const ClassMetrics first[] = {cm(0.80, 0.93, 0.86), cm(0.97, 0.91, 0.94)};
  const auto a = macro_average(first);
  EXPECT_NEAR(a.precision, 0.885, 1e-12);
  EXPECT_NEAR(a.recall, 0.92, 1e-12);
  EXPECT_NEAR(a.f1, 0.90, 1e-12);
  const ClassMetrics second[] = {cm(0.7314, 0, 0), cm(0.7586, 0, 0)};
  EXPECT_NEAR(macro_average(second).precision, 0.745, 1e-3);
}

TEST(MacroAverage, IdenticalAndPermutationInvariant) {
  const ClassMetrics same[] = {cm(0.3, 0.6, 0.4), cm(0.3, 0.6, 0.4)};
  const auto s = macro_average(same);
  EXPECT_DOUBLE_EQ(s.precision, 0.3);
  EXPECT_DOUBLE_EQ(s.f1, 0.4);
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const ClassMetrics a[] = {cm(rng.uniform(), rng.uniform(), rng.uniform()),
                              cm(rng.uniform(), rng.uniform(), rng.uniform())};
    const ClassMetrics b[] = {a[1], a[0]};
    ASSERT_EQ(macro_average(a).precision, macro_average(b).precision);
    ASSERT_EQ(macro_average(a).f1, macro_average(b).f1);
  }
  EXPECT_THROW(macro_average(std::span<const ClassMetrics>{}), Error);
}

TEST(Roc, Examples) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  EXPECT_DOUBLE_EQ(roc_curve(s, std::vector<Label>{F, F, N, N}).auc, 1.0);
  EXPECT_DOUBLE_EQ(roc_curve(s, std::vector<Label>{F, N, F, N}).auc, 0.75);
  const auto tie = roc_curve(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<Label>{F, N, F, N});
  EXPECT_DOUBLE_EQ(tie.auc, 0.5);
  EXPECT_EQ(tie.points.size(), 2u);
  EXPECT_THROW(roc_curve(s, std::vector<Label>{F, F, F, F}), DegenerateInput);
  EXPECT_THROW(roc_curve(s, std::vector<Label>{F, N}), ShapeMismatch);
}

TEST(Roc, TrapezoidMatchesPairCountOracle) {
  Rng rng(3);
  std::vector<double> s;
  std::vector<Label> y;
  for (int t = 0; t < 500; ++t) {
    oracle::random_scores(rng, s, y);
    ASSERT_NEAR(roc_curve(s, y).auc, oracle::pair_count_auc(s, y), 1e-12) << t;
  }
}

TEST(Roc, InvariantUnderStrictlyIncreasingTransforms) {
  Rng rng(4);
  std::vector<double> s;
  std::vector<Label> y;
  for (int t = 0; t < 300; ++t) {
    oracle::random_scores(rng, s, y);
    const double base = roc_curve(s, y).auc;
    std::vector<double> cube(s), ex(s);
    for (auto& v : cube) v = (v - 0.5) * (v - 0.5) * (v - 0.5);
    for (auto& v : ex) v = std::exp(3 * v);
    ASSERT_NEAR(roc_curve(cube, y).auc, base, 1e-12);
    ASSERT_NEAR(roc_curve(ex, y).auc, base, 1e-12);
  }
}

TEST(Roc, PointsMonotoneAndAnchored) {
  Rng rng(5);
  std::vector<double> s;
  std::vector<Label> y;
  for (int t = 0; t < 300; ++t) {
    oracle::random_scores(rng, s, y);
    const auto c = roc_curve(s, y);
    ASSERT_EQ(c.points.front().fpr, 0.0);
    ASSERT_EQ(c.points.front().tpr, 0.0);
    ASSERT_EQ(c.points.back().fpr, 1.0);
    ASSERT_EQ(c.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      ASSERT_GE(c.points[i].fpr, c.points[i - 1].fpr);
      ASSERT_GE(c.points[i].tpr, c.points[i - 1].tpr);
      ASSERT_LT(c.points[i].threshold, c.points[i - 1].threshold);
    }
    ASSERT_GE(c.auc, 0.0);
    ASSERT_LE(c.auc, 1.0);
  }
}

TEST(Report, EvaluateAndSerialize) {
  const std::vector<Label> y{F, F, F, N, N, N}, p{F, F, N, N, N, F};
  const std::vector<double> s{0.9, 0.8, 0.4, 0.2, 0.1, 0.6};
  const auto r = evaluate(p, s, y);
  EXPECT_EQ(r.counts, (ConfusionCounts{2, 1, 2, 1}));
  EXPECT_NEAR(r.focal.precision, 2.0 / 3, 1e-15);
  EXPECT_NEAR(r.normal.recall, 2.0 / 3, 1e-15);
  EXPECT_DOUBLE_EQ(r.auc, 8.0 / 9);
  const auto j = to_json(r);
  EXPECT_EQ(j["confusion"]["tp"], 2);
  EXPECT_EQ(j["samples"], 6);
  EXPECT_EQ(j["average"]["rounded"]["precision"], 0.67);
  const auto csv = metrics_table_csv(r, "cnn");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,class,precision,recall,f1,auc");
  EXPECT_NE(csv.find("cnn,Average,0.6667,0.6667,0.6667,0.8889"), std::string::npos) << csv;
  const auto roc = roc_csv(roc_curve(s, y));
  EXPECT_EQ(roc.substr(0, roc.find('\n', 20)), "threshold,fpr,tpr\ninf,0,0");

  testutil::TempDir dir("metrics");
  write_metrics_json(dir / "m.json", r);
  std::ifstream in(dir / "m.json");
  EXPECT_EQ(nlohmann::json::parse(in), j);
}
