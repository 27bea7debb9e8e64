#include <gtest/gtest.h>

#include <algorithm>

#include "gasfeeg/select.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gasfeeg;
using namespace oracle;

TEST(WrapperFitness, PlantedFeatureAloneIsNearPerfect) {
  const auto d = planted_dataset(1, 40, 3, 0.0);
  EXPECT_GE(wrapper_fitness(mask_of(1u << 3), d.x, d.y), 0.95);
  EXPECT_THROW(wrapper_fitness(mask_of(0), d.x, d.y), Error);
}

TEST(WrapperFitness, ShuffledLabelsSitNearChance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = planted_dataset(100 + seed, 100, 0);
    Rng rng(seed);
    rng.shuffle(d.y.begin(), d.y.end());
    const auto m = mask_of(static_cast<unsigned>(1 + rng.below(1023)));
    const double f = wrapper_fitness(m, d.x, d.y, 5, seed);
    EXPECT_GE(f, 0.35) << seed;
    EXPECT_LE(f, 0.65) << seed;
  }
}

TEST(WrapperFitness, IdenticalInformativeColumnsAgreeWithFullMask) {
  Rng rng(2);
  FeatureMatrix x;
  std::vector<Label> y;
  for (std::size_t i = 0; i < 500; ++i) {
    const auto label = i % 2 ? Label::Focal : Label::Normal;
    const double v = static_cast<double>(label) + rng.normal(0.0, 0.6);
    x.emplace_back(10, v);
    y.push_back(label);
  }
  const double full = wrapper_fitness(mask_of(1023), x, y);
  for (std::size_t b = 0; b < 10; ++b) EXPECT_NEAR(wrapper_fitness(mask_of(1u << b), x, y), full, 0.02);
}

TEST(WrapperFitness, TooFewSamplesPerClass) {
  const auto d = planted_dataset(3, 3, 0);
  EXPECT_THROW(wrapper_fitness(mask_of(1), d.x, d.y, 5), Error);
  EXPECT_NO_THROW(wrapper_fitness(mask_of(1), d.x, d.y, 3));
}

TEST(StratifiedFolds, BalancedPerClass) {
  std::vector<Label> y;
  for (int i = 0; i < 23; ++i) y.push_back(i < 11 ? Label::Normal : Label::Focal);
  const auto f = stratified_folds(y, 4, 9);
  for (int c = 0; c < 2; ++c) {
    std::vector<int> per(4, 0);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (static_cast<int>(y[i]) == c) per[f[i]]++;
    EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1);
  }
}

TEST(PsoSelect, PlantedFeatureRecoveredAndSingletonIsOptimal) {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t planted = seed % 10;
    const auto d = planted_dataset(1000 + seed, 30, planted);
    SwarmConfig cfg;
    cfg.seed = seed;
    const auto r = pso_select(d.x, d.y, cfg);
    if (r.mask.bits[planted]) ++recovered;

    // Exhaustive oracle over all 1023 non-empty masks.
    double best = 0.0;
    for (unsigned m = 1; m < 1024; ++m) best = std::max(best, wrapper_fitness(mask_of(m), d.x, d.y, 5, seed));
    EXPECT_EQ(wrapper_fitness(mask_of(1u << planted), d.x, d.y, 5, seed), best) << seed;
    EXPECT_LE(r.mask.fitness, best);
  }
  EXPECT_GE(recovered, 9);
}

TEST(PsoSelect, TraceMonotoneAndMaskFitnessIsFresh) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = planted_dataset(50 + seed, 25, 7, 0.8);
    SwarmConfig cfg;
    cfg.seed = seed;
    cfg.iterations = 15;
    const auto r = pso_select(d.x, d.y, cfg);
    ASSERT_EQ(r.trace.size(), 15u);
    for (std::size_t i = 1; i < r.trace.size(); ++i) ASSERT_GE(r.trace[i], r.trace[i - 1]);
    EXPECT_EQ(r.trace.back(), r.mask.fitness);
    EXPECT_GE(r.mask.count(), 1u);
    EXPECT_EQ(wrapper_fitness(r.mask.bits, d.x, d.y, cfg.folds, cfg.seed), r.mask.fitness);
  }
}

TEST(PsoSelect, MinimalRunAndDeterminism) {
  const auto d = planted_dataset(7, 10, 2);
  SwarmConfig cfg;
  cfg.particles = 2;
  cfg.iterations = 1;
  const auto r = pso_select(d.x, d.y, cfg);
  EXPECT_EQ(r.trace.size(), 1u);
  EXPECT_GE(r.mask.count(), 1u);

  SwarmConfig full;
  full.seed = 17;
  const auto a = pso_select(d.x, d.y, full);
  const auto b = pso_select(d.x, d.y, full);
  EXPECT_EQ(a.mask.bits, b.mask.bits);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.frequency, b.frequency);
  full.threads = 4;
  const auto c = pso_select(d.x, d.y, full);
  EXPECT_EQ(a.mask.bits, c.mask.bits);
  EXPECT_EQ(a.trace, c.trace);
}

TEST(PsoSelect, EmptyMasksAreRepaired) {
  // A fitness that rejects empty masks outright; strongly negative initial
  // velocities make empty samples common.
  SwarmConfig cfg;
  cfg.particles = 10;
  cfg.iterations = 10;
  cfg.v_max = 6.0;
  std::size_t calls = 0;
  const auto r = pso_select(
      10,
      [&](const std::vector<bool>& m) {
        ++calls;
        EXPECT_TRUE(std::find(m.begin(), m.end(), true) != m.end());
        return -static_cast<double>(std::count(m.begin(), m.end(), true));
      },
      cfg);
  EXPECT_EQ(r.mask.count(), 1u);
  EXPECT_EQ(calls, r.evaluations);
}

TEST(PsoSelect, ErrorsAndConfigValidation) {
  auto d = planted_dataset(8, 10, 0);
  std::fill(d.y.begin(), d.y.end(), Label::Focal);
  EXPECT_THROW(pso_select(d.x, d.y, SwarmConfig{}), Error);
  SwarmConfig bad;
  bad.particles = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.inertia = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.c1 = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Selection, TopKAndReport) {
  const std::vector<double> freq{0.1, 0.9, 0.5, 0.9};
  EXPECT_EQ(top_k_by_frequency(freq, 3), (std::vector<std::size_t>{1, 3, 2}));
  SelectionResult r;
  r.mask.bits = {false, true, true, false};
  r.mask.fitness = 0.8;
  r.trace = {0.7, 0.8};
  r.frequency = freq;
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto j = selection_report(r, names);
  EXPECT_EQ(j["mask"], nlohmann::json({0, 1, 1, 0}));
  EXPECT_EQ(j["selected"], nlohmann::json({"b", "c"}));
  EXPECT_EQ(j["ranked_by_frequency"][0], "b");
  EXPECT_EQ(j["config"]["particles"], 20);
}
