#pragma once

// Binary particle-swarm feature selection with a 1-nearest-neighbour wrapper
// fitness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "json.hpp"

#include "gasfeeg/common.hpp"

namespace gasfeeg {

using FeatureMatrix = std::vector<std::vector<double>>;  // rows = samples

struct FeatureMask {
  std::vector<bool> bits;
  double fitness = 0.0;
  std::uint64_t seed = 0;

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.push_back(i);
    return out;
  }
};

struct SwarmConfig {
  std::size_t particles = 20;
  std::size_t iterations = 50;
  double inertia = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  double v_max = 4.0;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::size_t threads = 1;

  void validate() const {
    if (particles < 2) throw ConfigError("swarm.particles must be >= 2");
    if (iterations < 1) throw ConfigError("swarm.iterations must be >= 1");
    if (!(inertia >= 0.0 && inertia <= 1.0)) throw ConfigError("swarm.inertia must lie in [0, 1]");
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("swarm.c1 and swarm.c2 must be positive");
    if (!(v_max > 0.0)) throw ConfigError("swarm.v_max must be positive");
    if (folds < 2) throw ConfigError("swarm.folds must be >= 2");
  }
};

/// Fold index per sample; each class is shuffled with its own stream and
/// dealt round-robin, so fold sizes per class differ by at most one.
inline std::vector<std::size_t> stratified_folds(std::span<const Label> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error("need at least 2 folds");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<int>(labels[i])].push_back(i);
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < folds)
      throw Error("class '" + std::string(to_string(static_cast<Label>(c))) + "' has " +
                  std::to_string(by_class[c].size()) + " samples, fewer than " + std::to_string(folds) + " folds");
  std::vector<std::size_t> fold_of(labels.size());
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    Rng rng(seed, 1000 + static_cast<std::uint64_t>(c));
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = k % folds;
  }
  return fold_of;
}

/// Mean stratified k-fold accuracy of 1-NN on the masked columns, with
/// z-scoring fit on each training fold. Fold assignment depends only on
/// `seed`, so every mask is scored on the same partitions.
inline double wrapper_fitness(const std::vector<bool>& mask, const FeatureMatrix& features, std::span<const Label> labels,
                              std::size_t folds = 5, std::uint64_t seed = 0) {
  if (features.size() != labels.size()) throw Error("feature/label count mismatch");
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) cols.push_back(c);
  if (cols.empty()) throw Error("wrapper_fitness: empty feature mask");
  if (folds < 2) throw Error("wrapper_fitness: need at least 2 folds");
  for (const auto& r : features)
    if (r.size() < mask.size()) throw Error("feature row shorter than mask");

  const auto fold_of = stratified_folds(labels, folds, seed);

  const std::size_t d = cols.size();
  std::vector<double> z(labels.size() * d);
  double acc_sum = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    std::size_t n_train = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_of[i] == f) continue;
      ++n_train;
      for (std::size_t c = 0; c < d; ++c) mean[c] += features[i][cols[c]];
    }
    for (auto& m : mean) m /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_of[i] == f) continue;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = features[i][cols[c]] - mean[c];
        sd[c] += t * t;
      }
    }
    for (auto& s : sd) {
      s = std::sqrt(s / static_cast<double>(n_train));
      if (!(s > 0.0)) s = 1.0;
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) z[i * d + c] = (features[i][cols[c]] - mean[c]) / sd[c];

    std::size_t correct = 0, tested = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_of[i] != f) continue;
      double best = std::numeric_limits<double>::infinity();
      Label pred = Label::Normal;
      for (std::size_t j = 0; j < labels.size(); ++j) {
        if (fold_of[j] == f) continue;
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double t = z[i * d + c] - z[j * d + c];
          dist += t * t;
        }
        if (dist < best) {
          best = dist;
          pred = labels[j];
        }
      }
      correct += pred == labels[i];
      ++tested;
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(tested);
  }
  return acc_sum / static_cast<double>(folds);
}

struct SelectionResult {
  FeatureMask mask;
  std::vector<double> trace;      // global-best fitness after each iteration
  std::vector<double> frequency;  // per feature: share of evaluated positions with the bit set
  SwarmConfig config;
  std::size_t evaluations = 0;    // distinct masks scored
};

using MaskFitness = std::function<double(const std::vector<bool>&)>;

/// Binary PSO over `n_features` bits with an arbitrary fitness functor.
/// Velocities are continuous, clamped to +-v_max; bit i is set with
/// probability sigmoid(v_i). Particles that sample an empty mask get their
/// highest-probability bit set. Each particle draws from its own RNG stream,
/// so evaluation order cannot change results.
inline SelectionResult pso_select(std::size_t n_features, const MaskFitness& fitness, const SwarmConfig& cfg) {
  cfg.validate();
  if (n_features < 1) throw Error("pso_select: need at least one feature");
  const std::size_t P = cfg.particles, D = n_features;

  std::vector<Rng> rng;
  rng.reserve(P);
  for (std::size_t p = 0; p < P; ++p) rng.emplace_back(cfg.seed, p + 1);

  std::vector<std::vector<double>> vel(P, std::vector<double>(D));
  std::vector<std::vector<bool>> pos(P, std::vector<bool>(D));
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto repair = [&](std::size_t p) {
    if (std::find(pos[p].begin(), pos[p].end(), true) != pos[p].end()) return;
    const auto best = std::max_element(vel[p].begin(), vel[p].end()) - vel[p].begin();
    pos[p][static_cast<std::size_t>(best)] = true;
  };
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t d = 0; d < D; ++d) {
      vel[p][d] = rng[p].uniform(-cfg.v_max, cfg.v_max);
      pos[p][d] = rng[p].uniform() < sigmoid(vel[p][d]);
    }
    repair(p);
  }

  // Masks are scored at most once; the cache is keyed by the full mask so
  // it can never return a value for a different subset.
  std::map<std::vector<bool>, double> cache;
  std::mutex cache_mu;
  auto score = [&](const std::vector<bool>& m) {
    {
      std::lock_guard lock(cache_mu);
      if (auto it = cache.find(m); it != cache.end()) return it->second;
    }
    const double f = fitness(m);
    if (!std::isfinite(f)) throw Error("pso_select: fitness is not finite");
    std::lock_guard lock(cache_mu);
    cache.emplace(m, f);
    return f;
  };

  std::vector<std::vector<bool>> pbest = pos;
  std::vector<double> pbest_fit(P, -std::numeric_limits<double>::infinity());
  std::vector<bool> gbest;
  double gbest_fit = -std::numeric_limits<double>::infinity();
  std::vector<double> freq(D, 0.0);

  SelectionResult res;
  res.config = cfg;
  std::vector<double> fit(P);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    parallel_for(P, cfg.threads, [&](std::size_t p) { fit[p] = score(pos[p]); });
    // Single-threaded commit, in particle order.
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t d = 0; d < D; ++d) freq[d] += pos[p][d] ? 1.0 : 0.0;
      if (fit[p] > pbest_fit[p]) {
        pbest_fit[p] = fit[p];
        pbest[p] = pos[p];
      }
      if (fit[p] > gbest_fit) {
        gbest_fit = fit[p];
        gbest = pos[p];
      }
    }
    res.trace.push_back(gbest_fit);
    if (it + 1 == cfg.iterations) break;
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t d = 0; d < D; ++d) {
        const double r1 = rng[p].uniform(), r2 = rng[p].uniform();
        const double x = pos[p][d] ? 1.0 : 0.0;
        double v = cfg.inertia * vel[p][d] + cfg.c1 * r1 * ((pbest[p][d] ? 1.0 : 0.0) - x) +
                   cfg.c2 * r2 * ((gbest[d] ? 1.0 : 0.0) - x);
        v = std::clamp(v, -cfg.v_max, cfg.v_max);
        vel[p][d] = v;
        pos[p][d] = rng[p].uniform() < sigmoid(v);
      }
      repair(p);
    }
  }
  for (auto& f : freq) f /= static_cast<double>(P * cfg.iterations);
  res.mask = FeatureMask{gbest, gbest_fit, cfg.seed};
  res.frequency = std::move(freq);
  res.evaluations = cache.size();
  return res;
}

/// Feature selection with the default 1-NN wrapper fitness.
inline SelectionResult pso_select(const FeatureMatrix& features, std::span<const Label> labels, const SwarmConfig& cfg) {
  if (features.empty() || features.size() != labels.size()) throw Error("pso_select: features/labels mismatch");
  const auto n_focal = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Focal));
  if (n_focal < 2 || labels.size() - n_focal < 2)
    throw Error("pso_select: degenerate dataset, need at least 2 samples of each class");
  const std::size_t D = features.front().size();
  std::vector<Label> lab(labels.begin(), labels.end());
  return pso_select(
      D, [&, lab](const std::vector<bool>& m) { return wrapper_fitness(m, features, lab, cfg.folds, cfg.seed); }, cfg);
}

/// Feature indices ranked by selection frequency (ties: lower index first).
inline std::vector<std::size_t> top_k_by_frequency(std::span<const double> frequency, std::size_t k) {
  std::vector<std::size_t> idx(frequency.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return frequency[a] > frequency[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

inline nlohmann::json selection_report(const SelectionResult& r, std::span<const std::string> names = {}) {
  nlohmann::json j;
  auto bits = nlohmann::json::array();
  for (bool b : r.mask.bits) bits.push_back(b ? 1 : 0);
  j["mask"] = bits;
  j["fitness"] = r.mask.fitness;
  j["trace"] = r.trace;
  j["frequency"] = r.frequency;
  j["evaluations"] = r.evaluations;
  if (!names.empty()) {
    auto sel = nlohmann::json::array();
    for (auto i : r.mask.indices()) sel.push_back(names[i]);
    j["selected"] = sel;
    auto ranked = nlohmann::json::array();
    for (auto i : top_k_by_frequency(r.frequency, r.frequency.size())) ranked.push_back(names[i]);
    j["ranked_by_frequency"] = ranked;
  }
  j["config"] = {{"particles", r.config.particles}, {"iterations", r.config.iterations},
                 {"inertia", r.config.inertia},     {"c1", r.config.c1},
                 {"c2", r.config.c2},               {"v_max", r.config.v_max},
                 {"seed", r.config.seed},           {"folds", r.config.folds}};
  return j;
}

}  // namespace gasfeeg
