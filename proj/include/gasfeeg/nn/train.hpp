#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gasfeeg/nn/network.hpp"
#include "gasfeeg/nn/optim.hpp"

namespace gasfeeg::nn {

/// Inputs (N, sample shape...) with one class index per row.
template <class T>
struct Dataset {
  Tensor<T> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Mutates one training sample in place; called only in training batches.
template <class T>
using Augmenter = std::function<void(T* sample, const Shape& sample_shape, Rng& rng)>;

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  // Patience window for early stopping, counted in epochs since the best.
  std::size_t monitor_epochs = 10;
  bool early_stopping = false;
  // Independent re-initializations; the best snapshot across all is kept.
  std::size_t restarts = 1;
  std::uint64_t seed = 42;
  bool augment = false;
  std::size_t threads = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be > 0");
    if (monitor_epochs < 1) throw ConfigError("train.monitor_epochs must be >= 1");
    if (monitor_epochs > epochs) throw ConfigError("train.monitor_epochs must not exceed train.epochs");
    if (restarts < 1) throw ConfigError("train.restarts must be >= 1");
    if (threads < 1) throw ConfigError("train.threads must be >= 1");
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

template <class T>
struct Checkpoint {
  Network<T> network;  // best-validation snapshot, BatchNorm state included
  std::size_t epoch = 0;  // 0-based index into history
  std::size_t restart = 0;
  double val_accuracy = 0.0;
  std::vector<EpochStats> history;  // of the restart that produced the snapshot
  std::uint64_t seed = 0;
};

/// Inference-mode class probabilities, evaluated in chunks of `batch`.
template <class T>
Tensor<T> predict(Network<T>& net, const Tensor<T>& inputs, std::size_t batch = 64) {
  const std::size_t N = inputs.batch(), S = inputs.sample_size();
  Shape out_shape{N};
  for (auto d : net.output_shape()) out_shape.push_back(d);
  Tensor<T> out(out_shape);
  const std::size_t K = out.sample_size();
  for (std::size_t lo = 0; lo < N; lo += batch) {
    const std::size_t hi = std::min(N, lo + batch);
    Shape bs = inputs.shape;
    bs[0] = hi - lo;
    Tensor<T> xb(bs, std::vector<T>(inputs.data.begin() + lo * S, inputs.data.begin() + hi * S));
    const auto yb = net.forward(xb, false);
    std::copy(yb.data.begin(), yb.data.end(), out.data.begin() + lo * K);
  }
  return out;
}

template <class T>
std::vector<int> argmax_rows(const Tensor<T>& probs) {
  const std::size_t N = probs.batch(), K = probs.sample_size();
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const T* r = probs.data.data() + n * K;
    out[n] = static_cast<int>(std::max_element(r, r + K) - r);
  }
  return out;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  if (pred.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

namespace detail {

template <class T>
void check_dataset(const Network<T>& net, const Dataset<T>& d, const char* which) {
  if (d.size() == 0) throw Error(std::string(which) + " set is empty");
  if (d.inputs.batch() != d.size())
    throw ShapeMismatch(std::string(which) + " set has " + std::to_string(d.inputs.batch()) + " inputs but " +
                        std::to_string(d.size()) + " labels");
  Shape expected{d.size()};
  expected.insert(expected.end(), net.input_shape().begin(), net.input_shape().end());
  if (d.inputs.shape != expected)
    throw ShapeMismatch(std::string(which) + " input shape mismatch: expected " + shape_string(expected) + ", got " +
                        shape_string(d.inputs.shape));
}

}  // namespace detail

/// Mini-batch training with per-epoch seeded shuffling. Returns the snapshot
/// with the highest validation accuracy (ties keep the earliest epoch).
/// `net` is left holding the final weights of the last restart.
template <class T>
Checkpoint<T> train(Network<T>& net, const Dataset<T>& train_set, const Dataset<T>& val_set, const TrainConfig& cfg,
                    const Augmenter<T>& augmenter = {},
                    const std::function<void(std::size_t, const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  detail::check_dataset(net, train_set, "training");
  detail::check_dataset(net, val_set, "validation");
  {
    bool has0 = false, has1 = false;
    for (int y : train_set.labels) (y == 0 ? has0 : has1) = true;
    if (!(has0 && has1)) throw Error("training set contains a single class");
  }
  if (cfg.augment && !augmenter) throw ConfigError("augmentation enabled but no augmenter supplied");

  net.set_threads(cfg.threads);
  const std::size_t N = train_set.size(), S = train_set.inputs.sample_size();
  const Shape sample_shape = net.input_shape();

  std::optional<Checkpoint<T>> best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    if (r > 0) net.initialize(cfg.seed + 0x9e37u * r);
    Optimizer<T> opt({cfg.optimizer, cfg.learning_rate});
    Rng order_rng(cfg.seed, 0x7000u + r);
    Rng aug_rng(cfg.seed, 0x8000u + r);
    std::vector<std::size_t> order(N);
    std::vector<EpochStats> history;
    std::optional<Checkpoint<T>> run_best;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      order_rng.shuffle(order.begin(), order.end());
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t lo = 0, b = 0; lo < N; lo += cfg.batch_size, ++b) {
        const std::size_t hi = std::min(N, lo + cfg.batch_size);
        Shape bs = train_set.inputs.shape;
        bs[0] = hi - lo;
        Tensor<T> xb(bs);
        std::vector<int> yb(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
          const T* src = train_set.inputs.data.data() + order[i] * S;
          T* dst = xb.data.data() + (i - lo) * S;
          std::copy(src, src + S, dst);
          if (cfg.augment) augmenter(dst, sample_shape, aug_rng);
          yb[i - lo] = train_set.labels[order[i]];
        }
        net.zero_grad();
        const auto probs = net.forward(xb, true);
        Tensor<T> grad;
        const double loss = cross_entropy(probs, yb, &grad);
        if (!std::isfinite(loss))
          throw Error("non-finite loss at epoch " + std::to_string(e + 1) + ", batch " + std::to_string(b + 1));
        net.backward(grad);
        opt.step(net.params());
        loss_sum += loss * static_cast<double>(hi - lo);
        const auto pred = argmax_rows(probs);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == yb[i];
      }

      EpochStats st;
      st.train_loss = loss_sum / static_cast<double>(N);
      st.train_accuracy = static_cast<double>(correct) / static_cast<double>(N);
      const auto vp = predict(net, val_set.inputs, std::max<std::size_t>(cfg.batch_size, 64));
      st.val_loss = cross_entropy(vp, val_set.labels);
      st.val_accuracy = accuracy(argmax_rows(vp), val_set.labels);
      history.push_back(st);
      if (on_epoch) on_epoch(e, st);

      if (!run_best || st.val_accuracy > run_best->val_accuracy) {
        run_best = Checkpoint<T>{net, e, r, st.val_accuracy, {}, cfg.seed};
      }
      if (cfg.early_stopping && e - run_best->epoch >= cfg.monitor_epochs) break;
    }
    run_best->history = std::move(history);
    if (!best || run_best->val_accuracy > best->val_accuracy) best = std::move(run_best);
  }
  return std::move(*best);
}

}  // namespace gasfeeg::nn
