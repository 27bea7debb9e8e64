#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gasfeeg/nn/layers.hpp"

namespace gasfeeg::nn {

inline constexpr std::size_t kNumClasses = 2;

/// Ordered layer stack with per-sample input shape (H,W,C) or (D).
template <class T>
class Network {
 public:
  Network() = default;

  Network(Shape input_shape, const std::vector<LayerSpec>& specs, std::uint64_t seed = 0)
      : input_shape_(std::move(input_shape)), seed_(seed) {
    if (input_shape_.empty() || shape_size(input_shape_) == 0) throw ShapeMismatch("network input shape is empty");
    Shape cur = input_shape_;
    for (const auto& s : specs) {
      Shape next = infer_output_shape(s, cur);
      layers_.push_back(make_layer(s, cur));
      shapes_.push_back(next);
      cur = std::move(next);
    }
    initialize(seed);
  }

  Network(const Network& o) : input_shape_(o.input_shape_), shapes_(o.shapes_), seed_(o.seed_), check_finite_(o.check_finite_) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& o) {
    if (this != &o) *this = Network(o);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }
  // Per-sample output shape of layer i.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  std::uint64_t seed() const { return seed_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
  }

  std::size_t weighted_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      if (l->spec().kind == LayerKind::Conv2D || l->spec().kind == LayerKind::Dense) ++n;
    return n;
  }

  void set_threads(std::size_t n) {
    for (auto& l : layers_) l->set_threads(n);
  }

  // When set, every layer output is checked for NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  /// He-uniform for conv and for dense layers feeding a ReLU; Xavier-uniform
  /// for other dense layers; biases zero.
  void initialize(std::uint64_t seed) {
    seed_ = seed;
    Rng rng(seed, 0x11u);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& l = *layers_[i];
      const auto kind = l.spec().kind;
      if (kind != LayerKind::Conv2D && kind != LayerKind::Dense) continue;
      const bool relu_next = next_activation(i) == LayerKind::ReLU;
      std::size_t fan_in = 0, fan_out = 0;
      Param<T>* w = nullptr;
      Param<T>* b = nullptr;
      if (kind == LayerKind::Conv2D) {
        auto& c = static_cast<Conv2D<T>&>(l);
        fan_in = c.fan_in();
        fan_out = l.spec().kernel_h * l.spec().kernel_w * l.spec().filters;
        w = &c.weight();
        b = &c.bias();
      } else {
        auto& d = static_cast<Dense<T>&>(l);
        fan_in = d.fan_in();
        fan_out = l.spec().units;
        w = &d.weight();
        b = &d.bias();
      }
      const bool he = kind == LayerKind::Conv2D || relu_next;
      const double limit = he ? std::sqrt(6.0 / static_cast<double>(fan_in))
                              : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : w->value) v = static_cast<T>(rng.uniform(-limit, limit));
      std::fill(b->value.begin(), b->value.end(), T(0));
    }
  }

  /// x is (batch, input_shape...). Returns (batch, output_shape...).
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Shape expected{x.batch()};
    expected.insert(expected.end(), input_shape_.begin(), input_shape_.end());
    if (x.shape != expected || x.batch() == 0) {
      Shape want{0};
      want.insert(want.end(), input_shape_.begin(), input_shape_.end());
      std::string w = shape_string(want);
      w.replace(1, 1, "N");
      throw ShapeMismatch("input shape mismatch: expected " + w + ", got " + shape_string(x.shape));
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cur = layers_[i]->forward(cur, training);
      if (check_finite_)
        for (const auto& v : cur.data)
          if (!std::isfinite(static_cast<double>(v)))
            throw Error("non-finite activation after layer " + std::to_string(i) + " (" +
                        std::string(to_string(layers_[i]->spec().kind)) + ")");
    }
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& grad) {
    Tensor<T> g = grad;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    return g;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  std::vector<std::vector<T>*> state() {
    std::vector<std::vector<T>*> out;
    for (auto& l : layers_)
      for (auto* s : l->state()) out.push_back(s);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      for (const auto* p : l->params()) n += p->value.size();
    return n;
  }

 private:
  static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s, const Shape& in) {
    switch (s.kind) {
      case LayerKind::Conv2D: return std::make_unique<Conv2D<T>>(s, in[2]);
      case LayerKind::Dense: return std::make_unique<Dense<T>>(s, in[0]);
      case LayerKind::ReLU: return std::make_unique<ReLU<T>>();
      case LayerKind::Sigmoid: return std::make_unique<Sigmoid<T>>();
      case LayerKind::Softmax: return std::make_unique<Softmax<T>>();
      case LayerKind::Flatten: return std::make_unique<Flatten<T>>();
      case LayerKind::MaxPool: return std::make_unique<MaxPool<T>>(s);
      case LayerKind::BatchNorm: return std::make_unique<BatchNorm<T>>(in.back());
    }
    throw Error("unsupported layer kind");
  }

  // First activation after layer i, skipping BatchNorm/MaxPool/Flatten.
  LayerKind next_activation(std::size_t i) const {
    for (std::size_t j = i + 1; j < layers_.size(); ++j) {
      const auto k = layers_[j]->spec().kind;
      if (k == LayerKind::ReLU || k == LayerKind::Sigmoid || k == LayerKind::Softmax) return k;
      if (k == LayerKind::Conv2D || k == LayerKind::Dense) break;
    }
    return LayerKind::Softmax;
  }

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> shapes_;
  std::uint64_t seed_ = 0;
  bool check_finite_ = false;
};

inline std::size_t scaled_width(std::size_t base, double scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(base) * scale - 1e-9)));
}

/// Layer chain of the custom CNN; widths scale by `scale` (rounded up).
inline std::vector<LayerSpec> custom_cnn_specs(double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("cnn scale must be in (0, 1], got " + std::to_string(scale));
  return {
      LayerSpec::conv(3, scaled_width(32, scale), 1), LayerSpec::of(LayerKind::ReLU),
      LayerSpec::conv(3, scaled_width(64, scale), 2), LayerSpec::of(LayerKind::ReLU),
      LayerSpec::conv(3, scaled_width(64, scale), 2), LayerSpec::of(LayerKind::ReLU),
      LayerSpec::of(LayerKind::BatchNorm),           LayerSpec::maxpool(2, 2),
      LayerSpec::of(LayerKind::Flatten),             LayerSpec::dense(scaled_width(1024, scale)),
      LayerSpec::of(LayerKind::Sigmoid),             LayerSpec::dense(scaled_width(512, scale)),
      LayerSpec::of(LayerKind::Sigmoid),             LayerSpec::dense(kNumClasses),
      LayerSpec::of(LayerKind::Softmax),
  };
}

template <class T = float>
Network<T> build_custom_cnn(std::size_t height, std::size_t width, double scale, std::uint64_t seed = 0,
                            std::size_t channels = 3) {
  if (height < 16 || width < 16)
    throw ShapeMismatch("input too small for the cnn shape chain: need at least 16x16, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  return Network<T>({height, width, channels}, custom_cnn_specs(scale), seed);
}

template <class T = float>
Network<T> build_dense_ann(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::uint64_t seed = 0) {
  if (input_dim < 1) throw ConfigError("dense ann input_dim must be >= 1");
  if (hidden.empty()) throw ConfigError("dense ann needs at least one hidden layer");
  std::vector<LayerSpec> specs;
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("dense ann hidden width must be >= 1");
    specs.push_back(LayerSpec::dense(h));
    specs.push_back(LayerSpec::of(LayerKind::Sigmoid));
  }
  specs.push_back(LayerSpec::dense(kNumClasses));
  specs.push_back(LayerSpec::of(LayerKind::Softmax));
  return Network<T>({input_dim}, specs, seed);
}

/// Mean categorical cross-entropy with log clamped at 1e-12; also writes
/// dL/dprob into `grad` when non-null.
template <class T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels, Tensor<T>* grad = nullptr) {
  const std::size_t N = probs.batch(), K = probs.sample_size();
  if (labels.size() != N) throw ShapeMismatch("label count does not match batch size");
  if (grad) *grad = Tensor<T>(probs.shape);
  double loss = 0.0;
  constexpr double kClamp = 1e-12;
  for (std::size_t n = 0; n < N; ++n) {
    const auto y = static_cast<std::size_t>(labels[n]);
    if (y >= K) throw Error("label out of range");
    const double p = static_cast<double>(probs.data[n * K + y]);
    loss -= std::log(std::max(p, kClamp));
    if (grad && p > kClamp) grad->data[n * K + y] = static_cast<T>(-1.0 / (p * static_cast<double>(N)));
  }
  return loss / static_cast<double>(N);
}

}  // namespace gasfeeg::nn
