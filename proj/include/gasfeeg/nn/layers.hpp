#pragma once

// Layer implementations. Every layer caches what its backward pass needs
// during forward(); backward() accumulates parameter gradients into
// Param::grad and returns the gradient with respect to its input.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gasfeeg/common.hpp"
#include "gasfeeg/nn/tensor.hpp"

namespace gasfeeg::nn {

enum class LayerKind { Conv2D, ReLU, BatchNorm, MaxPool, Flatten, Dense, Sigmoid, Softmax };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::ReLU: return "relu";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::Conv2D, LayerKind::ReLU, LayerKind::BatchNorm, LayerKind::MaxPool, LayerKind::Flatten,
                 LayerKind::Dense, LayerKind::Sigmoid, LayerKind::Softmax})
    if (to_string(k) == s) return k;
  throw Error("unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t kernel_h = 0, kernel_w = 0;  // Conv2D
  std::size_t filters = 0;                 // Conv2D
  std::size_t stride = 1;                  // Conv2D, MaxPool
  std::size_t pool = 0;                    // MaxPool
  std::size_t units = 0;                   // Dense

  static LayerSpec conv(std::size_t k, std::size_t filters, std::size_t stride) {
    return {LayerKind::Conv2D, k, k, filters, stride, 0, 0};
  }
  static LayerSpec maxpool(std::size_t p, std::size_t stride) { return {LayerKind::MaxPool, 0, 0, 0, stride, p, 0}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, 0, 0, 0, 1, 0, units}; }
  static LayerSpec of(LayerKind k) { return {k, 0, 0, 0, 1, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline nlohmann::json to_json(const LayerSpec& s) {
  nlohmann::json j{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::Conv2D:
      j["kernel"] = {s.kernel_h, s.kernel_w};
      j["filters"] = s.filters;
      j["stride"] = s.stride;
      break;
    case LayerKind::MaxPool:
      j["pool"] = s.pool;
      j["stride"] = s.stride;
      break;
    case LayerKind::Dense:
      j["units"] = s.units;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  LayerSpec s = LayerSpec::of(layer_kind_from_string(j.at("kind").get<std::string>()));
  switch (s.kind) {
    case LayerKind::Conv2D:
      s.kernel_h = j.at("kernel").at(0).get<std::size_t>();
      s.kernel_w = j.at("kernel").at(1).get<std::size_t>();
      s.filters = j.at("filters").get<std::size_t>();
      s.stride = j.at("stride").get<std::size_t>();
      break;
    case LayerKind::MaxPool:
      s.pool = j.at("pool").get<std::size_t>();
      s.stride = j.at("stride").get<std::size_t>();
      break;
    case LayerKind::Dense:
      s.units = j.at("units").get<std::size_t>();
      break;
    default:
      break;
  }
  return s;
}

/// Per-sample output shape (no batch dimension) or throws if the spec cannot
/// consume `in`.
inline Shape infer_output_shape(const LayerSpec& s, const Shape& in) {
  auto need_hwc = [&](std::string_view what) {
    if (in.size() != 3)
      throw ShapeMismatch(std::string(what) + " expects an (H,W,C) input, got " + shape_string(in));
  };
  switch (s.kind) {
    case LayerKind::Conv2D: {
      need_hwc("conv2d");
      if (s.kernel_h < 1 || s.kernel_w < 1 || s.filters < 1 || s.stride < 1)
        throw Error("conv2d needs kernel >= 1, filters >= 1, stride >= 1");
      if (in[0] < s.kernel_h || in[1] < s.kernel_w)
        throw ShapeMismatch("input too small: conv2d kernel " + std::to_string(s.kernel_h) + "x" +
                            std::to_string(s.kernel_w) + " does not fit " + shape_string(in));
      return {(in[0] - s.kernel_h) / s.stride + 1, (in[1] - s.kernel_w) / s.stride + 1, s.filters};
    }
    case LayerKind::MaxPool: {
      need_hwc("maxpool");
      if (s.pool < 1 || s.stride < 1) throw Error("maxpool needs pool >= 1, stride >= 1");
      if (in[0] < s.pool || in[1] < s.pool)
        throw ShapeMismatch("input too small: maxpool " + std::to_string(s.pool) + " does not fit " + shape_string(in));
      return {(in[0] - s.pool) / s.stride + 1, (in[1] - s.pool) / s.stride + 1, in[2]};
    }
    case LayerKind::Flatten:
      return {shape_size(in)};
    case LayerKind::Dense:
      if (s.units < 1) throw Error("dense layer needs at least 1 unit");
      if (in.size() != 1) throw ShapeMismatch("dense expects a flat input, got " + shape_string(in));
      return {s.units};
    case LayerKind::Softmax:
      if (in.size() != 1) throw ShapeMismatch("softmax expects a flat input, got " + shape_string(in));
      return in;
    case LayerKind::BatchNorm:
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
      return in;
  }
  return in;
}

template <class T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;

  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, T(0)), grad(size, T(0)) {}
};

template <class T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  virtual Tensor<T> forward(const Tensor<T>& x, bool training) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  // Trainable parameters, in serialization order.
  virtual std::vector<Param<T>*> params() { return {}; }
  // Non-trainable persistent state (BatchNorm running statistics).
  virtual std::vector<std::vector<T>*> state() { return {}; }

  void set_threads(std::size_t n) { threads_ = std::max<std::size_t>(1, n); }

 protected:
  LayerSpec spec_;
  std::size_t threads_ = 1;
};

// ---------------------------------------------------------------------------

template <class T>
class Conv2D final : public Layer<T> {
 public:
  // Weights are laid out [filter][ky][kx][channel].
  Conv2D(LayerSpec s, std::size_t in_channels)
      : Layer<T>(s), in_c_(in_channels), w_("weight", s.filters * s.kernel_h * s.kernel_w * in_channels),
        b_("bias", s.filters) {}

  std::size_t fan_in() const { return this->spec_.kernel_h * this->spec_.kernel_w * in_c_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const auto& s = this->spec_;
    if (x.shape.size() != 4 || x.shape[3] != in_c_)
      throw ShapeMismatch("conv2d input " + shape_string(x.shape) + " does not have " + std::to_string(in_c_) +
                          " channels");
    input_ = x;
    const std::size_t N = x.shape[0], H = x.shape[1], W = x.shape[2], C = in_c_;
    const auto out = infer_output_shape(s, {H, W, C});
    const std::size_t Ho = out[0], Wo = out[1], F = s.filters, K = fan_in();
    const std::size_t row = s.kernel_w * C;
    Tensor<T> y({N, Ho, Wo, F});
    parallel_for(N, this->threads_, [&](std::size_t n) {
      std::vector<T> patch(K);
      const T* xs = x.sample(n);
      T* ys = y.sample(n);
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          for (std::size_t ky = 0; ky < s.kernel_h; ++ky) {
            const T* src = xs + ((oy * s.stride + ky) * W + ox * s.stride) * C;
            std::copy(src, src + row, patch.data() + ky * row);
          }
          T* dst = ys + (oy * Wo + ox) * F;
          for (std::size_t f = 0; f < F; ++f) {
            const T* wf = w_.value.data() + f * K;
            T acc = b_.value[f];
            for (std::size_t k = 0; k < K; ++k) acc += wf[k] * patch[k];
            dst[f] = acc;
          }
        }
      }
    });
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const auto& s = this->spec_;
    const auto& x = input_;
    const std::size_t N = x.shape[0], H = x.shape[1], W = x.shape[2], C = in_c_;
    const std::size_t Ho = g.shape[1], Wo = g.shape[2], F = s.filters, K = fan_in();
    const std::size_t row = s.kernel_w * C;
    Tensor<T> dx(x.shape);

    // Input gradient: independent per sample.
    parallel_for(N, this->threads_, [&](std::size_t n) {
      std::vector<T> dpatch(K);
      const T* gs = g.sample(n);
      T* dxs = dx.sample(n);
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          std::fill(dpatch.begin(), dpatch.end(), T(0));
          const T* go = gs + (oy * Wo + ox) * F;
          for (std::size_t f = 0; f < F; ++f) {
            const T gv = go[f];
            if (gv == T(0)) continue;
            const T* wf = w_.value.data() + f * K;
            for (std::size_t k = 0; k < K; ++k) dpatch[k] += gv * wf[k];
          }
          for (std::size_t ky = 0; ky < s.kernel_h; ++ky) {
            T* dst = dxs + ((oy * s.stride + ky) * W + ox * s.stride) * C;
            const T* src = dpatch.data() + ky * row;
            for (std::size_t k = 0; k < row; ++k) dst[k] += src[k];
          }
        }
      }
    });

    // Parameter gradients: each filter owned by one worker, summed in a fixed
    // (sample, position) order so results do not depend on thread count.
    parallel_for(F, this->threads_, [&](std::size_t f) {
      T* dw = w_.grad.data() + f * K;
      T db = T(0);
      for (std::size_t n = 0; n < N; ++n) {
        const T* xs = x.sample(n);
        const T* gs = g.sample(n);
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const T gv = gs[(oy * Wo + ox) * F + f];
            db += gv;
            if (gv == T(0)) continue;
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky) {
              const T* src = xs + ((oy * s.stride + ky) * W + ox * s.stride) * C;
              T* d = dw + ky * row;
              for (std::size_t k = 0; k < row; ++k) d[k] += gv * src[k];
            }
          }
        }
      }
      b_.grad[f] += db;
    });
    (void)H;
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2D>(*this); }
  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

 private:
  std::size_t in_c_;
  Param<T> w_, b_;
  Tensor<T> input_;
};

template <class T>
class Dense final : public Layer<T> {
 public:
  // Weights are laid out [unit][input].
  Dense(LayerSpec s, std::size_t in_dim) : Layer<T>(s), in_(in_dim), w_("weight", s.units * in_dim), b_("bias", s.units) {}

  std::size_t fan_in() const { return in_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.shape.size() != 2 || x.shape[1] != in_)
      throw ShapeMismatch("dense expects (batch," + std::to_string(in_) + "), got " + shape_string(x.shape));
    input_ = x;
    const std::size_t N = x.shape[0], U = this->spec_.units;
    Tensor<T> y({N, U});
    parallel_for(N, this->threads_, [&](std::size_t n) {
      const T* xs = x.sample(n);
      for (std::size_t u = 0; u < U; ++u) {
        const T* wu = w_.value.data() + u * in_;
        T acc = b_.value[u];
        for (std::size_t k = 0; k < in_; ++k) acc += wu[k] * xs[k];
        y.data[n * U + u] = acc;
      }
    });
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const auto& x = input_;
    const std::size_t N = x.shape[0], U = this->spec_.units;
    Tensor<T> dx(x.shape);
    parallel_for(N, this->threads_, [&](std::size_t n) {
      T* d = dx.sample(n);
      for (std::size_t u = 0; u < U; ++u) {
        const T gv = g.data[n * U + u];
        if (gv == T(0)) continue;
        const T* wu = w_.value.data() + u * in_;
        for (std::size_t k = 0; k < in_; ++k) d[k] += gv * wu[k];
      }
    });
    parallel_for(U, this->threads_, [&](std::size_t u) {
      T* dw = w_.grad.data() + u * in_;
      for (std::size_t n = 0; n < N; ++n) {
        const T gv = g.data[n * U + u];
        b_.grad[u] += gv;
        if (gv == T(0)) continue;
        const T* xs = x.sample(n);
        for (std::size_t k = 0; k < in_; ++k) dw[k] += gv * xs[k];
      }
    });
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

 private:
  std::size_t in_;
  Param<T> w_, b_;
  Tensor<T> input_;
};

template <class T>
class ReLU final : public Layer<T> {
 public:
  ReLU() : Layer<T>(LayerSpec::of(LayerKind::ReLU)) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    output_ = x;
    for (auto& v : output_.data) v = v > T(0) ? v : T(0);
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (!(output_.data[i] > T(0))) dx.data[i] = T(0);
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  Tensor<T> output_;
};

template <class T>
class Sigmoid final : public Layer<T> {
 public:
  Sigmoid() : Layer<T>(LayerSpec::of(LayerKind::Sigmoid)) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    output_ = x;
    for (auto& v : output_.data) v = T(1) / (T(1) + std::exp(-v));
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      const T s = output_.data[i];
      dx.data[i] *= s * (T(1) - s);
    }
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sigmoid>(*this); }

 private:
  Tensor<T> output_;
};

template <class T>
class Softmax final : public Layer<T> {
 public:
  Softmax() : Layer<T>(LayerSpec::of(LayerKind::Softmax)) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.shape.size() != 2) throw ShapeMismatch("softmax expects (batch,classes), got " + shape_string(x.shape));
    output_ = x;
    const std::size_t N = x.shape[0], K = x.shape[1];
    for (std::size_t n = 0; n < N; ++n) {
      T* r = output_.data.data() + n * K;
      const T m = *std::max_element(r, r + K);
      T sum = T(0);
      for (std::size_t k = 0; k < K; ++k) sum += (r[k] = std::exp(r[k] - m));
      for (std::size_t k = 0; k < K; ++k) r[k] /= sum;
    }
    return output_;
  }
  // Jacobian-vector product: dx_j = p_j (g_j - sum_k g_k p_k).
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(g.shape);
    const std::size_t N = g.shape[0], K = g.shape[1];
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = output_.data.data() + n * K;
      const T* gn = g.data.data() + n * K;
      T dot = T(0);
      for (std::size_t k = 0; k < K; ++k) dot += gn[k] * p[k];
      for (std::size_t k = 0; k < K; ++k) dx.data[n * K + k] = p[k] * (gn[k] - dot);
    }
    return dx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Softmax>(*this); }

 private:
  Tensor<T> output_;
};

template <class T>
class Flatten final : public Layer<T> {
 public:
  Flatten() : Layer<T>(LayerSpec::of(LayerKind::Flatten)) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape;
    return Tensor<T>({x.shape[0], x.sample_size()}, x.data);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return Tensor<T>(in_shape_, g.data); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape in_shape_;
};

template <class T>
class MaxPool final : public Layer<T> {
 public:
  explicit MaxPool(LayerSpec s) : Layer<T>(s) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const auto& s = this->spec_;
    if (x.shape.size() != 4) throw ShapeMismatch("maxpool expects NHWC input, got " + shape_string(x.shape));
    in_shape_ = x.shape;
    const std::size_t N = x.shape[0], W = x.shape[2], C = x.shape[3];
    const auto out = infer_output_shape(s, {x.shape[1], W, C});
    Tensor<T> y({N, out[0], out[1], C});
    argmax_.assign(y.size(), 0);
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t base = n * x.sample_size();
      for (std::size_t oy = 0; oy < out[0]; ++oy)
        for (std::size_t ox = 0; ox < out[1]; ++ox)
          for (std::size_t c = 0; c < C; ++c) {
            std::size_t best = base + ((oy * s.stride) * W + ox * s.stride) * C + c;
            for (std::size_t py = 0; py < s.pool; ++py)
              for (std::size_t px = 0; px < s.pool; ++px) {
                const std::size_t i = base + ((oy * s.stride + py) * W + ox * s.stride + px) * C + c;
                if (x.data[i] > x.data[best]) best = i;
              }
            const std::size_t o = ((n * out[0] + oy) * out[1] + ox) * C + c;
            y.data[o] = x.data[best];
            argmax_[o] = best;
          }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < g.data.size(); ++o) dx.data[argmax_[o]] += g.data[o];
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool>(*this); }

 private:
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Normalizes over every axis but the last (channels). Training mode uses
/// batch statistics and updates running averages with
/// running = momentum * running + (1 - momentum) * batch.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-5;

  explicit BatchNorm(std::size_t channels)
      : Layer<T>(LayerSpec::of(LayerKind::BatchNorm)), c_(channels), gamma_("gamma", channels),
        beta_("beta", channels), running_mean_(channels, T(0)), running_var_(channels, T(1)) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }

  Tensor<T> forward(const Tensor<T>& x, bool training) override {
    if (x.shape.empty() || x.shape.back() != c_)
      throw ShapeMismatch("batchnorm expects " + std::to_string(c_) + " channels, got " + shape_string(x.shape));
    const std::size_t M = x.size() / c_;
    std::vector<T> mean(c_, T(0)), var(c_, T(0));
    if (training) {
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t c = 0; c < c_; ++c) mean[c] += x.data[i * c_ + c];
      for (auto& m : mean) m /= static_cast<T>(M);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t c = 0; c < c_; ++c) {
          const T d = x.data[i * c_ + c] - mean[c];
          var[c] += d * d;
        }
      for (auto& v : var) v /= static_cast<T>(M);
      for (std::size_t c = 0; c < c_; ++c) {
        running_mean_[c] = static_cast<T>(kMomentum) * running_mean_[c] + static_cast<T>(1 - kMomentum) * mean[c];
        running_var_[c] = static_cast<T>(kMomentum) * running_var_[c] + static_cast<T>(1 - kMomentum) * var[c];
      }
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    inv_std_.resize(c_);
    for (std::size_t c = 0; c < c_; ++c) inv_std_[c] = T(1) / std::sqrt(var[c] + static_cast<T>(kEpsilon));
    xhat_ = Tensor<T>(x.shape);
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t k = i * c_ + c;
        xhat_.data[k] = (x.data[k] - mean[c]) * inv_std_[c];
        y.data[k] = gamma_.value[c] * xhat_.data[k] + beta_.value[c];
      }
    training_ = training;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t M = g.size() / c_;
    std::vector<T> sum_g(c_, T(0)), sum_gx(c_, T(0));
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t k = i * c_ + c;
        sum_g[c] += g.data[k];
        sum_gx[c] += g.data[k] * xhat_.data[k];
      }
    for (std::size_t c = 0; c < c_; ++c) {
      gamma_.grad[c] += sum_gx[c];
      beta_.grad[c] += sum_g[c];
    }
    Tensor<T> dx(g.shape);
    const T m = static_cast<T>(M);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t c = 0; c < c_; ++c) {
        const std::size_t k = i * c_ + c;
        if (training_) {
          // dxhat = g * gamma; dx = inv_std / M * (M dxhat - sum dxhat - xhat sum(dxhat xhat))
          dx.data[k] = gamma_.value[c] * inv_std_[c] / m * (m * g.data[k] - sum_g[c] - xhat_.data[k] * sum_gx[c]);
        } else {
          dx.data[k] = gamma_.value[c] * inv_std_[c] * g.data[k];
        }
      }
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::vector<T>*> state() override { return {&running_mean_, &running_var_}; }

 private:
  std::size_t c_;
  Param<T> gamma_, beta_;
  std::vector<T> running_mean_, running_var_;
  std::vector<T> inv_std_;
  Tensor<T> xhat_;
  bool training_ = true;
};

}  // namespace gasfeeg::nn
