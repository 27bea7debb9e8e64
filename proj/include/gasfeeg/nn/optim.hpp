#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "gasfeeg/nn/layers.hpp"

namespace gasfeeg::nn {

enum class OptimizerKind { SGD, SGDMomentum, Adam };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::SGDMomentum: return "sgd_momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "sgd_momentum" || s == "momentum") return OptimizerKind::SGDMomentum;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd, sgd_momentum, adam)");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGDMomentum
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

/// Applies one update per call to every parameter using its accumulated grad.
/// Moment buffers are keyed by position in the parameter list.
template <class T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        if (cfg_.kind == OptimizerKind::Adam) v_.emplace_back(p->value.size(), 0.0);
      }
    }
    ++t_;
    const double lr = cfg_.learning_rate;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const double g = static_cast<double>(p.grad[k]);
        double delta = 0.0;
        switch (cfg_.kind) {
          case OptimizerKind::SGD:
            delta = lr * g;
            break;
          case OptimizerKind::SGDMomentum:
            m_[i][k] = cfg_.momentum * m_[i][k] + g;
            delta = lr * m_[i][k];
            break;
          case OptimizerKind::Adam: {
            m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
            v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
            const double mh = m_[i][k] / bc1, vh = v_[i][k] / bc2;
            delta = lr * mh / (std::sqrt(vh) + cfg_.epsilon);
            break;
          }
        }
        p.value[k] = static_cast<T>(static_cast<double>(p.value[k]) - delta);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace gasfeeg::nn
