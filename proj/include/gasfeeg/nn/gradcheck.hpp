#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gasfeeg/nn/network.hpp"

namespace gasfeeg::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;  // "<layer>.<param>[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares backprop gradients of the mean cross-entropy (training mode)
/// against central differences for every parameter element. Relative error
/// uses the denominator max(|a|, |n|, 1e-8).
template <class T>
GradCheckResult gradient_check(Network<T>& net, const Tensor<T>& batch, const std::vector<int>& labels,
                               double epsilon = 1e-6) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw ConfigError("gradient check epsilon must be in [1e-7, 1e-3]");
  auto loss_at = [&] {
    const double l = cross_entropy(net.forward(batch, true), labels);
    if (!std::isfinite(l)) throw Error("non-finite loss during gradient check");
    return l;
  };

  net.zero_grad();
  Tensor<T> g;
  const double base = cross_entropy(net.forward(batch, true), labels, &g);
  if (!std::isfinite(base)) throw Error("non-finite loss during gradient check");
  net.backward(g);

  GradCheckResult r;
  for (std::size_t li = 0; li < net.size(); ++li) {
    for (auto* p : net.layer(li).params()) {
      const std::vector<T> analytic = p->grad;
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        const T saved = p->value[k];
        p->value[k] = static_cast<T>(static_cast<double>(saved) + epsilon);
        const double lp = loss_at();
        p->value[k] = static_cast<T>(static_cast<double>(saved) - epsilon);
        const double lm = loss_at();
        p->value[k] = saved;
        const double n = (lp - lm) / (2.0 * epsilon);
        const double a = static_cast<double>(analytic[k]);
        const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
        ++r.checked;
        if (rel > r.max_relative_error || r.worst_param.empty()) {
          r.max_relative_error = rel;
          r.worst_param = std::to_string(li) + "." + p->name + "[" + std::to_string(k) + "]";
          r.worst_analytic = a;
          r.worst_numeric = n;
        }
      }
    }
  }
  return r;
}

}  // namespace gasfeeg::nn
