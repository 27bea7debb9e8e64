#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gasfeeg/common.hpp"

namespace gasfeeg::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

/// Dense row-major tensor. Image batches are NHWC.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape))
      throw ShapeMismatch("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                          shape_string(shape));
  }

  std::size_t size() const { return data.size(); }
  std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
  // Elements per leading-dimension slice.
  std::size_t sample_size() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }

  T* sample(std::size_t n) { return data.data() + n * sample_size(); }
  const T* sample(std::size_t n) const { return data.data() + n * sample_size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace gasfeeg::nn
