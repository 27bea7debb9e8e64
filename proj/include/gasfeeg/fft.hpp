#pragma once

// Complex FFT: iterative radix-2 for powers of two, Bluestein's chirp-z for
// everything else. All scratch is local to the call, so concurrent calls are
// safe.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace gasfeeg::fft {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// In place, unnormalized. sign = -1 forward, +1 inverse.
inline void radix2(std::vector<cd>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by repeated multiplication so
    // error does not accumulate along the butterfly span.
    std::vector<cd> tw(half);
    for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

inline void bluestein(std::vector<cd>& a, int sign) {
  const std::size_t n = a.size();
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large k.
    const auto k2 = static_cast<double>((static_cast<unsigned long long>(k) * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * k2 / static_cast<double>(n));
  }
  std::vector<cd> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  radix2(x, -1);
  radix2(y, -1);
  for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
  radix2(x, +1);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

inline void transform(std::vector<cd>& a, int sign) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    radix2(a, sign);
  else
    bluestein(a, sign);
}

}  // namespace detail

/// Forward DFT, X[k] = sum_t x[t] e^{-i 2 pi k t / n}. Unnormalized.
inline std::vector<cd> forward(std::vector<cd> a) {
  detail::transform(a, -1);
  return a;
}

inline std::vector<cd> forward(std::span<const double> x) {
  return forward(std::vector<cd>(x.begin(), x.end()));
}

/// Inverse DFT including the 1/n factor, so inverse(forward(x)) == x.
inline std::vector<cd> inverse(std::vector<cd> a) {
  detail::transform(a, +1);
  const double s = a.empty() ? 1.0 : 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= s;
  return a;
}

}  // namespace gasfeeg::fft
