#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Each one is written from the defining formula, not from
// the library code it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gasfeeg/eval.hpp"
#include "gasfeeg/select.hpp"
#include "gasfeeg/tfr.hpp"

namespace oracle {

using namespace gasfeeg;
using cd = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;

// Algebraic form of the summation field: x_i x_j - sqrt(1-x_i^2) sqrt(1-x_j^2).
inline double gasf_algebraic(double a, double b) { return a * b - std::sqrt(1.0 - a * a) * std::sqrt(1.0 - b * b); }

// O(n^2) DFT, X[k] = sum_t x[t] e^{sign i 2 pi k t / n}.
inline std::vector<cd> direct_dft(const std::vector<cd>& x, int sign = -1) {
  const std::size_t n = x.size();
  std::vector<cd> X(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      X[k] += x[t] * std::polar(1.0, sign * 2.0 * kPi * static_cast<double>((k * t) % n) / static_cast<double>(n));
  return X;
}

inline std::vector<cd> direct_analytic(const std::vector<double>& x) {
  const std::size_t N = x.size();
  auto X = direct_dft(std::vector<cd>(x.begin(), x.end()));
  for (std::size_t k = 1; k < N; ++k) {
    if (2 * k < N) X[k] *= 2.0;
    else if (2 * k > N) X[k] = 0.0;
  }
  auto z = direct_dft(X, +1);
  for (auto& v : z) v /= static_cast<double>(N);
  return z;
}

inline double max_abs_diff(const Spectrum& a, const std::vector<cd>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a.values[i] - b[i]));
  return m;
}

// Direct framed transform: (1/T) sum_t w(t) x(f*hop + t) e^{-i 2 pi k t / T}.
inline std::vector<cd> direct_stft(const std::vector<double>& x, const std::vector<double>& w, std::size_t hop) {
  const std::size_t T = w.size(), rows = T / 2 + 1, cols = (x.size() - T) / hop + 1;
  std::vector<cd> out(rows * cols);
  for (std::size_t k = 0; k < rows; ++k)
    for (std::size_t f = 0; f < cols; ++f) {
      cd acc;
      for (std::size_t t = 0; t < T; ++t)
        acc += w[t] * x[f * hop + t] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(T));
      out[k * cols + f] = acc / static_cast<double>(T);
    }
  return out;
}

// Time-domain Stockwell: S[n][j] = sum_t x[t] e^{-i 2 pi n t / N} g_n(j - t),
// with the Gaussian g_n(u) = n / (N sqrt(2 pi)) e^{-u^2 n^2 / (2 N^2)}
// periodized over N. Row 0 is the mean.
inline std::vector<cd> direct_stockwell(const std::vector<double>& x) {
  const std::size_t N = x.size(), rows = N / 2 + 1;
  const double Nd = static_cast<double>(N);
  std::vector<cd> out(rows * N);
  double mean = 0.0;
  for (double v : x) mean += v;
  for (std::size_t j = 0; j < N; ++j) out[j] = mean / Nd;
  for (std::size_t n = 1; n < rows; ++n) {
    const double nd = static_cast<double>(n);
    for (std::size_t j = 0; j < N; ++j) {
      cd acc;
      for (std::size_t t = 0; t < N; ++t) {
        double g = 0.0;
        for (int p = -12; p <= 12; ++p) {
          const double u = static_cast<double>(j) - static_cast<double>(t) + p * Nd;
          g += nd / (Nd * std::sqrt(2.0 * kPi)) * std::exp(-u * u * nd * nd / (2.0 * Nd * Nd));
        }
        acc += x[t] * g * std::polar(1.0, -2.0 * kPi * static_cast<double>((n * t) % N) / Nd);
      }
      out[n * N + j] = acc;
    }
  }
  return out;
}

// Pseudo-WVD by direct lag summation over the analytic signal.
inline std::vector<cd> direct_wvd(const std::vector<double>& x, WindowKind win, std::size_t window_len) {
  const std::size_t N = x.size(), L = (window_len - 1) / 2;
  const auto z = direct_analytic(x);
  const auto w = make_window(win, window_len, true);
  std::vector<cd> out(N * N);
  for (std::size_t t = 0; t < N; ++t) {
    const long lt = static_cast<long>(std::min({L, t, N - 1 - t}));
    for (std::size_t k = 0; k < N; ++k) {
      cd acc;
      for (long tau = -lt; tau <= lt; ++tau) {
        const auto a = static_cast<std::size_t>(static_cast<long>(t) + tau);
        const auto b = static_cast<std::size_t>(static_cast<long>(t) - tau);
        acc += w[static_cast<std::size_t>(static_cast<long>(L) + tau)] * z[a] * std::conj(z[b]) *
               std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * static_cast<double>(tau) / static_cast<double>(N));
      }
      out[k * N + t] = acc;
    }
  }
  return out;
}

// SET by direct summation: Gaussian and derivative-Gaussian frames, IF from
// the phase-derivative ratio, keep |IF - k| < delta.
inline std::vector<cd> direct_set(const std::vector<double>& x, std::size_t T, std::size_t hop, double delta) {
  std::vector<double> g(T), dg(T);
  const double c = (static_cast<double>(T) - 1.0) / 2.0, s = static_cast<double>(T) / 6.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double u = static_cast<double>(i) - c;
    g[i] = std::exp(-0.5 * u * u / (s * s));
    dg[i] = -u / (s * s) * g[i];
  }
  auto X = direct_stft(x, g, hop);
  const auto Xd = direct_stft(x, dg, hop);
  double peak = 0.0;
  for (auto v : X) peak = std::max(peak, std::abs(v));
  const std::size_t cols = (x.size() - T) / hop + 1;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double k = static_cast<double>(i / cols);
    bool keep = false;
    if (peak > 0.0 && std::abs(X[i]) > peak * 1e-10) {
      const double inst = k - static_cast<double>(T) * (Xd[i] / X[i]).imag() / (2.0 * kPi);
      keep = std::abs(inst - k) < delta;
    }
    if (!keep) X[i] = 0.0;
  }
  return X;
}

struct Planted {
  FeatureMatrix x;
  std::vector<Label> y;
};

// `n` samples per class, 10 columns of N(0,1) noise except `informative`,
// which is the class index plus N(0, sigma).
inline Planted planted_dataset(std::uint64_t seed, std::size_t n, std::size_t informative, double sigma = 0.1) {
  Rng rng(seed);
  Planted d;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const auto label = i < n ? Label::Normal : Label::Focal;
    std::vector<double> row(10);
    for (auto& v : row) v = rng.normal();
    row[informative] = static_cast<double>(label) + rng.normal(0.0, sigma);
    d.x.push_back(row);
    d.y.push_back(label);
  }
  return d;
}

inline std::vector<bool> mask_of(unsigned bits, std::size_t n = 10) {
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = (bits >> i) & 1u;
  return m;
}

// Concordant positive/negative pairs plus half the ties, over P*N.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<Label>& y) {
  double num = 0;
  std::size_t P = 0, Q = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != Label::Focal) continue;
    ++P;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != Label::Normal) continue;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  for (auto l : y) Q += l == Label::Normal;
  return num / (static_cast<double>(P) * static_cast<double>(Q));
}

// Random score sets drawn partly from a coarse grid so ties are common.
inline void random_scores(Rng& rng, std::vector<double>& s, std::vector<Label>& y) {
  const std::size_t n = 2 + rng.below(60);
  s.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.below(2) ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
    y[i] = rng.below(2) ? Label::Focal : Label::Normal;
  }
  y[0] = Label::Focal;
  y[1] = Label::Normal;
}

}  // namespace oracle
