#pragma once

// Time-frequency representations of an epoch: STFT, Stockwell (S-transform),
// pseudo Wigner-Ville of the analytic signal, and a synchro-extracting
// transform built on a Gaussian STFT. Each renders to a gray level image for
// texture analysis.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gasfeeg/common.hpp"
#include "gasfeeg/fft.hpp"
#include "gasfeeg/image.hpp"

namespace gasfeeg {

using cplx = std::complex<double>;

enum class SpectrumKind : std::uint32_t { STFT = 0, Stockwell = 1, WignerVille = 2, SET = 3 };

inline std::string_view to_string(SpectrumKind k) {
  switch (k) {
    case SpectrumKind::STFT: return "stft";
    case SpectrumKind::Stockwell: return "st";
    case SpectrumKind::WignerVille: return "wvt";
    case SpectrumKind::SET: return "set";
  }
  return "?";
}

/// rows = frequency bins, cols = time frames, row-major.
struct Spectrum {
  SpectrumKind kind = SpectrumKind::STFT;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t frame_hop = 1;
  std::size_t window_len = 0;
  std::vector<cplx> values;

  cplx operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  cplx& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }

  std::vector<double> magnitudes() const {
    std::vector<double> m(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m[i] = std::abs(values[i]);
    return m;
  }

  double energy() const {
    double e = 0.0;
    for (const auto& v : values) e += std::norm(v);
    return e;
  }
};

enum class WindowKind { Rectangular, Hann, Gaussian };

inline WindowKind window_from_string(std::string_view s) {
  if (s == "rectangular" || s == "rect" || s == "boxcar") return WindowKind::Rectangular;
  if (s == "hann" || s == "hanning") return WindowKind::Hann;
  if (s == "gaussian" || s == "gauss") return WindowKind::Gaussian;
  throw ConfigError("unknown window '" + std::string(s) + "' (expected rectangular|hann|gaussian)");
}

inline std::string_view to_string(WindowKind w) {
  switch (w) {
    case WindowKind::Rectangular: return "rectangular";
    case WindowKind::Hann: return "hann";
    case WindowKind::Gaussian: return "gaussian";
  }
  return "?";
}

// Gaussian windows use sigma = len / 6 around the window centre.
inline double gaussian_window_sigma(std::size_t len) { return static_cast<double>(len) / 6.0; }

/// Periodic (DFT-even) windows for spectral frames; symmetric ones for lag
/// smoothing where w(tau) == w(-tau) must hold exactly.
inline std::vector<double> make_window(WindowKind kind, std::size_t len, bool symmetric = false) {
  if (len == 0) throw Error("window length must be positive");
  std::vector<double> w(len, 1.0);
  const double n = static_cast<double>(len);
  switch (kind) {
    case WindowKind::Rectangular:
      break;
    case WindowKind::Hann: {
      if (symmetric) {
        // Non-zero endpoints: 0.5 + 0.5 cos(pi * tau / (L + 1)) for tau in [-L, L].
        const double half = (n - 1.0) / 2.0;
        for (std::size_t i = 0; i < len; ++i)
          w[i] = 0.5 + 0.5 * std::cos(std::numbers::pi * (static_cast<double>(i) - half) / (half + 1.0));
      } else {
        for (std::size_t i = 0; i < len; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
      }
      break;
    }
    case WindowKind::Gaussian: {
      const double c = (n - 1.0) / 2.0, s = gaussian_window_sigma(len);
      for (std::size_t i = 0; i < len; ++i) {
        const double d = (static_cast<double>(i) - c) / s;
        w[i] = std::exp(-0.5 * d * d);
      }
      break;
    }
  }
  return w;
}

namespace detail {

// Frames x with an explicit window; X(k) = (1/T) sum_t w(t) x(t) e^{-i2pi kt/T}
// for k = 0..T/2.
inline Spectrum framed_dft(std::span<const double> x, std::span<const double> window, std::size_t hop) {
  const std::size_t T = window.size();
  if (T == 0 || T > x.size())
    throw Error("window length " + std::to_string(T) + " exceeds signal length " + std::to_string(x.size()));
  if (hop < 1) throw Error("hop must be at least 1");
  Spectrum s;
  s.rows = T / 2 + 1;
  s.cols = (x.size() - T) / hop + 1;
  s.frame_hop = hop;
  s.window_len = T;
  s.values.assign(s.rows * s.cols, {});
  const double inv_t = 1.0 / static_cast<double>(T);
  std::vector<fft::cd> frame(T);
  for (std::size_t f = 0; f < s.cols; ++f) {
    for (std::size_t t = 0; t < T; ++t) frame[t] = window[t] * x[f * hop + t];
    const auto X = fft::forward(frame);
    for (std::size_t k = 0; k < s.rows; ++k) s(k, f) = X[k] * inv_t;
  }
  return s;
}

}  // namespace detail

/// Short-time Fourier transform with the 1/T normalization; bins 0..T/2.
inline Spectrum stft(std::span<const double> x, WindowKind window = WindowKind::Hann, std::size_t window_len = 64,
                     std::size_t hop = 16) {
  auto s = detail::framed_dft(x, make_window(window, window_len), hop);
  s.kind = SpectrumKind::STFT;
  return s;
}

/// Discrete Stockwell transform. Voice n (n = 1..N/2) uses a Gaussian of
/// width sigma = N/n samples (sigma = 1/f), applied in the frequency domain;
/// the Gaussian is periodized over the DFT length so the result equals the
/// circular time-domain definition. Voice 0 is the signal mean. Shape
/// (N/2 + 1) x N.
inline Spectrum stockwell(std::span<const double> x) {
  const std::size_t N = x.size();
  if (N < 4) throw Error("stockwell needs at least 4 samples");
  const auto H = fft::forward(x);
  Spectrum s;
  s.kind = SpectrumKind::Stockwell;
  s.rows = N / 2 + 1;
  s.cols = N;
  s.frame_hop = 1;
  s.window_len = N;
  s.values.assign(s.rows * s.cols, {});

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(N);
  for (std::size_t j = 0; j < N; ++j) s(0, j) = mean;

  const auto Nd = static_cast<double>(N);
  std::vector<fft::cd> buf(N);
  for (std::size_t n = 1; n < s.rows; ++n) {
    const double nd = static_cast<double>(n);
    for (std::size_t m = 0; m < N; ++m) {
      const double mm = m <= N / 2 ? static_cast<double>(m) : static_cast<double>(m) - Nd;
      double g = 0.0;
      for (int q = -3; q <= 3; ++q) {
        const double a = mm + q * Nd;
        g += std::exp(-2.0 * std::numbers::pi * std::numbers::pi * a * a / (nd * nd));
      }
      buf[m] = H[(m + n) % N] * g;
    }
    const auto row = fft::inverse(buf);
    for (std::size_t j = 0; j < N; ++j) s(n, j) = row[j];
  }
  return s;
}

/// Analytic signal via the frequency-domain Hilbert construction.
inline std::vector<cplx> analytic_signal(std::span<const double> x) {
  const std::size_t N = x.size();
  auto X = fft::forward(x);
  for (std::size_t k = 1; k < N; ++k) {
    if (2 * k < N)
      X[k] *= 2.0;
    else if (2 * k > N)
      X[k] = 0.0;
  }
  return fft::inverse(std::move(X));
}

/// Raw (complex) pseudo-WVD accumulation P(t, k) = sum_tau w(tau) z(t+tau) z*(t-tau)
/// e^{-i 2 pi k tau / N}, lag tau in [-L, L] clipped at the signal edges.
/// Row k corresponds to k / (2N) cycles per sample. Shape N x N.
inline Spectrum wigner_ville_complex(std::span<const double> x, WindowKind smoothing = WindowKind::Hann,
                                     std::size_t window_len = 63) {
  const std::size_t N = x.size();
  if (window_len % 2 == 0) throw Error("wigner_ville window_len must be odd, got " + std::to_string(window_len));
  if (window_len > N) throw Error("wigner_ville window_len exceeds signal length");
  const auto z = analytic_signal(x);
  const auto w = make_window(smoothing, window_len, /*symmetric=*/true);
  const std::size_t L = (window_len - 1) / 2;

  Spectrum s;
  s.kind = SpectrumKind::WignerVille;
  s.rows = N;
  s.cols = N;
  s.frame_hop = 1;
  s.window_len = window_len;
  s.values.assign(N * N, {});
  std::vector<fft::cd> r(N);
  for (std::size_t t = 0; t < N; ++t) {
    std::fill(r.begin(), r.end(), fft::cd{});
    const std::size_t lt = std::min({L, t, N - 1 - t});
    r[0] = w[L] * z[t] * std::conj(z[t]);
    for (std::size_t tau = 1; tau <= lt; ++tau) {
      r[tau] = w[L + tau] * z[t + tau] * std::conj(z[t - tau]);
      r[N - tau] = w[L - tau] * z[t - tau] * std::conj(z[t + tau]);
    }
    const auto P = fft::forward(r);
    for (std::size_t k = 0; k < N; ++k) s(k, t) = P[k];
  }
  return s;
}

inline double max_imaginary(const Spectrum& s) {
  double m = 0.0;
  for (const auto& v : s.values) m = std::max(m, std::abs(v.imag()));
  return m;
}

/// Real-valued pseudo-WVD; the Hermitian lag product makes the imaginary part
/// pure rounding residue, which is dropped.
inline Spectrum wigner_ville(std::span<const double> x, WindowKind smoothing = WindowKind::Hann,
                             std::size_t window_len = 63) {
  auto s = wigner_ville_complex(x, smoothing, window_len);
  for (auto& v : s.values) v = v.real();
  return s;
}

/// Instantaneous frequency in bins at each STFT cell, from the ratio of the
/// derivative-window STFT to the Gaussian-window STFT:
/// if(k) = k - T * Im(X_dg / X_g) / (2 pi). NaN where X_g is negligible.
struct SetDiagnostics {
  Spectrum stft;                        // Gaussian-window STFT
  std::vector<double> inst_freq_bins;   // same layout as stft.values
};

inline SetDiagnostics gaussian_stft_with_if(std::span<const double> x, std::size_t window_len, std::size_t hop) {
  const auto g = make_window(WindowKind::Gaussian, window_len);
  std::vector<double> dg(window_len);
  const double c = (static_cast<double>(window_len) - 1.0) / 2.0, sig = gaussian_window_sigma(window_len);
  for (std::size_t i = 0; i < window_len; ++i) dg[i] = -(static_cast<double>(i) - c) / (sig * sig) * g[i];

  SetDiagnostics d;
  d.stft = detail::framed_dft(x, g, hop);
  d.stft.kind = SpectrumKind::STFT;
  const auto xd = detail::framed_dft(x, dg, hop);
  double peak = 0.0;
  for (const auto& v : d.stft.values) peak = std::max(peak, std::abs(v));
  const double floor = peak * 1e-10;
  d.inst_freq_bins.assign(d.stft.values.size(), std::numeric_limits<double>::quiet_NaN());
  const auto T = static_cast<double>(window_len);
  for (std::size_t k = 0; k < d.stft.rows; ++k) {
    for (std::size_t f = 0; f < d.stft.cols; ++f) {
      const auto idx = k * d.stft.cols + f;
      const cplx Xg = d.stft.values[idx];
      if (!(std::abs(Xg) > floor) || peak == 0.0) continue;
      d.inst_freq_bins[idx] = static_cast<double>(k) - T * (xd.values[idx] / Xg).imag() / (2.0 * std::numbers::pi);
    }
  }
  return d;
}

/// Synchro-extracting transform: keep a Gaussian-STFT coefficient only where
/// its instantaneous-frequency estimate lies within delta_bins of the bin's
/// own frequency; zero everything else.
inline Spectrum synchro_extract(std::span<const double> x, std::size_t window_len = 64, std::size_t hop = 16,
                                double delta_bins = 1.0) {
  if (!(delta_bins > 0.0)) throw Error("delta_bins must be positive");
  auto d = gaussian_stft_with_if(x, window_len, hop);
  Spectrum s = std::move(d.stft);
  s.kind = SpectrumKind::SET;
  for (std::size_t k = 0; k < s.rows; ++k) {
    for (std::size_t f = 0; f < s.cols; ++f) {
      const auto idx = k * s.cols + f;
      const double inst = d.inst_freq_bins[idx];
      if (!(std::abs(inst - static_cast<double>(k)) < delta_bins)) s.values[idx] = 0.0;
    }
  }
  return s;
}

/// Magnitude (optionally log(1 + |v|)), min-max normalized, quantized to
/// gray level indices 0..levels-1. A constant spectrum maps to level 0.
/// Height = rows (frequency), width = cols (time).
inline RasterImage spectrum_to_image(const Spectrum& s, bool log_compress = true, int levels = 32) {
  if (s.values.empty()) throw Error("cannot image an empty spectrum");
  if (levels < 2 || levels > 256) throw Error("levels must be in [2, 256]");
  auto mag = s.magnitudes();
  if (log_compress)
    for (auto& m : mag) m = std::log1p(m);
  const auto [lo_it, hi_it] = std::minmax_element(mag.begin(), mag.end());
  const double lo = *lo_it, hi = *hi_it;
  RasterImage img(s.cols, s.rows, 1, 0);
  if (!(hi > lo)) return img;
  const double scale = (levels - 1) / (hi - lo);
  for (std::size_t i = 0; i < mag.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(round_half_away((mag[i] - lo) * scale));
  return img;
}

struct TfrSettings {
  WindowKind stft_window = WindowKind::Hann;
  std::size_t stft_window_len = 64;
  std::size_t stft_hop = 16;
  WindowKind wvd_window = WindowKind::Hann;
  std::size_t wvd_window_len = 63;
  std::size_t set_window_len = 64;
  std::size_t set_hop = 16;
  double set_delta_bins = 1.0;
};

inline Spectrum compute_spectrum(SpectrumKind kind, std::span<const double> x, const TfrSettings& cfg = {}) {
  switch (kind) {
    case SpectrumKind::STFT: return stft(x, cfg.stft_window, cfg.stft_window_len, cfg.stft_hop);
    case SpectrumKind::Stockwell: return stockwell(x);
    case SpectrumKind::WignerVille: return wigner_ville(x, cfg.wvd_window, cfg.wvd_window_len);
    case SpectrumKind::SET: return synchro_extract(x, cfg.set_window_len, cfg.set_hop, cfg.set_delta_bins);
  }
  throw Error("unknown spectrum kind");
}

// ---------------------------------------------------------------------------
// Binary dump: five little-endian u32 (kind, rows, cols, hop, window_len)
// followed by rows*cols little-endian f64 magnitudes, row-major.

inline std::string encode_spectrum_dump(const Spectrum& s) {
  std::string out;
  out.reserve(20 + 8 * s.values.size());
  for (std::uint32_t v : {static_cast<std::uint32_t>(s.kind), static_cast<std::uint32_t>(s.rows),
                          static_cast<std::uint32_t>(s.cols), static_cast<std::uint32_t>(s.frame_hop),
                          static_cast<std::uint32_t>(s.window_len)})
    detail::put_le(out, v);
  for (const auto& v : s.values) detail::put_le(out, std::abs(v));
  return out;
}

/// Magnitude spectrum back from a dump (values are real, non-negative).
inline Spectrum decode_spectrum_dump(std::string_view bytes) {
  if (bytes.size() < 20) throw Error("spectrum dump shorter than its header");
  Spectrum s;
  const char* p = bytes.data();
  const auto kind = detail::get_le<std::uint32_t>(p);
  if (kind > 3) throw Error("spectrum dump has unknown kind " + std::to_string(kind));
  s.kind = static_cast<SpectrumKind>(kind);
  s.rows = detail::get_le<std::uint32_t>(p + 4);
  s.cols = detail::get_le<std::uint32_t>(p + 8);
  s.frame_hop = detail::get_le<std::uint32_t>(p + 12);
  s.window_len = detail::get_le<std::uint32_t>(p + 16);
  if (bytes.size() != 20 + 8 * s.rows * s.cols) throw Error("spectrum dump size does not match its header");
  s.values.resize(s.rows * s.cols);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = detail::get_le<double>(p + 20 + 8 * i);
  return s;
}

inline void write_spectrum_dump(const std::filesystem::path& path, const Spectrum& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  const auto bytes = encode_spectrum_dump(s);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace gasfeeg
