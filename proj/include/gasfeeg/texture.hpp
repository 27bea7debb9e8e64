#pragma once

// Gray-level co-occurrence statistics, box-counting fractal dimension, and the
// ten-feature vector that feeds the dense classifier.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gasfeeg/common.hpp"
#include "gasfeeg/encode.hpp"
#include "gasfeeg/ingest.hpp"
#include "gasfeeg/image.hpp"
#include "gasfeeg/tfr.hpp"

namespace gasfeeg {

struct Offset {
  int dx = 1;
  int dy = 0;
};

struct CooccurrenceMatrix {
  int levels = 0;
  std::vector<double> values;  // levels x levels, row-major, sums to 1
  Offset offset;
  bool symmetric = true;

  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i * levels + j)]; }
};

/// Normalized co-occurrence counts of (p(x,y), p(x+dx, y+dy)). With
/// `symmetric`, the transpose is added before normalizing.
inline CooccurrenceMatrix glcm(const RasterImage& img, Offset offset, int levels, bool symmetric = true) {
  if (img.channels != 1) throw Error("glcm needs a single-channel image");
  if (levels < 2 || levels > 256) throw Error("levels must be in [2, 256]");
  if (offset.dx == 0 && offset.dy == 0) throw Error("glcm offset must be non-zero");
  CooccurrenceMatrix P;
  P.levels = levels;
  P.offset = offset;
  P.symmetric = symmetric;
  P.values.assign(static_cast<std::size_t>(levels * levels), 0.0);

  const auto w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  double total = 0.0;
  for (long y = 0; y < h; ++y) {
    const long y2 = y + offset.dy;
    if (y2 < 0 || y2 >= h) continue;
    for (long x = 0; x < w; ++x) {
      const long x2 = x + offset.dx;
      if (x2 < 0 || x2 >= w) continue;
      const int a = img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      const int b = img.at(static_cast<std::size_t>(x2), static_cast<std::size_t>(y2));
      if (a >= levels || b >= levels)
        throw Error("pixel value " + std::to_string(std::max(a, b)) + " not below levels " + std::to_string(levels));
      P.values[static_cast<std::size_t>(a * levels + b)] += 1.0;
      total += 1.0;
      if (symmetric) {
        P.values[static_cast<std::size_t>(b * levels + a)] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) throw Error("glcm offset leaves no valid pixel pairs");
  for (auto& v : P.values) v /= total;
  return P;
}

/// Mean of normalized GLCMs over several offsets (still sums to 1).
inline CooccurrenceMatrix glcm_averaged(const RasterImage& img, std::span<const Offset> offsets, int levels,
                                        bool symmetric = true) {
  if (offsets.empty()) throw Error("need at least one glcm offset");
  CooccurrenceMatrix acc = glcm(img, offsets[0], levels, symmetric);
  for (std::size_t k = 1; k < offsets.size(); ++k) {
    const auto P = glcm(img, offsets[k], levels, symmetric);
    for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += P.values[i];
  }
  for (auto& v : acc.values) v /= static_cast<double>(offsets.size());
  return acc;
}

inline const std::array<Offset, 4>& default_offsets() {
  static const std::array<Offset, 4> o{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
  return o;
}

struct HaralickStats {
  double contrast = 0.0;
  double homogeneity = 0.0;
  double autocorrelation = 0.0;
  double cluster_shade = 0.0;
  double cluster_prominence = 0.0;
  double sum_average = 0.0;
  double sum_entropy = 0.0;
  double difference_variance = 0.0;
  double info_measure_corr1 = 0.0;

  std::vector<std::pair<std::string, double>> named() const {
    return {{"contrast", contrast},
            {"homogeneity", homogeneity},
            {"autocorrelation", autocorrelation},
            {"cluster_shade", cluster_shade},
            {"cluster_prominence", cluster_prominence},
            {"sum_average", sum_average},
            {"sum_entropy", sum_entropy},
            {"difference_variance", difference_variance},
            {"info_measure_corr1", info_measure_corr1}};
  }
};

namespace detail {
// -p log2 p with 0 log 0 == 0.
inline double plog2p(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }
}  // namespace detail

/// Haralick-family statistics over 0-based gray indices; entropies in bits.
inline HaralickStats haralick(const CooccurrenceMatrix& P) {
  const int L = P.levels;
  std::vector<double> px(static_cast<std::size_t>(L), 0.0), py(static_cast<std::size_t>(L), 0.0);
  std::vector<double> psum(static_cast<std::size_t>(2 * L - 1), 0.0), pdiff(static_cast<std::size_t>(L), 0.0);
  HaralickStats h;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double p = P(i, j);
      if (p == 0.0) continue;
      px[static_cast<std::size_t>(i)] += p;
      py[static_cast<std::size_t>(j)] += p;
      psum[static_cast<std::size_t>(i + j)] += p;
      pdiff[static_cast<std::size_t>(std::abs(i - j))] += p;
      const double d = i - j;
      h.contrast += d * d * p;
      h.homogeneity += p / (1.0 + d * d);
      h.autocorrelation += static_cast<double>(i) * j * p;
    }
  }
  double mu_x = 0.0, mu_y = 0.0;
  for (int i = 0; i < L; ++i) {
    mu_x += i * px[static_cast<std::size_t>(i)];
    mu_y += i * py[static_cast<std::size_t>(i)];
  }
  double hxy = 0.0, hxy1 = 0.0;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double p = P(i, j);
      if (p == 0.0) continue;
      const double c = i + j - mu_x - mu_y;
      h.cluster_shade += c * c * c * p;
      h.cluster_prominence += c * c * c * c * p;
      hxy += detail::plog2p(p);
      // p > 0 implies px(i) > 0 and py(j) > 0.
      hxy1 -= p * std::log2(px[static_cast<std::size_t>(i)] * py[static_cast<std::size_t>(j)]);
    }
  }
  for (std::size_t k = 0; k < psum.size(); ++k) {
    h.sum_average += static_cast<double>(k) * psum[k];
    h.sum_entropy += detail::plog2p(psum[k]);
  }
  double mu_d = 0.0;
  for (std::size_t k = 0; k < pdiff.size(); ++k) mu_d += static_cast<double>(k) * pdiff[k];
  for (std::size_t k = 0; k < pdiff.size(); ++k) {
    const double d = static_cast<double>(k) - mu_d;
    h.difference_variance += d * d * pdiff[k];
  }
  double hx = 0.0, hy = 0.0;
  for (int i = 0; i < L; ++i) {
    hx += detail::plog2p(px[static_cast<std::size_t>(i)]);
    hy += detail::plog2p(py[static_cast<std::size_t>(i)]);
  }
  const double denom = std::max(hx, hy);
  h.info_measure_corr1 = denom > 0.0 ? (hxy - hxy1) / denom : 0.0;
  return h;
}

/// Otsu's threshold over the 8-bit histogram. Pixels > threshold are
/// foreground. Ties resolve to the smallest threshold.
inline int otsu_threshold(const RasterImage& img) {
  if (img.channels != 1) throw Error("otsu_threshold needs a single-channel image");
  std::array<double, 256> hist{};
  for (auto p : img.pixels) hist[p] += 1.0;
  const double total = static_cast<double>(img.pixels.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

/// Box-counting dimension of the foreground (pixel > threshold) over box
/// sizes 2, 4, 8, ... <= min(w, h) / 2; negated least-squares slope of
/// log(count) against log(size).
inline double fractal_dimension(const RasterImage& img, int threshold) {
  if (img.channels != 1) throw Error("fractal_dimension needs a single-channel image");
  if (img.width < 8 || img.height < 8) throw Error("fractal_dimension needs an image of at least 8x8");
  const std::size_t w = img.width, h = img.height;
  bool any = false;
  for (auto p : img.pixels) any = any || p > threshold;
  if (!any) throw DegenerateInput("no foreground pixels above threshold " + std::to_string(threshold));

  std::vector<double> xs, ys;
  const std::size_t limit = std::min(w, h) / 2;
  for (std::size_t s = 2; s <= limit; s *= 2) {
    const std::size_t bw = (w + s - 1) / s, bh = (h + s - 1) / s;
    std::vector<char> hit(bw * bh, 0);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (img.at(x, y) > threshold) hit[(y / s) * bw + x / s] = 1;
    std::size_t count = 0;
    for (char c : hit) count += c != 0;
    xs.push_back(std::log(static_cast<double>(s)));
    ys.push_back(std::log(static_cast<double>(count)));
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return -sxy / sxx;
}

// ---------------------------------------------------------------------------
// Feature vector

inline constexpr std::size_t kFeatureCount = 10;

inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{
      "st_cluster_shade",       "st_sum_entropy",          "wvt_contrast",
      "wvt_fractal_dimension",  "wvt_difference_variance", "set_autocorrelation",
      "set_sum_average",        "stft_cluster_prominence", "stft_info_measure_corr1",
      "stft_homogeneity"};
  return names;
}

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class FeatureSource {
  Transforms,  // each feature from its designated time-frequency image
  Gasf,        // all ten from the GASF image of the epoch
};

inline FeatureSource feature_source_from_string(std::string_view s) {
  if (s == "transforms" || s == "tfr") return FeatureSource::Transforms;
  if (s == "gasf") return FeatureSource::Gasf;
  throw ConfigError("unknown feature source '" + std::string(s) + "' (expected transforms|gasf)");
}

struct TextureSettings {
  int levels = 32;
  bool symmetric = true;
  bool log_compress = true;
  std::vector<Offset> offsets{default_offsets().begin(), default_offsets().end()};
  FeatureSource source = FeatureSource::Transforms;
  Scaling gasf_scaling = Scaling::UnitSigned;  // only for FeatureSource::Gasf
  TfrSettings tfr;
};

struct ImageTexture {
  HaralickStats stats;
  double fractal = 0.0;
};

inline ImageTexture analyze_image(const RasterImage& levels_img, const TextureSettings& cfg, bool want_fractal) {
  ImageTexture t;
  t.stats = haralick(glcm_averaged(levels_img, cfg.offsets, cfg.levels, cfg.symmetric));
  if (want_fractal) t.fractal = fractal_dimension(levels_img, otsu_threshold(levels_img));
  return t;
}

/// Runs the four transforms (or the GASF encoder) and picks the ten features:
/// ST cluster shade / sum entropy, WVT contrast / fractal dimension /
/// difference variance, SET autocorrelation / sum average, STFT cluster
/// prominence / IMC1 / homogeneity.
inline FeatureVector assemble_feature_vector(std::span<const double> epoch, const TextureSettings& cfg = {}) {
  if (epoch.size() < 2) throw DegenerateInput("epoch too short for feature extraction");
  const auto [lo, hi] = std::minmax_element(epoch.begin(), epoch.end());
  if (!(*hi > *lo)) throw DegenerateInput("constant epoch has no texture (max == min)");

  FeatureVector fv;
  auto& v = fv.values;
  if (cfg.source == FeatureSource::Gasf) {
    const auto img = quantize_levels(encode_gasf(epoch, cfg.gasf_scaling), cfg.levels);
    const auto t = analyze_image(img, cfg, true);
    v = {t.stats.cluster_shade,  t.stats.sum_entropy,     t.stats.contrast,
         t.fractal,              t.stats.difference_variance, t.stats.autocorrelation,
         t.stats.sum_average,    t.stats.cluster_prominence, t.stats.info_measure_corr1,
         t.stats.homogeneity};
    return fv;
  }
  auto image_of = [&](SpectrumKind k) {
    return spectrum_to_image(compute_spectrum(k, epoch, cfg.tfr), cfg.log_compress, cfg.levels);
  };
  const auto st = analyze_image(image_of(SpectrumKind::Stockwell), cfg, false);
  const auto wv = analyze_image(image_of(SpectrumKind::WignerVille), cfg, true);
  const auto se = analyze_image(image_of(SpectrumKind::SET), cfg, false);
  const auto sf = analyze_image(image_of(SpectrumKind::STFT), cfg, false);
  v = {st.stats.cluster_shade,      st.stats.sum_entropy,          wv.stats.contrast,
       wv.fractal,                  wv.stats.difference_variance,  se.stats.autocorrelation,
       se.stats.sum_average,        sf.stats.cluster_prominence,   sf.stats.info_measure_corr1,
       sf.stats.homogeneity};
  for (double x : v)
    if (!std::isfinite(x)) throw Error("non-finite texture feature");
  return fv;
}

// ---------------------------------------------------------------------------
// Feature CSV: header of the ten names + label; 17 significant digits.

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
};

inline void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureVector> features,
                              std::span<const Label> labels) {
  if (features.size() != labels.size()) throw Error("feature/label count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& n : feature_names()) out << n << ',';
  out << "label\n";
  char buf[40];
  for (std::size_t r = 0; r < features.size(); ++r) {
    for (double x : features[r].values) {
      std::snprintf(buf, sizeof buf, "%.17g,", x);
      out << buf;
    }
    out << to_string(labels[r]) << '\n';
  }
}

inline FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature table '" + path.string() + "'");
  FeatureTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("feature table '" + path.string() + "' is empty");
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.names.push_back(std::string(detail::trim(cell)));
    if (t.names.empty() || t.names.back() != "label") throw Error("feature table header must end with 'label'");
    t.names.pop_back();
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    if (fields.size() != t.names.size() + 1)
      throw ParseError("feature table row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(t.names.size() + 1),
                       row, 0);
    std::vector<double> r(t.names.size());
    for (std::size_t c = 0; c < r.size(); ++c)
      if (!detail::parse_finite(fields[c], r[c]))
        throw ParseError("feature table row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                             " is not a finite number",
                         row, c + 1);
    t.rows.push_back(std::move(r));
    t.labels.push_back(label_from_string(fields.back()));
  }
  return t;
}

}  // namespace gasfeeg
