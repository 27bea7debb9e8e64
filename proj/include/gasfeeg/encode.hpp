#pragma once

// Gramian Angular Summation Field encoding of epochs, plus raster rendering,
// augmentation and resizing for the image classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "gasfeeg/common.hpp"
#include "gasfeeg/image.hpp"

namespace gasfeeg {

enum class Scaling {
  UnitSigned,    // [-1, 1]
  UnitPositive,  // [0, 1]
};

inline Scaling scaling_from_string(std::string_view s) {
  if (s == "signed" || s == "unit_signed" || s == "[-1,1]") return Scaling::UnitSigned;
  if (s == "positive" || s == "unit_positive" || s == "[0,1]") return Scaling::UnitPositive;
  throw ConfigError("unknown scaling mode '" + std::string(s) + "' (expected signed|positive)");
}

inline std::string_view to_string(Scaling s) { return s == Scaling::UnitSigned ? "signed" : "positive"; }

/// Square, symmetric matrix of cos(phi_i + phi_j) values, row-major.
struct GafMatrix {
  std::size_t n = 0;
  std::vector<double> values;
  Scaling scaling = Scaling::UnitSigned;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

/// Min-max rescaling. UnitPositive maps to [0,1]; UnitSigned maps
/// x -> ((x - max) + (x - min)) / (max - min), i.e. onto [-1, 1].
inline std::vector<double> rescale(std::span<const double> samples, Scaling mode = Scaling::UnitSigned) {
  if (samples.size() < 2) throw DegenerateInput("rescale needs at least 2 samples");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DegenerateInput("constant signal cannot be rescaled (max == min)");
  const double range = hi - lo;
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    out[i] = mode == Scaling::UnitPositive ? (x - lo) / range : ((x - hi) + (x - lo)) / range;
  }
  return out;
}

inline constexpr double kPolarTolerance = 1e-12;

/// phi_i = arccos(x_i). Values within 1e-12 outside [-1,1] are clamped.
inline std::vector<double> to_polar(std::span<const double> scaled) {
  std::vector<double> phi(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const double x = scaled[i];
    if (!(x >= -1.0 - kPolarTolerance && x <= 1.0 + kPolarTolerance))
      throw Error("value " + std::to_string(x) + " at index " + std::to_string(i) + " lies outside [-1, 1]");
    phi[i] = std::acos(std::clamp(x, -1.0, 1.0));
  }
  return phi;
}

/// GASF of an already-rescaled sequence: G[i][j] = cos(phi_i + phi_j).
inline GafMatrix gasf_matrix(std::span<const double> scaled, Scaling mode = Scaling::UnitSigned) {
  const auto phi = to_polar(scaled);
  GafMatrix g;
  g.n = phi.size();
  g.scaling = mode;
  g.values.resize(g.n * g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    g(i, i) = std::cos(phi[i] + phi[i]);
    for (std::size_t j = i + 1; j < g.n; ++j) g(i, j) = g(j, i) = std::cos(phi[i] + phi[j]);
  }
  return g;
}

/// rescale + gasf_matrix in one step.
inline GafMatrix encode_gasf(std::span<const double> samples, Scaling mode = Scaling::UnitSigned) {
  const auto scaled = rescale(samples, mode);
  return gasf_matrix(scaled, mode);
}

/// Gray level index in [0, levels-1] for a GASF value in [-1, 1].
inline int quantize_level(double v, int levels) {
  const double t = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * (levels - 1);
  return static_cast<int>(round_half_away(t));
}

/// One-channel image holding raw level indices 0..levels-1 (GLCM input).
inline RasterImage quantize_levels(const GafMatrix& m, int levels) {
  if (levels < 2 || levels > 256) throw Error("levels must be in [2, 256]");
  RasterImage img(m.n, m.n, 1);
  for (std::size_t k = 0; k < m.values.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(quantize_level(m.values[k], levels));
  return img;
}

/// Display grayscale: level indices stretched back onto 0..255 when fewer
/// than 256 levels are requested.
inline RasterImage quantize_gray(const GafMatrix& m, int levels = 256) {
  auto img = quantize_levels(m, levels);
  if (levels < 256) {
    for (auto& p : img.pixels)
      p = static_cast<std::uint8_t>(round_half_away(p * 255.0 / (levels - 1)));
  }
  return img;
}

inline RasterImage render_rgb(const GafMatrix& m, const Colormap& cmap) {
  RasterImage img(m.n, m.n, 3);
  for (std::size_t k = 0; k < m.values.size(); ++k) {
    const auto& c = cmap[static_cast<std::size_t>(quantize_level(m.values[k], 256))];
    img.pixels[3 * k] = c[0];
    img.pixels[3 * k + 1] = c[1];
    img.pixels[3 * k + 2] = c[2];
  }
  return img;
}

inline RasterImage render_rgb(const GafMatrix& m, std::string_view colormap = "jet") {
  return render_rgb(m, colormap_by_name(colormap));
}

struct AugmentParams {
  double rotation_deg = 0.0;
  int shift_x = 0;
  int shift_y = 0;
  double shear = 0.0;  // horizontal: x' = x + shear * y

  bool is_identity() const { return rotation_deg == 0.0 && shift_x == 0 && shift_y == 0 && shear == 0.0; }
};

/// Affine warp about the image centre: p' = R(theta) * Shear * (p - c) + c + shift.
/// Nearest-neighbour sampling through the inverse map; uncovered pixels are 0.
inline RasterImage augment_image(const RasterImage& img, const AugmentParams& p) {
  if (img.empty()) throw Error("cannot augment an empty image");
  if (p.is_identity()) return img;

  const double th = p.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  // Forward A = R * [[1, k], [0, 1]] = [[c, c*k - s], [s, s*k + c]], det = 1.
  const double a00 = c, a01 = c * p.shear - s, a10 = s, a11 = s * p.shear + c;
  // Inverse of a unit-determinant 2x2.
  const double i00 = a11, i01 = -a01, i10 = -a10, i11 = a00;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;

  RasterImage out(img.width, img.height, img.channels, 0);
  const auto w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx - p.shift_x;
      const double dy = static_cast<double>(y) - cy - p.shift_y;
      const auto sx = static_cast<long>(round_half_away(i00 * dx + i01 * dy + cx));
      const auto sy = static_cast<long>(round_half_away(i10 * dx + i11 * dy + cy));
      if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
      for (std::size_t ch = 0; ch < img.channels; ++ch)
        out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), ch) =
            img.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), ch);
    }
  }
  return out;
}

/// Bilinear resize with half-pixel centres and edge clamping.
inline RasterImage resize_image(const RasterImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w < 1 || out_h < 1) throw Error("resize target must be at least 1x1");
  if (img.empty()) throw Error("cannot resize an empty image");
  if (out_w == img.width && out_h == img.height) return img;

  RasterImage out(out_w, out_h, img.channels);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double max_x = static_cast<double>(img.width - 1), max_y = static_cast<double>(img.height - 1);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < img.channels; ++ch) {
        const double top = img.at(x0, y0, ch) * (1.0 - wx) + img.at(x1, y0, ch) * wx;
        const double bot = img.at(x0, y1, ch) * (1.0 - wx) + img.at(x1, y1, ch) * wx;
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(round_half_away(top * (1.0 - wy) + bot * wy), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// `<source_id>_<start_index>_<label>.png`
inline std::string epoch_image_name(std::string_view source_id, std::size_t start_index, Label label) {
  return std::string(source_id) + "_" + std::to_string(start_index) + "_" + std::string(to_string(label)) + ".png";
}

}  // namespace gasfeeg
