#pragma once

// 8-bit raster images, PNG encode/decode (zlib for deflate and CRC), and the
// 256-entry pseudocolor tables.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "gasfeeg/common.hpp"

namespace gasfeeg {

struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;     // 1 gray, 3 RGB
  std::vector<std::uint8_t> pixels;  // row-major, channel-interleaved

  RasterImage() = default;
  RasterImage(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {
    if (c != 1 && c != 3) throw Error("raster channels must be 1 or 3");
  }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// ---------------------------------------------------------------------------
// PNG

namespace detail {

inline void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

inline std::uint32_t get_be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

inline void put_chunk(std::string& out, const char type[4], const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace detail

/// Encodes an 8-bit, non-interlaced gray or RGB PNG. Scanlines use filter 0
/// so the output is a pure function of the pixels.
inline std::string encode_png(const RasterImage& img) {
  if (img.empty()) throw Error("cannot encode an empty image");
  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                       // bit depth
  ihdr.push_back(static_cast<char>(img.channels == 3 ? 2 : 0));  // color type
  ihdr.append(3, '\0');                                    // deflate, adaptive filter, no interlace
  detail::put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = img.width * img.channels;
  std::vector<unsigned char> raw;
  raw.reserve((stride + 1) * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::string z(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error("zlib compression failed");
  z.resize(zlen);
  detail::put_chunk(out, "IDAT", z);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  const auto bytes = encode_png(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Decodes 8-bit, non-interlaced gray or RGB PNGs (all five scanline filters).
inline RasterImage decode_png(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view("\x89PNG\r\n\x1a\n", 8))
    throw Error("not a PNG stream");
  std::size_t pos = 8;
  std::size_t w = 0, h = 0, ch = 0;
  std::string idat;
  bool seen_end = false;
  while (pos + 12 <= bytes.size() && !seen_end) {
    const auto len = detail::get_be32(p + pos);
    const std::string_view type(bytes.data() + pos + 4, 4);
    if (pos + 12 + len > bytes.size()) throw Error("truncated PNG chunk");
    const auto* data = p + pos + 8;
    const auto crc = crc32(0L, p + pos + 4, static_cast<uInt>(len + 4));
    if (crc != detail::get_be32(data + len)) throw Error("PNG CRC mismatch in chunk " + std::string(type));
    if (type == "IHDR") {
      w = detail::get_be32(data);
      h = detail::get_be32(data + 4);
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
        throw Error("unsupported PNG variant (need 8-bit gray/RGB, non-interlaced)");
      ch = color == 2 ? 3 : 1;
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(data), len);
    } else if (type == "IEND") {
      seen_end = true;
    }
    pos += 12 + len;
  }
  if (w == 0 || h == 0 || ch == 0) throw Error("PNG missing IHDR");
  const std::size_t stride = w * ch;
  std::vector<unsigned char> raw((stride + 1) * h);
  uLongf rawlen = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &rawlen, reinterpret_cast<const Bytef*>(idat.data()), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      rawlen != raw.size())
    throw Error("PNG image data is corrupt");

  RasterImage img(w, h, ch);
  std::vector<unsigned char> prev(stride, 0), cur(stride);
  for (std::size_t y = 0; y < h; ++y) {
    const unsigned char filter = raw[y * (stride + 1)];
    const unsigned char* src = &raw[y * (stride + 1) + 1];
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= ch ? cur[i - ch] : 0;
      const int b = prev[i];
      const int c = i >= ch ? prev[i - ch] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = detail::paeth(a, b, c); break;
        default: throw Error("bad PNG filter type");
      }
      cur[i] = static_cast<unsigned char>(src[i] + pred);
    }
    std::copy(cur.begin(), cur.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride));
    std::swap(prev, cur);
  }
  return img;
}

inline RasterImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_png(ss.str());
}

// ---------------------------------------------------------------------------
// Colormaps

using Colormap = std::array<std::array<std::uint8_t, 3>, 256>;

namespace detail {

inline std::uint8_t unit_to_byte(double v) {
  return static_cast<std::uint8_t>(round_half_away(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

// MATLAB-style jet: piecewise-linear blue -> cyan -> yellow -> red.
inline Colormap jet_colormap() {
  Colormap m{};
  for (int i = 0; i < 256; ++i) {
    const double x = i / 255.0;
    m[i] = {detail::unit_to_byte(1.5 - std::abs(4.0 * x - 3.0)), detail::unit_to_byte(1.5 - std::abs(4.0 * x - 2.0)),
            detail::unit_to_byte(1.5 - std::abs(4.0 * x - 1.0))};
  }
  return m;
}

inline Colormap gray_colormap() {
  Colormap m{};
  for (int i = 0; i < 256; ++i) {
    const auto v = static_cast<std::uint8_t>(i);
    m[i] = {v, v, v};
  }
  return m;
}

// Black -> red -> yellow -> white.
inline Colormap hot_colormap() {
  Colormap m{};
  for (int i = 0; i < 256; ++i) {
    const double x = i / 255.0;
    m[i] = {detail::unit_to_byte(3.0 * x), detail::unit_to_byte(3.0 * x - 1.0), detail::unit_to_byte(3.0 * x - 2.0)};
  }
  return m;
}

inline const std::vector<std::string>& colormap_names() {
  static const std::vector<std::string> names{"jet", "gray", "hot"};
  return names;
}

inline Colormap colormap_by_name(std::string_view name) {
  if (name == "jet") return jet_colormap();
  if (name == "gray" || name == "grey") return gray_colormap();
  if (name == "hot") return hot_colormap();
  throw Error("unknown colormap '" + std::string(name) + "' (known: jet, gray, hot)");
}

// Maps a one-channel 0..255 image through a colormap.
inline RasterImage apply_colormap(const RasterImage& gray, const Colormap& m) {
  if (gray.channels != 1) throw Error("apply_colormap expects a one-channel image");
  RasterImage out(gray.width, gray.height, 3);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out.pixels[3 * i + c] = m[gray.pixels[i]][c];
  return out;
}

/// 256 rows of "r,g,b" integers, no header.
inline Colormap load_colormap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open colormap '" + path.string() + "'");
  Colormap m{};
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row >= 256) throw Error("colormap '" + path.string() + "' has more than 256 rows");
    std::istringstream ls(line);
    int rgb[3];
    char sep;
    if (!(ls >> rgb[0] >> sep >> rgb[1] >> sep >> rgb[2]))
      throw ParseError("colormap row " + std::to_string(row + 1) + " is not 'r,g,b'", row + 1, 0);
    for (int c = 0; c < 3; ++c) {
      if (rgb[c] < 0 || rgb[c] > 255)
        throw ParseError("colormap row " + std::to_string(row + 1) + " value out of 0..255", row + 1, c + 1);
      m[row][c] = static_cast<std::uint8_t>(rgb[c]);
    }
    ++row;
  }
  if (row != 256) throw Error("colormap '" + path.string() + "' has " + std::to_string(row) + " rows, need 256");
  return m;
}

inline void save_colormap_csv(const std::filesystem::path& path, const Colormap& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& e : m) out << int(e[0]) << ',' << int(e[1]) << ',' << int(e[2]) << '\n';
}

}  // namespace gasfeeg
