#pragma once

// Delimited EEG recordings -> fixed-length labelled epochs -> split manifest.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gasfeeg/common.hpp"

namespace gasfeeg {

struct Signal {
  std::vector<double> samples;
  double sampling_rate_hz = 512.0;
  std::string source_id;
  std::size_t channel_index = 0;
};

struct Epoch {
  std::vector<double> samples;
  Label label = Label::Normal;
  std::string parent_id;
  std::size_t start_index = 0;
};

enum class Split { Train, Validation };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "validation"; }

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val") return Split::Validation;
  throw Error("unknown split '" + std::string(s) + "'");
}

struct ManifestEntry {
  std::string source;  // path of the recording the epoch was cut from
  std::string source_id;
  std::size_t start_index = 0;
  Label label = Label::Normal;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::size_t epoch_len = 256;
  std::uint64_t seed = 0;
  double split_fraction = 0.8;

  std::size_t count(Label l, Split s) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += (e.label == l && e.split == s);
    return n;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  if (delim == ' ' || delim == '\t') {
    // Whitespace-delimited files commonly pad columns with runs of blanks.
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Accepts decimal and scientific notation; rejects nan/inf and trailing junk.
inline bool parse_finite(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

}  // namespace detail

/// Reads one channel of a delimited text recording. One sample per non-blank
/// row, in row order. Rows and columns in error messages are 1-based.
inline Signal read_record(const std::filesystem::path& path, char delimiter = ',',
                          std::size_t channel_index = 0, double sampling_rate_hz = 512.0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recording '" + path.string() + "'");
  if (!(sampling_rate_hz > 0.0)) throw Error("sampling rate must be positive");

  Signal sig;
  sig.sampling_rate_hz = sampling_rate_hz;
  sig.source_id = path.stem().string();
  sig.channel_index = channel_index;

  std::string line;
  std::size_t row = 0;
  std::size_t expected_cols = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto content = detail::trim(line);
    if (content.empty()) continue;
    const auto fields = detail::split_fields(content, delimiter);
    if (expected_cols == 0) {
      expected_cols = fields.size();
      if (channel_index >= expected_cols)
        throw ParseError("channel index " + std::to_string(channel_index) + " out of range: row " +
                             std::to_string(row) + " has " + std::to_string(expected_cols) + " column(s)",
                         row, 0);
    } else if (fields.size() != expected_cols) {
      throw ParseError("ragged row " + std::to_string(row) + ": expected " + std::to_string(expected_cols) +
                           " column(s), got " + std::to_string(fields.size()),
                       row, 0);
    }
    double v = 0.0;
    if (!detail::parse_finite(fields[channel_index], v))
      throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(channel_index + 1) +
                           ": not a finite number '" + std::string(fields[channel_index]) + "'",
                       row, channel_index + 1);
    sig.samples.push_back(v);
  }
  if (sig.samples.empty()) throw Error("no samples in '" + path.string() + "'");
  return sig;
}

/// Writes single-column text with 17 significant digits, which round-trips
/// IEEE doubles exactly through read_record.
inline void write_record(const std::filesystem::path& path, std::span<const double> samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  char buf[32];
  for (double v : samples) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

/// Cuts a signal into floor(N / epoch_len) consecutive, non-overlapping
/// epochs. The trailing remainder is dropped.
inline std::vector<Epoch> split_epochs(const Signal& signal, std::size_t epoch_len, Label label) {
  if (epoch_len < 2) throw Error("epoch_len must be at least 2");
  if (signal.samples.size() < epoch_len)
    throw Error("signal '" + signal.source_id + "' has " + std::to_string(signal.samples.size()) +
                " samples, shorter than epoch_len " + std::to_string(epoch_len));
  const std::size_t n = signal.samples.size() / epoch_len;
  std::vector<Epoch> out;
  out.reserve(n);
  for (std::size_t e = 0; e < n; ++e) {
    Epoch ep;
    const auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(e * epoch_len);
    ep.samples.assign(first, first + static_cast<std::ptrdiff_t>(epoch_len));
    ep.label = label;
    ep.parent_id = signal.source_id;
    ep.start_index = e * epoch_len;
    out.push_back(std::move(ep));
  }
  return out;
}

/// Epoch reference used to build a manifest; `source` is the file path the
/// epoch can be re-read from.
struct EpochRef {
  std::string source;
  std::string source_id;
  std::size_t start_index = 0;
};

/// Stratified, seeded train/validation split. Train count per class is
/// round(split_fraction * class size), clamped so both splits are non-empty.
/// Entries are ordered: normal-train, focal-train, normal-val, focal-val, each
/// in shuffled order.
inline DatasetManifest build_manifest(const std::vector<EpochRef>& normal, const std::vector<EpochRef>& focal,
                                      double split_fraction, std::uint64_t seed, std::size_t epoch_len = 256) {
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw Error("split_fraction must lie strictly between 0 and 1");
  if (normal.size() < 2 || focal.size() < 2)
    throw Error("each class needs at least 2 epochs to stratify (normal=" + std::to_string(normal.size()) +
                ", focal=" + std::to_string(focal.size()) + ")");

  DatasetManifest m;
  m.epoch_len = epoch_len;
  m.seed = seed;
  m.split_fraction = split_fraction;

  struct Part {
    std::vector<ManifestEntry> train, val;
  };
  auto split_class = [&](const std::vector<EpochRef>& refs, Label label, std::uint64_t stream) {
    std::vector<std::size_t> idx(refs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed, stream);
    rng.shuffle(idx.begin(), idx.end());
    auto n_train = static_cast<std::size_t>(round_half_away(split_fraction * static_cast<double>(refs.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, refs.size() - 1);
    Part p;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& r = refs[idx[k]];
      ManifestEntry e{r.source, r.source_id, r.start_index, label, k < n_train ? Split::Train : Split::Validation};
      (k < n_train ? p.train : p.val).push_back(std::move(e));
    }
    return p;
  };
  auto pn = split_class(normal, Label::Normal, 0);
  auto pf = split_class(focal, Label::Focal, 1);
  for (auto* v : {&pn.train, &pf.train, &pn.val, &pf.val})
    for (auto& e : *v) m.entries.push_back(std::move(e));
  return m;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["epoch_len"] = m.epoch_len;
  j["seed"] = m.seed;
  j["split_fraction"] = m.split_fraction;
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries)
    arr.push_back({{"source", e.source},
                   {"source_id", e.source_id},
                   {"start_index", e.start_index},
                   {"label", to_string(e.label)},
                   {"split", to_string(e.split)}});
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.epoch_len = j.at("epoch_len").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.split_fraction = j.value("split_fraction", 0.8);
  for (const auto& e : j.at("entries")) {
    ManifestEntry me;
    me.source = e.at("source").get<std::string>();
    me.source_id = e.at("source_id").get<std::string>();
    me.start_index = e.at("start_index").get<std::size_t>();
    me.label = label_from_string(e.at("label").get<std::string>());
    me.split = split_from_string(e.at("split").get<std::string>());
    m.entries.push_back(std::move(me));
  }
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << to_json(m).dump(2) << '\n';
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  return manifest_from_json(nlohmann::json::parse(in));
}

}  // namespace gasfeeg
