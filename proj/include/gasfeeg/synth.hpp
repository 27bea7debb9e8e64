#pragma once

// Two-class synthetic EEG-like recordings so every pipeline runs without
// external data.
//   normal: A_n sin(2 pi f t + phase) + N(0, noise)
//   focal:  periodic Gaussian spikes of height A_s, period P, width w
//           (in samples, as the Gaussian sigma) + N(0, noise)

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "gasfeeg/common.hpp"
#include "gasfeeg/ingest.hpp"

namespace gasfeeg {

struct SynthConfig {
  std::size_t records_per_class = 5;
  std::size_t samples_per_record = 12800;
  double sampling_rate_hz = 512.0;
  double sine_hz = 5.0;
  double sine_amplitude = 50.0;
  double spike_amplitude = 150.0;
  double spike_period_s = 0.2;
  double spike_width_samples = 3.0;
  double noise_stddev = 20.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (records_per_class < 1) throw ConfigError("synth.records_per_class must be >= 1");
    if (samples_per_record < 2) throw ConfigError("synth.samples_per_record must be >= 2");
    if (!(sampling_rate_hz > 0.0)) throw ConfigError("synth.sampling_rate_hz must be positive");
    if (!(spike_period_s > 0.0) || !(spike_width_samples > 0.0))
      throw ConfigError("synth spike period and width must be positive");
    if (noise_stddev < 0.0) throw ConfigError("synth.noise_stddev must be >= 0");
  }
};

/// Record `index` of class `label`; each (seed, class, index) has its own stream.
inline std::vector<double> synth_record(const SynthConfig& cfg, Label label, std::size_t index) {
  cfg.validate();
  Rng rng(cfg.seed, 1000u * (static_cast<std::uint64_t>(label) + 1) + index);
  const std::size_t n = cfg.samples_per_record;
  const double fs = cfg.sampling_rate_hz;
  std::vector<double> x(n);
  if (label == Label::Normal) {
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = cfg.sine_amplitude * std::sin(2.0 * std::numbers::pi * cfg.sine_hz * static_cast<double>(i) / fs + phase);
  } else {
    const double period = cfg.spike_period_s * fs;
    const double offset = rng.uniform(0.0, period);
    const double w = cfg.spike_width_samples;
    for (std::size_t i = 0; i < n; ++i) {
      // Distance to the nearest spike centre offset + k * period.
      const double t = static_cast<double>(i) - offset;
      const double d = t - period * std::round(t / period);
      x[i] = cfg.spike_amplitude * std::exp(-d * d / (2.0 * w * w));
    }
  }
  for (auto& v : x) v += rng.normal(0.0, cfg.noise_stddev);
  return x;
}

inline std::string synth_record_name(Label label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec_%c_%03zu.csv", label == Label::Focal ? 'F' : 'N', index);
  return buf;
}

/// Writes <dir>/normal/*.csv and <dir>/focal/*.csv, one sample per row.
/// Returns the written paths in a fixed order (normal first).
inline std::vector<std::filesystem::path> write_synth_dataset(const std::filesystem::path& dir, const SynthConfig& cfg) {
  cfg.validate();
  std::vector<std::filesystem::path> out;
  for (Label label : {Label::Normal, Label::Focal}) {
    const auto sub = dir / std::string(to_string(label));
    std::filesystem::create_directories(sub);
    for (std::size_t r = 0; r < cfg.records_per_class; ++r) {
      const auto p = sub / synth_record_name(label, r);
      write_record(p, synth_record(cfg, label, r));
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace gasfeeg
