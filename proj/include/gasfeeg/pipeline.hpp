#pragma once

// Configuration-driven orchestration: ingest -> encode -> CNN, and
// ingest -> transforms -> texture -> swarm selection -> dense ANN. Every
// stage writes its artifacts under RunConfig::out_dir and a run manifest
// records config, seeds, input digests, artifacts and stage timings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gasfeeg/common.hpp"
#include "gasfeeg/encode.hpp"
#include "gasfeeg/eval.hpp"
#include "gasfeeg/image.hpp"
#include "gasfeeg/ingest.hpp"
#include "gasfeeg/nn/checkpoint.hpp"
#include "gasfeeg/select.hpp"
#include "gasfeeg/texture.hpp"
#include "gasfeeg/tfr.hpp"

namespace gasfeeg {

enum class PipelineKind { GasfCnn, FeatureAnn, EncodeOnly, FeaturesOnly, EvalOnly };

inline std::string_view to_string(PipelineKind k) {
  switch (k) {
    case PipelineKind::GasfCnn: return "gasf-cnn";
    case PipelineKind::FeatureAnn: return "feature-ann";
    case PipelineKind::EncodeOnly: return "encode";
    case PipelineKind::FeaturesOnly: return "features";
    case PipelineKind::EvalOnly: return "eval";
  }
  return "?";
}

inline PipelineKind pipeline_from_string(std::string_view s) {
  for (auto k : {PipelineKind::GasfCnn, PipelineKind::FeatureAnn, PipelineKind::EncodeOnly, PipelineKind::FeaturesOnly,
                 PipelineKind::EvalOnly})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown pipeline '" + std::string(s) + "'");
}

struct AugmentRanges {
  double max_rotation_deg = 10.0;
  int max_shift = 3;
  double max_shear = 0.1;
};

struct RunConfig {
  std::string data_root;
  char delimiter = ',';
  std::size_t channel = 0;
  double sampling_rate_hz = 512.0;
  std::size_t epoch_len = 256;
  double split_fraction = 0.8;
  std::size_t max_epochs_per_class = 0;  // 0 = no cap

  Scaling scaling = Scaling::UnitSigned;
  std::string colormap = "jet";
  std::size_t image_size = 64;  // CNN input side; PNGs keep epoch_len x epoch_len
  bool save_images = true;

  double cnn_scale = 0.25;
  nn::TrainConfig cnn_train{};
  AugmentRanges augment{};

  TextureSettings texture{};
  SwarmConfig swarm{};
  bool use_selection = true;
  std::string pso_fitness = "knn";     // knn | ann
  std::size_t pso_ann_epochs = 30;     // per fold, only for pso_fitness == "ann"
  std::vector<std::size_t> ann_hidden{16, 8};
  nn::TrainConfig ann_train = default_ann_train();

  std::string out_dir = "out";
  std::string checkpoint;  // model to evaluate in EvalOnly
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  static nn::TrainConfig default_ann_train() {
    nn::TrainConfig t;
    t.epochs = 200;
    t.batch_size = 16;
    t.learning_rate = 1e-2;
    return t;
  }

  // Copies the master seed and thread count into every stochastic/parallel stage.
  void propagate() {
    cnn_train.seed = ann_train.seed = swarm.seed = seed;
    cnn_train.threads = ann_train.threads = swarm.threads = threads;
  }

  void validate(PipelineKind kind) const {
    const auto fail = [](const std::string& field, const std::string& why) {
      throw ConfigError("invalid config field '" + field + "': " + why);
    };
    if (data_root.empty()) fail("data_root", "not set (use --data-root or GASFEEG_DATA_ROOT)");
    if (!std::filesystem::is_directory(data_root)) fail("data_root", "'" + data_root + "' is not a directory");
    if (epoch_len < 2) fail("epoch_len", "must be >= 2");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) fail("split_fraction", "must lie in (0, 1)");
    if (!(sampling_rate_hz > 0.0)) fail("sampling_rate_hz", "must be positive");
    if (threads < 1) fail("threads", "must be >= 1");
    if (out_dir.empty()) fail("out_dir", "must not be empty");
    try {
      (void)colormap_by_name(colormap);
    } catch (const Error&) {
      fail("encode.colormap", "unknown colormap '" + colormap + "'");
    }
    if (image_size < 16) fail("encode.image_size", "must be >= 16");
    if (kind == PipelineKind::GasfCnn || kind == PipelineKind::EvalOnly) {
      if (!(cnn_scale > 0.0 && cnn_scale <= 1.0)) fail("cnn.scale", "must lie in (0, 1]");
      validate_train(cnn_train, "cnn");
    }
    if (kind == PipelineKind::FeatureAnn || kind == PipelineKind::FeaturesOnly) {
      if (texture.levels < 2 || texture.levels > 256) fail("texture.levels", "must lie in [2, 256]");
      if (texture.tfr.stft_window_len < 2 || texture.tfr.stft_window_len > epoch_len)
        fail("tfr.stft_window_len", "must lie in [2, epoch_len]");
      if (texture.tfr.stft_hop < 1) fail("tfr.stft_hop", "must be >= 1");
      if (texture.tfr.set_window_len < 2 || texture.tfr.set_window_len > epoch_len)
        fail("tfr.set_window_len", "must lie in [2, epoch_len]");
      if (texture.tfr.wvd_window_len < 1 || texture.tfr.wvd_window_len % 2 == 0)
        fail("tfr.wvd_window_len", "must be odd and >= 1");
    }
    if (kind == PipelineKind::FeatureAnn) {
      try {
        swarm.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("invalid config field in 'pso': ") + e.what());
      }
      if (pso_fitness != "knn" && pso_fitness != "ann") fail("pso.fitness", "must be knn or ann");
      if (pso_ann_epochs < 1) fail("pso.ann_epochs", "must be >= 1");
      if (ann_hidden.empty()) fail("ann.hidden", "needs at least one hidden width");
      for (auto h : ann_hidden)
        if (h == 0) fail("ann.hidden", "widths must be >= 1");
      validate_train(ann_train, "ann");
    }
    if (kind == PipelineKind::EvalOnly) {
      if (checkpoint.empty()) fail("checkpoint", "not set");
      if (!std::filesystem::is_regular_file(checkpoint)) fail("checkpoint", "'" + checkpoint + "' does not exist");
    }
  }

 private:
  static void validate_train(const nn::TrainConfig& t, const std::string& section) {
    try {
      t.validate();
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      for (auto pos = msg.find("train."); pos != std::string::npos; pos = msg.find("train.", pos + section.size() + 1))
        msg.replace(pos, 6, section + ".");
      throw ConfigError("invalid config field: " + msg);
    }
  }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {

inline nlohmann::json train_json(const nn::TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"optimizer", nn::to_string(t.optimizer)},
          {"monitor_epochs", t.monitor_epochs},
          {"early_stopping", t.early_stopping},
          {"restarts", t.restarts},
          {"augment", t.augment}};
}

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("config section '" + label() + "' must be an object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field '" + prefix_ + key + "' has the wrong type");
    }
  }

  template <class Fn>
  void get_with(const char* key, Fn&& fn) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      fn(j_.at(key));
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field '" + prefix_ + key + "' has the wrong type");
    } catch (const ConfigError& e) {
      throw ConfigError("config field '" + prefix_ + key + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError("config field '" + prefix_ + key + "': " + e.what());
    }
  }

  template <class Fn>
  void section(const char* key, Fn&& fn) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    ConfigReader sub(j_.at(key), prefix_ + key + ".");
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError("unknown config field '" + prefix_ + it.key() + "'");
  }

 private:
  std::string label() const { return prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1); }

  const nlohmann::json& j_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

inline void read_train(ConfigReader& r, nn::TrainConfig& t) {
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("learning_rate", t.learning_rate);
  r.get_with("optimizer", [&](const nlohmann::json& v) { t.optimizer = nn::optimizer_from_string(v.get<std::string>()); });
  r.get("monitor_epochs", t.monitor_epochs);
  r.get("early_stopping", t.early_stopping);
  r.get("restarts", t.restarts);
  r.get("augment", t.augment);
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& o : c.texture.offsets) offsets.push_back({o.dx, o.dy});
  return {
      {"data_root", c.data_root},
      {"delimiter", std::string(1, c.delimiter)},
      {"channel", c.channel},
      {"sampling_rate_hz", c.sampling_rate_hz},
      {"epoch_len", c.epoch_len},
      {"split_fraction", c.split_fraction},
      {"max_epochs_per_class", c.max_epochs_per_class},
      {"seed", c.seed},
      {"threads", c.threads},
      {"out_dir", c.out_dir},
      {"checkpoint", c.checkpoint},
      {"encode",
       {{"scaling", to_string(c.scaling)},
        {"colormap", c.colormap},
        {"image_size", c.image_size},
        {"save_images", c.save_images}}},
      {"cnn", [&] {
         auto j = detail::train_json(c.cnn_train);
         j["scale"] = c.cnn_scale;
         return j;
       }()},
      {"augment",
       {{"max_rotation_deg", c.augment.max_rotation_deg},
        {"max_shift", c.augment.max_shift},
        {"max_shear", c.augment.max_shear}}},
      {"tfr",
       {{"stft_window", to_string(c.texture.tfr.stft_window)},
        {"stft_window_len", c.texture.tfr.stft_window_len},
        {"stft_hop", c.texture.tfr.stft_hop},
        {"wvd_window", to_string(c.texture.tfr.wvd_window)},
        {"wvd_window_len", c.texture.tfr.wvd_window_len},
        {"set_window_len", c.texture.tfr.set_window_len},
        {"set_hop", c.texture.tfr.set_hop},
        {"set_delta_bins", c.texture.tfr.set_delta_bins}}},
      {"texture",
       {{"levels", c.texture.levels},
        {"symmetric", c.texture.symmetric},
        {"log_compress", c.texture.log_compress},
        {"offsets", offsets},
        {"source", c.texture.source == FeatureSource::Gasf ? "gasf" : "transforms"}}},
      {"pso",
       {{"particles", c.swarm.particles},
        {"iterations", c.swarm.iterations},
        {"inertia", c.swarm.inertia},
        {"c1", c.swarm.c1},
        {"c2", c.swarm.c2},
        {"v_max", c.swarm.v_max},
        {"folds", c.swarm.folds},
        {"enabled", c.use_selection},
        {"fitness", c.pso_fitness},
        {"ann_epochs", c.pso_ann_epochs}}},
      {"ann", [&] {
         auto j = detail::train_json(c.ann_train);
         j["hidden"] = c.ann_hidden;
         return j;
       }()},
  };
}

/// Applies the fields present in `j` on top of `base`. A run manifest (an
/// object with a "config" key) is accepted in place of a bare config.
inline RunConfig run_config_from_json(const nlohmann::json& j_in, RunConfig base = {}) {
  const nlohmann::json& j = (j_in.is_object() && j_in.contains("config") && j_in.contains("pipeline")) ? j_in.at("config") : j_in;
  RunConfig c = std::move(base);
  detail::ConfigReader r(j, "");
  r.get("data_root", c.data_root);
  r.get_with("delimiter", [&](const nlohmann::json& v) {
    const auto s = v.get<std::string>();
    if (s.size() != 1 && s != "\\t" && s != "tab") throw ConfigError("must be a single character");
    c.delimiter = (s == "\\t" || s == "tab") ? '\t' : s[0];
  });
  r.get("channel", c.channel);
  r.get("sampling_rate_hz", c.sampling_rate_hz);
  r.get("epoch_len", c.epoch_len);
  r.get("split_fraction", c.split_fraction);
  r.get("max_epochs_per_class", c.max_epochs_per_class);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("out_dir", c.out_dir);
  r.get("checkpoint", c.checkpoint);
  r.section("encode", [&](detail::ConfigReader& s) {
    s.get_with("scaling", [&](const nlohmann::json& v) { c.scaling = scaling_from_string(v.get<std::string>()); });
    s.get("colormap", c.colormap);
    s.get("image_size", c.image_size);
    s.get("save_images", c.save_images);
  });
  r.section("cnn", [&](detail::ConfigReader& s) {
    s.get("scale", c.cnn_scale);
    detail::read_train(s, c.cnn_train);
  });
  r.section("augment", [&](detail::ConfigReader& s) {
    s.get("max_rotation_deg", c.augment.max_rotation_deg);
    s.get("max_shift", c.augment.max_shift);
    s.get("max_shear", c.augment.max_shear);
  });
  r.section("tfr", [&](detail::ConfigReader& s) {
    auto& t = c.texture.tfr;
    s.get_with("stft_window", [&](const nlohmann::json& v) { t.stft_window = window_from_string(v.get<std::string>()); });
    s.get("stft_window_len", t.stft_window_len);
    s.get("stft_hop", t.stft_hop);
    s.get_with("wvd_window", [&](const nlohmann::json& v) { t.wvd_window = window_from_string(v.get<std::string>()); });
    s.get("wvd_window_len", t.wvd_window_len);
    s.get("set_window_len", t.set_window_len);
    s.get("set_hop", t.set_hop);
    s.get("set_delta_bins", t.set_delta_bins);
  });
  r.section("texture", [&](detail::ConfigReader& s) {
    s.get("levels", c.texture.levels);
    s.get("symmetric", c.texture.symmetric);
    s.get("log_compress", c.texture.log_compress);
    s.get_with("offsets", [&](const nlohmann::json& v) {
      c.texture.offsets.clear();
      for (const auto& o : v) c.texture.offsets.push_back({o.at(0).get<int>(), o.at(1).get<int>()});
      if (c.texture.offsets.empty()) throw ConfigError("needs at least one offset");
    });
    s.get_with("source", [&](const nlohmann::json& v) { c.texture.source = feature_source_from_string(v.get<std::string>()); });
  });
  r.section("pso", [&](detail::ConfigReader& s) {
    s.get("particles", c.swarm.particles);
    s.get("iterations", c.swarm.iterations);
    s.get("inertia", c.swarm.inertia);
    s.get("c1", c.swarm.c1);
    s.get("c2", c.swarm.c2);
    s.get("v_max", c.swarm.v_max);
    s.get("folds", c.swarm.folds);
    s.get("enabled", c.use_selection);
    s.get("fitness", c.pso_fitness);
    s.get("ann_epochs", c.pso_ann_epochs);
  });
  r.section("ann", [&](detail::ConfigReader& s) {
    s.get("hidden", c.ann_hidden);
    detail::read_train(s, c.ann_train);
  });
  r.finish();
  c.texture.gasf_scaling = c.scaling;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

// ---------------------------------------------------------------------------
// Ingest stage

struct InputDigest {
  std::string path;
  std::uint64_t fnv1a64 = 0;
};

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t file_digest(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

struct LabelledFile {
  std::filesystem::path path;
  Label label;
};

/// Recordings under `root`: files in normal/ and focal/ subdirectories, or,
/// failing that, files directly in `root` whose names contain "_N_" or "_F_".
/// Sorted by path for a stable order.
inline std::vector<LabelledFile> discover_recordings(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<LabelledFile> out;
  const auto list = [](const fs::path& dir) {
    std::vector<fs::path> v;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename().string().front() != '.') v.push_back(e.path());
    std::sort(v.begin(), v.end());
    return v;
  };
  if (fs::is_directory(root / "normal") && fs::is_directory(root / "focal")) {
    for (auto& p : list(root / "normal")) out.push_back({p, Label::Normal});
    for (auto& p : list(root / "focal")) out.push_back({p, Label::Focal});
  } else {
    for (auto& p : list(root)) {
      const auto name = p.filename().string();
      if (name.find("_F_") != std::string::npos) out.push_back({p, Label::Focal});
      else if (name.find("_N_") != std::string::npos) out.push_back({p, Label::Normal});
    }
  }
  if (out.empty()) throw Error("no labelled recordings found under '" + root.string() + "'");
  return out;
}

struct LoadedData {
  DatasetManifest manifest;
  std::vector<std::vector<double>> samples;  // aligned with manifest.entries
  std::vector<InputDigest> digests;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      if (manifest.entries[i].split == s) v.push_back(i);
    return v;
  }
};

inline LoadedData load_dataset(const RunConfig& cfg) {
  const auto files = discover_recordings(cfg.data_root);
  std::vector<std::vector<Epoch>> per_file(files.size());
  std::vector<std::uint64_t> digests(files.size());
  parallel_for(files.size(), cfg.threads, [&](std::size_t i) {
    const auto sig = read_record(files[i].path, cfg.delimiter, cfg.channel, cfg.sampling_rate_hz);
    per_file[i] = split_epochs(sig, cfg.epoch_len, files[i].label);
    digests[i] = file_digest(files[i].path);
  });

  LoadedData d;
  std::map<std::pair<std::string, std::size_t>, const Epoch*> lookup;
  std::vector<EpochRef> normal, focal;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto rel = std::filesystem::relative(files[i].path, cfg.data_root).generic_string();
    d.digests.push_back({rel, digests[i]});
    auto& dst = files[i].label == Label::Focal ? focal : normal;
    for (const auto& ep : per_file[i]) {
      if (cfg.max_epochs_per_class && dst.size() >= cfg.max_epochs_per_class) break;
      dst.push_back({rel, ep.parent_id, ep.start_index});
      lookup[{rel, ep.start_index}] = &ep;
    }
  }
  d.manifest = build_manifest(normal, focal, cfg.split_fraction, cfg.seed, cfg.epoch_len);
  for (const auto& e : d.manifest.entries) d.samples.push_back(lookup.at({e.source, e.start_index})->samples);
  return d;
}

// ---------------------------------------------------------------------------
// Encode stage

inline RasterImage render_epoch(std::span<const double> epoch, const RunConfig& cfg) {
  return render_rgb(encode_gasf(epoch, cfg.scaling), colormap_by_name(cfg.colormap));
}

template <class T>
void image_to_tensor(const RasterImage& img, T* dst) {
  for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = static_cast<T>(img.pixels[i]) / T(255);
}

template <class T>
RasterImage tensor_to_image(const T* src, std::size_t w, std::size_t h, std::size_t c) {
  RasterImage img(w, h, c, 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(round_half_away(static_cast<double>(src[i]) * 255.0), 0.0, 255.0));
  return img;
}

/// Renders the given entries, optionally writing full-size PNGs, and returns
/// an (N, image_size, image_size, 3) tensor scaled to [0, 1].
inline nn::Tensor<float> encode_stage(const LoadedData& d, std::span<const std::size_t> which, const RunConfig& cfg,
                                      std::vector<std::string>* written = nullptr) {
  namespace fs = std::filesystem;
  const std::size_t S = cfg.image_size;
  nn::Tensor<float> t({which.size(), S, S, 3});
  std::vector<std::string> paths(which.size());
  if (cfg.save_images) {
    fs::create_directories(fs::path(cfg.out_dir) / "images" / "train");
    fs::create_directories(fs::path(cfg.out_dir) / "images" / "validation");
  }
  parallel_for(which.size(), cfg.threads, [&](std::size_t k) {
    const auto& e = d.manifest.entries[which[k]];
    const auto full = render_epoch(d.samples[which[k]], cfg);
    if (cfg.save_images) {
      const auto p = fs::path(cfg.out_dir) / "images" / std::string(to_string(e.split)) /
                     epoch_image_name(e.source_id, e.start_index, e.label);
      write_png(p, full);
      paths[k] = p.generic_string();
    }
    const auto small = (full.width == S && full.height == S) ? full : resize_image(full, S, S);
    image_to_tensor(small, t.sample(k));
  });
  if (written)
    for (auto& p : paths)
      if (!p.empty()) written->push_back(std::move(p));
  return t;
}

inline nn::Augmenter<float> make_image_augmenter(const AugmentRanges& r) {
  return [r](float* sample, const nn::Shape& shape, Rng& rng) {
    const auto img = tensor_to_image(sample, shape[1], shape[0], shape[2]);
    AugmentParams p;
    p.rotation_deg = rng.uniform(-r.max_rotation_deg, r.max_rotation_deg);
    p.shift_x = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * r.max_shift + 1))) - r.max_shift;
    p.shift_y = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * r.max_shift + 1))) - r.max_shift;
    p.shear = rng.uniform(-r.max_shear, r.max_shear);
    image_to_tensor(augment_image(img, p), sample);
  };
}

// ---------------------------------------------------------------------------
// Feature stage

inline std::vector<FeatureVector> features_stage(const LoadedData& d, std::span<const std::size_t> which,
                                                 const RunConfig& cfg) {
  std::vector<FeatureVector> out(which.size());
  parallel_for(which.size(), cfg.threads, [&](std::size_t k) {
    try {
      out[k] = assemble_feature_vector(d.samples[which[k]], cfg.texture);
    } catch (const Error& e) {
      const auto& en = d.manifest.entries[which[k]];
      throw Error(std::string(e.what()) + " (epoch " + en.source_id + "@" + std::to_string(en.start_index) + ")");
    }
  });
  return out;
}

/// Column standardization fitted on training rows; constant columns get scale 1.
struct Standardizer {
  std::vector<std::size_t> columns;
  std::vector<double> mean, scale;

  static Standardizer fit(const std::vector<FeatureVector>& rows, std::vector<std::size_t> columns) {
    Standardizer s;
    s.columns = std::move(columns);
    const double n = static_cast<double>(rows.size());
    for (auto c : s.columns) {
      double m = 0.0, v = 0.0;
      for (const auto& r : rows) m += r[c];
      m /= n;
      for (const auto& r : rows) v += (r[c] - m) * (r[c] - m);
      const double sd = std::sqrt(v / n);
      s.mean.push_back(m);
      s.scale.push_back(sd > 0.0 ? sd : 1.0);
    }
    return s;
  }

  nn::Tensor<float> transform(const std::vector<FeatureVector>& rows) const {
    nn::Tensor<float> t({rows.size(), columns.size()});
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < columns.size(); ++k)
        t.data[i * columns.size() + k] = static_cast<float>((rows[i][columns[k]] - mean[k]) / scale[k]);
    return t;
  }

  nlohmann::json to_json() const { return {{"columns", columns}, {"mean", mean}, {"scale", scale}}; }
  static Standardizer from_json(const nlohmann::json& j) {
    Standardizer s;
    s.columns = j.at("columns").get<std::vector<std::size_t>>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    return s;
  }
};

/// Swarm fitness that trains the dense ANN itself: mean stratified k-fold
/// validation accuracy. Each fold standardizes on its training rows and keeps
/// the snapshot that fits those rows best, so the held-out fold is only
/// scored, never used for model choice.
inline double ann_wrapper_fitness(const std::vector<bool>& mask, const FeatureMatrix& features,
                                  std::span<const Label> labels, const RunConfig& cfg) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) cols.push_back(c);
  if (cols.empty()) throw Error("ann_wrapper_fitness: empty feature mask");
  const auto fold_of = stratified_folds(labels, cfg.swarm.folds, cfg.swarm.seed);
  auto tcfg = cfg.ann_train;
  tcfg.epochs = cfg.pso_ann_epochs;
  tcfg.monitor_epochs = std::min(tcfg.monitor_epochs, tcfg.epochs);
  tcfg.augment = false;
  tcfg.early_stopping = false;
  tcfg.restarts = 1;
  tcfg.threads = 1;
  double acc_sum = 0.0;
  for (std::size_t f = 0; f < cfg.swarm.folds; ++f) {
    std::vector<FeatureVector> rtr, rte;
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      FeatureVector fv;
      std::copy_n(features[i].begin(), kFeatureCount, fv.values.begin());
      (fold_of[i] == f ? rte : rtr).push_back(fv);
      (fold_of[i] == f ? yte : ytr).push_back(static_cast<int>(labels[i]));
    }
    const auto sc = Standardizer::fit(rtr, cols);
    nn::Dataset<float> dtr{sc.transform(rtr), ytr};
    auto net = nn::build_dense_ann<float>(cols.size(), cfg.ann_hidden, cfg.seed + f);
    auto ck = nn::train(net, dtr, dtr, tcfg);
    acc_sum += nn::accuracy(nn::argmax_rows(nn::predict(ck.network, sc.transform(rte))), yte);
  }
  return acc_sum / static_cast<double>(cfg.swarm.folds);
}

// ---------------------------------------------------------------------------
// Run manifest and pipeline driver

struct RunReport {
  PipelineKind pipeline = PipelineKind::EncodeOnly;
  std::map<std::string, std::string> artifacts;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<InputDigest> inputs;
  std::optional<MetricsReport> metrics;
  std::size_t train_count = 0, validation_count = 0;
};

inline nlohmann::json run_manifest_json(const RunConfig& cfg, const RunReport& r) {
  nlohmann::json j;
  j["pipeline"] = to_string(r.pipeline);
  j["config"] = to_json(cfg);
  j["seeds"] = {{"master", cfg.seed},
                {"split", cfg.seed},
                {"cnn_init", cfg.seed},
                {"cnn_train", cfg.cnn_train.seed},
                {"ann_init", cfg.seed},
                {"ann_train", cfg.ann_train.seed},
                {"pso", cfg.swarm.seed}};
  auto inputs = nlohmann::json::array();
  for (const auto& d : r.inputs) inputs.push_back({{"path", d.path}, {"fnv1a64", hex64(d.fnv1a64)}});
  j["inputs"] = inputs;
  j["artifacts"] = r.artifacts;
  auto stages = nlohmann::json::array();
  for (const auto& [name, s] : r.stage_seconds) stages.push_back({{"stage", name}, {"seconds", s}});
  j["stages"] = stages;
  j["counts"] = {{"train", r.train_count}, {"validation", r.validation_count}};
  return j;
}

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(RunReport& r) : r_(r) {}

  template <class Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      r_.stage_seconds.emplace_back(name,
                                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record();
      } else {
        auto v = fn();
        record();
        return v;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const ShapeMismatch& e) {
      throw ShapeMismatch("stage '" + name + "' failed: " + e.what());
    } catch (const std::exception& e) {
      throw Error("stage '" + name + "' failed: " + e.what());
    }
  }

 private:
  RunReport& r_;
};

inline std::vector<int> label_ints(const LoadedData& d, std::span<const std::size_t> which) {
  std::vector<int> v;
  for (auto i : which) v.push_back(static_cast<int>(d.manifest.entries[i].label));
  return v;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << s;
}

template <class T>
MetricsReport evaluate_model(nn::Network<T>& net, const nn::Tensor<T>& x, const std::vector<int>& y,
                             const std::filesystem::path& out_dir, const std::string& model, RunReport& rep) {
  const auto probs = nn::predict(net, x);
  std::vector<Label> preds, labels;
  std::vector<double> scores;
  const auto am = nn::argmax_rows(probs);
  for (std::size_t i = 0; i < y.size(); ++i) {
    preds.push_back(static_cast<Label>(am[i]));
    labels.push_back(static_cast<Label>(y[i]));
    scores.push_back(static_cast<double>(probs.data[i * 2 + 1]));
  }
  auto m = evaluate(preds, scores, labels);
  const auto roc = roc_curve(scores, labels);
  write_metrics_json(out_dir / "metrics.json", m);
  write_text(out_dir / "metrics.csv", metrics_table_csv(m, model));
  write_text(out_dir / "roc.csv", roc_csv(roc));
  rep.artifacts["metrics_json"] = (out_dir / "metrics.json").generic_string();
  rep.artifacts["metrics_csv"] = (out_dir / "metrics.csv").generic_string();
  rep.artifacts["roc_csv"] = (out_dir / "roc.csv").generic_string();
  return m;
}

}  // namespace detail

/// Runs one pipeline end to end. `cfg` must already have had propagate()
/// applied if the caller wants the master seed everywhere (run_pipeline does
/// it on its own copy).
inline RunReport run_pipeline(RunConfig cfg, PipelineKind kind,
                              const std::function<void(const std::string&)>& log = {}) {
  namespace fs = std::filesystem;
  cfg.propagate();
  cfg.texture.gasf_scaling = cfg.scaling;
  cfg.validate(kind);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const auto say = [&](const std::string& s) {
    if (log) log(s);
  };

  RunReport rep;
  rep.pipeline = kind;
  detail::StageTimer timer(rep);

  const auto data = timer.run("ingest", [&] { return load_dataset(cfg); });
  rep.inputs = data.digests;
  const auto tr = data.indices(Split::Train), va = data.indices(Split::Validation);
  rep.train_count = tr.size();
  rep.validation_count = va.size();
  save_manifest(out / "dataset.json", data.manifest);
  rep.artifacts["dataset_manifest"] = (out / "dataset.json").generic_string();
  say("ingest: " + std::to_string(tr.size()) + " train / " + std::to_string(va.size()) + " validation epochs");

  const auto log_epoch = [&](const char* model) {
    return [&, model](std::size_t e, const nn::EpochStats& s) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s epoch %zu: loss %.4f acc %.3f | val loss %.4f acc %.3f", model, e + 1,
                    s.train_loss, s.train_accuracy, s.val_loss, s.val_accuracy);
      say(buf);
    };
  };

  switch (kind) {
    case PipelineKind::EncodeOnly: {
      timer.run("encode", [&] {
        auto ecfg = cfg;
        ecfg.save_images = true;
        std::vector<std::string> written;
        std::vector<std::size_t> all(data.manifest.entries.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        (void)encode_stage(data, all, ecfg, &written);
        rep.artifacts["images"] = (out / "images").generic_string();
        rep.artifacts["image_count"] = std::to_string(written.size());
      });
      break;
    }
    case PipelineKind::GasfCnn: {
      std::vector<std::string> written;
      auto xtr = timer.run("encode", [&] { return encode_stage(data, tr, cfg, &written); });
      auto xva = timer.run("encode_validation", [&] { return encode_stage(data, va, cfg, &written); });
      if (cfg.save_images) rep.artifacts["images"] = (out / "images").generic_string();
      nn::Dataset<float> dtr{std::move(xtr), detail::label_ints(data, tr)};
      nn::Dataset<float> dva{std::move(xva), detail::label_ints(data, va)};
      auto ckpt = timer.run("train", [&] {
        auto net = nn::build_custom_cnn<float>(cfg.image_size, cfg.image_size, cfg.cnn_scale, cfg.seed);
        return nn::train(net, dtr, dva, cfg.cnn_train, make_image_augmenter(cfg.augment), log_epoch("cnn"));
      });
      nn::save_checkpoint(out / "cnn.ckpt", ckpt);
      rep.artifacts["checkpoint"] = (out / "cnn.ckpt").generic_string();
      rep.metrics = timer.run("eval", [&] {
        return detail::evaluate_model(ckpt.network, dva.inputs, dva.labels, out, "Custom CNN", rep);
      });
      break;
    }
    case PipelineKind::FeaturesOnly:
    case PipelineKind::FeatureAnn: {
      auto ftr = timer.run("features", [&] { return features_stage(data, tr, cfg); });
      auto fva = timer.run("features_validation", [&] { return features_stage(data, va, cfg); });
      std::vector<Label> ltr, lva;
      for (auto i : tr) ltr.push_back(data.manifest.entries[i].label);
      for (auto i : va) lva.push_back(data.manifest.entries[i].label);
      write_feature_csv(out / "features_train.csv", ftr, ltr);
      write_feature_csv(out / "features_validation.csv", fva, lva);
      rep.artifacts["features_train"] = (out / "features_train.csv").generic_string();
      rep.artifacts["features_validation"] = (out / "features_validation.csv").generic_string();
      if (kind == PipelineKind::FeaturesOnly) break;

      std::vector<std::size_t> columns(kFeatureCount);
      std::iota(columns.begin(), columns.end(), std::size_t{0});
      if (cfg.use_selection) {
        const auto sel = timer.run("select", [&] {
          FeatureMatrix fm;
          for (const auto& f : ftr) fm.emplace_back(f.values.begin(), f.values.end());
          if (cfg.pso_fitness == "ann") {
            return pso_select(
                fm.front().size(),
                [&](const std::vector<bool>& m) { return ann_wrapper_fitness(m, fm, ltr, cfg); }, cfg.swarm);
          }
          return pso_select(fm, ltr, cfg.swarm);
        });
        const auto& names = feature_names();
        const std::vector<std::string> nv(names.begin(), names.end());
        detail::write_text(out / "selection.json", selection_report(sel, nv).dump(2) + "\n");
        rep.artifacts["selection"] = (out / "selection.json").generic_string();
        columns = sel.mask.indices();
        std::string chosen;
        for (auto c : columns) chosen += (chosen.empty() ? "" : ", ") + nv[c];
        say("select: " + chosen);
      }
      const auto scaler = Standardizer::fit(ftr, columns);
      detail::write_text(out / "ann_scaler.json", scaler.to_json().dump(2) + "\n");
      rep.artifacts["scaler"] = (out / "ann_scaler.json").generic_string();
      nn::Dataset<float> dtr{scaler.transform(ftr), detail::label_ints(data, tr)};
      nn::Dataset<float> dva{scaler.transform(fva), detail::label_ints(data, va)};
      auto ckpt = timer.run("train", [&] {
        auto net = nn::build_dense_ann<float>(columns.size(), cfg.ann_hidden, cfg.seed);
        auto tcfg = cfg.ann_train;
        tcfg.augment = false;
        return nn::train(net, dtr, dva, tcfg, {}, log_epoch("ann"));
      });
      nn::save_checkpoint(out / "ann.ckpt", ckpt);
      rep.artifacts["checkpoint"] = (out / "ann.ckpt").generic_string();
      rep.metrics = timer.run("eval", [&] {
        return detail::evaluate_model(ckpt.network, dva.inputs, dva.labels, out, "Feature ANN", rep);
      });
      break;
    }
    case PipelineKind::EvalOnly: {
      auto ckpt = nn::load_checkpoint<float>(cfg.checkpoint);
      const auto in_shape = ckpt.network.input_shape();
      if (in_shape.size() == 3) {
        auto ecfg = cfg;
        ecfg.save_images = false;
        auto xva = timer.run("encode_validation", [&] { return encode_stage(data, va, ecfg); });
        rep.metrics = timer.run("eval", [&] {
          return detail::evaluate_model(ckpt.network, xva, detail::label_ints(data, va), out, "Custom CNN", rep);
        });
      } else {
        const auto scaler_path = fs::path(cfg.checkpoint).parent_path() / "ann_scaler.json";
        std::ifstream sin(scaler_path);
        if (!sin) throw Error("feature model needs '" + scaler_path.string() + "' next to the checkpoint");
        const auto scaler = Standardizer::from_json(nlohmann::json::parse(sin));
        auto fva = timer.run("features_validation", [&] { return features_stage(data, va, cfg); });
        rep.metrics = timer.run("eval", [&] {
          return detail::evaluate_model(ckpt.network, scaler.transform(fva), detail::label_ints(data, va), out,
                                        "Feature ANN", rep);
        });
      }
      break;
    }
  }

  detail::write_text(out / "run.json", run_manifest_json(cfg, rep).dump(2) + "\n");
  return rep;
}

}  // namespace gasfeeg
