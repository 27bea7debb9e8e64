// gasfeeg command-line front end. Subcommands map onto pipeline stages; a
// JSON config supplies defaults and command-line flags override it.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "gasfeeg/gasfeeg.hpp"

namespace fs = std::filesystem;
using namespace gasfeeg;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  std::string data_root;
  bool quiet = false;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig c;
  if (!g.config.empty()) c = load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.threads) c.threads = *g.threads;
  if (!g.data_root.empty()) {
    c.data_root = g.data_root;
  } else if (c.data_root.empty()) {
    if (const char* env = std::getenv("GASFEEG_DATA_ROOT")) c.data_root = env;
  }
  return c;
}

void print_report(const RunReport& r, std::ostream& os) {
  os << "pipeline " << to_string(r.pipeline) << ": " << r.train_count << " train / " << r.validation_count
     << " validation epochs\n";
  if (r.metrics) {
    const auto& m = *r.metrics;
    char buf[200];
    std::snprintf(buf, sizeof buf, "precision %.4f  recall %.4f  f1 %.4f  auc %.4f  (tp=%zu fp=%zu tn=%zu fn=%zu)\n",
                  m.average.precision, m.average.recall, m.average.f1, m.auc, m.counts.tp, m.counts.fp, m.counts.tn,
                  m.counts.fn);
    os << buf;
  }
  for (const auto& [k, v] : r.artifacts) os << "  " << k << ": " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GASF / time-frequency texture EEG classification toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run config (or a previous run.json)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--data-root", g.data_root, "recordings directory (default: $GASFEEG_DATA_ROOT)");
  app.add_flag("-q,--quiet", g.quiet, "suppress progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "write the built-in two-class synthetic dataset");
  SynthConfig sc;
  synth->add_option("--records", sc.records_per_class, "records per class")->capture_default_str();
  synth->add_option("--samples", sc.samples_per_record, "samples per record")->capture_default_str();
  synth->add_option("--noise", sc.noise_stddev, "noise standard deviation")->capture_default_str();

  // tfr
  auto* tfr = app.add_subcommand("tfr", "time-frequency spectra of one recording");
  std::string tfr_input, tfr_kind = "all";
  long tfr_epoch = -1;
  tfr->add_option("--input", tfr_input, "recording file")->required()->check(CLI::ExistingFile);
  tfr->add_option("--kind", tfr_kind, "stft | st | wvt | set | all")->capture_default_str();
  tfr->add_option("--epoch", tfr_epoch, "epoch index (default: every epoch)");

  // select
  auto* sel = app.add_subcommand("select", "swarm feature selection on a feature table");
  std::string sel_features;
  sel->add_option("--features", sel_features, "feature CSV (default: <out>/features_train.csv)");

  // train / pipeline / eval / encode / features
  auto* train = app.add_subcommand("train", "train and evaluate a model");
  std::string model = "cnn";
  train->add_option("--model", model, "cnn | ann")->check(CLI::IsMember({"cnn", "ann"}))->capture_default_str();

  auto* pipe = app.add_subcommand("pipeline", "run a full pipeline");
  std::string pipe_kind = "gasf-cnn";
  pipe->add_option("--kind", pipe_kind, "gasf-cnn | feature-ann | encode | features | eval")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint on the validation split");
  std::string ckpt_path;
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file");

  auto* encode = app.add_subcommand("encode", "encode epochs as GASF PNG images");
  auto* features = app.add_subcommand("features", "extract texture features");

  // report
  auto* report = app.add_subcommand("report", "print a metrics table from metrics.json");
  std::string metrics_path, report_model = "model";
  report->add_option("--metrics", metrics_path, "metrics JSON (default: <out>/metrics.json)");
  report->add_option("--model", report_model, "model label for the table")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const auto log = [&](const std::string& s) {
    if (!g.quiet) std::cerr << s << "\n";
  };

  try {
    if (synth->parsed()) {
      sc.seed = g.seed.value_or(sc.seed);
      const fs::path dir = g.out.empty() ? fs::path("synth_data") : fs::path(g.out);
      const auto files = write_synth_dataset(dir, sc);
      std::cout << "wrote " << files.size() << " recordings to " << dir.generic_string() << "\n";
      return 0;
    }

    auto cfg = resolve_config(g);

    if (tfr->parsed()) {
      const auto sig = read_record(tfr_input, cfg.delimiter, cfg.channel, cfg.sampling_rate_hz);
      const auto epochs = split_epochs(sig, cfg.epoch_len, Label::Normal);
      std::vector<SpectrumKind> kinds;
      for (auto k : {SpectrumKind::STFT, SpectrumKind::Stockwell, SpectrumKind::WignerVille, SpectrumKind::SET})
        if (tfr_kind == "all" || tfr_kind == to_string(k)) kinds.push_back(k);
      if (kinds.empty()) throw ConfigError("unknown transform kind '" + tfr_kind + "'");
      if (tfr_epoch >= static_cast<long>(epochs.size()))
        throw ConfigError("epoch index " + std::to_string(tfr_epoch) + " out of range (" +
                          std::to_string(epochs.size()) + " epochs)");
      const fs::path out(cfg.out_dir);
      fs::create_directories(out);
      std::size_t written = 0;
      for (std::size_t e = 0; e < epochs.size(); ++e) {
        if (tfr_epoch >= 0 && static_cast<std::size_t>(tfr_epoch) != e) continue;
        for (auto k : kinds) {
          const auto s = compute_spectrum(k, epochs[e].samples, cfg.texture.tfr);
          const auto stem = sig.source_id + "_" + std::to_string(epochs[e].start_index) + "_" + std::string(to_string(k));
          write_spectrum_dump(out / (stem + ".bin"), s);
          auto img = spectrum_to_image(s, true, 256);
          write_png(out / (stem + ".png"), apply_colormap(img, colormap_by_name(cfg.colormap)));
          ++written;
        }
      }
      std::cout << "wrote " << written << " spectra to " << out.generic_string() << "\n";
      return 0;
    }

    if (sel->parsed()) {
      const auto path = sel_features.empty() ? fs::path(cfg.out_dir) / "features_train.csv" : fs::path(sel_features);
      const auto table = read_feature_csv(path);
      cfg.propagate();
      const auto r = pso_select(table.rows, table.labels, cfg.swarm);
      fs::create_directories(cfg.out_dir);
      const auto out = fs::path(cfg.out_dir) / "selection.json";
      std::ofstream(out) << selection_report(r, table.names).dump(2) << "\n";
      std::cout << "fitness " << r.mask.fitness << ", selected";
      for (auto i : r.mask.indices()) std::cout << " " << table.names[i];
      std::cout << "\nwrote " << out.generic_string() << "\n";
      return 0;
    }

    if (report->parsed()) {
      const auto path = metrics_path.empty() ? fs::path(cfg.out_dir) / "metrics.json" : fs::path(metrics_path);
      std::ifstream in(path);
      if (!in) throw Error("cannot open metrics '" + path.string() + "'");
      const auto j = nlohmann::json::parse(in);
      MetricsReport m;
      const auto cls = [](const nlohmann::json& c) {
        ClassMetrics x;
        x.precision = c.at("precision").get<double>();
        x.recall = c.at("recall").get<double>();
        x.f1 = c.at("f1").get<double>();
        x.support = c.at("support").get<std::size_t>();
        return x;
      };
      m.focal = cls(j.at("focal"));
      m.normal = cls(j.at("normal"));
      m.average = cls(j.at("average"));
      m.auc = j.at("auc").get<double>();
      std::cout << metrics_table_csv(m, report_model);
      return 0;
    }

    PipelineKind kind = PipelineKind::GasfCnn;
    if (encode->parsed()) kind = PipelineKind::EncodeOnly;
    else if (features->parsed()) kind = PipelineKind::FeaturesOnly;
    else if (train->parsed()) kind = model == "ann" ? PipelineKind::FeatureAnn : PipelineKind::GasfCnn;
    else if (pipe->parsed()) kind = pipeline_from_string(pipe_kind);
    else if (eval->parsed()) {
      kind = PipelineKind::EvalOnly;
      if (!ckpt_path.empty()) cfg.checkpoint = ckpt_path;
    }
    const auto rep = run_pipeline(cfg, kind, log);
    print_report(rep, std::cout);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
