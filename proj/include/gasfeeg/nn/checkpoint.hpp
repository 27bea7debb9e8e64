#pragma once

// Checkpoint file layout:
//   "GSFCKPT" (7 bytes) | version byte 0x01 | u32 LE header length |
//   JSON header | LE f32 blob.
// The blob holds every parameter in layer order (conv/dense: weight then
// bias; batchnorm: gamma, beta, running mean, running variance).

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "json.hpp"

#include "gasfeeg/nn/train.hpp"

namespace gasfeeg::nn {

inline constexpr std::string_view kCheckpointMagic = "GSFCKPT";
inline constexpr std::uint8_t kCheckpointVersion = 0x01;

namespace detail {

template <class T>
std::vector<std::pair<std::string, std::vector<T>*>> stored_tensors(Network<T>& net) {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    for (auto* p : l.params()) out.emplace_back(std::to_string(i) + "." + p->name, &p->value);
    auto st = l.state();
    static const char* kStateNames[] = {"running_mean", "running_var"};
    for (std::size_t k = 0; k < st.size(); ++k) out.emplace_back(std::to_string(i) + "." + kStateNames[k % 2], st[k]);
  }
  return out;
}

inline nlohmann::json history_json(const std::vector<EpochStats>& h) {
  auto arr = nlohmann::json::array();
  for (const auto& e : h)
    arr.push_back({{"train_loss", e.train_loss},
                   {"train_accuracy", e.train_accuracy},
                   {"val_loss", e.val_loss},
                   {"val_accuracy", e.val_accuracy}});
  return arr;
}

}  // namespace detail

template <class T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt) {
  Network<T> net = ckpt.network;
  nlohmann::json h;
  h["input_shape"] = net.input_shape();
  auto layers = nlohmann::json::array();
  for (const auto& s : net.specs()) layers.push_back(to_json(s));
  h["layers"] = layers;
  h["shapes"] = net.layer_shapes();
  h["epoch"] = ckpt.epoch;
  h["restart"] = ckpt.restart;
  h["val_accuracy"] = ckpt.val_accuracy;
  h["seed"] = ckpt.seed;
  h["init_seed"] = net.seed();
  h["history"] = detail::history_json(ckpt.history);
  auto tensors = nlohmann::json::array();
  std::size_t total = 0;
  const auto stored = detail::stored_tensors(net);
  for (const auto& [name, v] : stored) {
    tensors.push_back({{"name", name}, {"size", v->size()}});
    total += v->size();
  }
  h["tensors"] = tensors;
  h["weight_count"] = total;

  const std::string header = h.dump();
  std::string out(kCheckpointMagic);
  out.push_back(static_cast<char>(kCheckpointVersion));
  gasfeeg::detail::put_le(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out.reserve(out.size() + 4 * total);
  for (const auto& [name, v] : stored)
    for (T x : *v) gasfeeg::detail::put_le(out, static_cast<float>(x));
  return out;
}

template <class T = float>
Checkpoint<T> decode_checkpoint(std::string_view bytes) {
  const std::size_t pre = kCheckpointMagic.size() + 1 + 4;
  if (bytes.size() < pre || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
    throw Error("not a checkpoint file (bad magic)");
  const auto version = static_cast<std::uint8_t>(bytes[kCheckpointMagic.size()]);
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = gasfeeg::detail::get_le<std::uint32_t>(bytes.data() + kCheckpointMagic.size() + 1);
  if (bytes.size() < pre + hlen) throw Error("checkpoint header truncated");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(pre, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  std::vector<LayerSpec> specs;
  for (const auto& j : h.at("layers")) specs.push_back(layer_spec_from_json(j));
  Checkpoint<T> c;
  c.network = Network<T>(h.at("input_shape").get<Shape>(), specs, h.value("init_seed", std::uint64_t{0}));
  c.epoch = h.at("epoch").get<std::size_t>();
  c.restart = h.value("restart", std::size_t{0});
  c.val_accuracy = h.at("val_accuracy").get<double>();
  c.seed = h.at("seed").get<std::uint64_t>();
  for (const auto& e : h.at("history"))
    c.history.push_back({e.at("train_loss").get<double>(), e.at("train_accuracy").get<double>(),
                         e.at("val_loss").get<double>(), e.at("val_accuracy").get<double>()});

  const auto stored = detail::stored_tensors(c.network);
  std::size_t total = 0;
  for (const auto& [name, v] : stored) total += v->size();
  if (bytes.size() != pre + hlen + 4 * total)
    throw Error("checkpoint weight blob has " + std::to_string((bytes.size() - pre - hlen) / 4) +
                " values, expected " + std::to_string(total));
  const char* p = bytes.data() + pre + hlen;
  for (const auto& [name, v] : stored)
    for (auto& x : *v) {
      x = static_cast<T>(gasfeeg::detail::get_le<float>(p));
      p += 4;
    }
  return c;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  const auto bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

template <class T = float>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes);
}

}  // namespace gasfeeg::nn
