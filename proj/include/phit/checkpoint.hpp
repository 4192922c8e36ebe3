#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phit/model.hpp"

namespace phit {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run metadata stored next to the weights.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = -1;
  double train_loss = 0.0;
  std::map<std::string, std::string> extra;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_ints(const std::array<int, 3>& a) {
  return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
}

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

inline std::string shape_key(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

inline Shape parse_shape_key(const std::string& s) {
  Shape out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, 'x')) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  return out;
}

}  // namespace detail

/**
 * Writes `<base>.manifest` (key=value text) and `<base>.bin` (little-endian
 * f32 values of every tensor, concatenated in manifest order).
 */
template <typename T>
void save_checkpoint(const std::string& base, ModelGraph<T>& model, const CheckpointMeta& meta) {
  const std::filesystem::path blob_path = base + ".bin";
  std::ostringstream man;
  man << "format=phit-checkpoint\nversion=1\ndtype=f32\nendianness=little\n";
  man << "blob=" << blob_path.filename().string() << '\n';
  man << "kind=" << model_kind_name(model.kind) << '\n';
  const auto& c = model.config;
  man << "config.num_modules=" << c.num_modules << '\n'
      << "config.filters_per_branch=" << c.filters_per_branch << '\n'
      << "config.kernel_sizes=" << detail::join_ints(c.kernel_sizes) << '\n'
      << "config.bottleneck_size=" << c.bottleneck_size << '\n'
      << "config.use_hybrid_filters=" << (c.use_hybrid_filters ? 1 : 0) << '\n'
      << "config.split_at=" << c.split_at << '\n'
      << "config.pool_window=" << c.pool_window << '\n'
      << "config.residual_every=" << c.residual_every << '\n';
  man << "bank_size=" << model.bank_size << '\n' << "num_outputs=" << model.num_outputs << '\n';
  for (std::size_t i = 0; i < model.output_names.size(); ++i) man << "output." << i << '=' << model.output_names[i] << '\n';
  man << "seed=" << meta.seed << '\n' << "epoch=" << meta.epoch << '\n'
      << "train_loss=" << detail::format_double(meta.train_loss) << '\n';
  for (const auto& [k, v] : meta.extra) man << "meta." << k << '=' << v << '\n';

  std::vector<std::uint32_t> blob;
  model.for_each_tensor([&](const std::string& name, const Shape& shape, std::span<T> values, bool) {
    man << "tensor." << name << '=' << detail::shape_key(shape) << '@' << blob.size() * 4 << '\n';
    for (T v : values) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      blob.push_back(detail::to_le(bits));
    }
  });

  std::ofstream bout(blob_path, std::ios::binary | std::ios::trunc);
  if (!bout) throw CheckpointError("cannot write " + blob_path.string());
  bout.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * 4));
  std::ofstream mout(base + ".manifest", std::ios::trunc);
  if (!mout) throw CheckpointError("cannot write " + base + ".manifest");
  mout << man.str();
  if (!bout || !mout) throw CheckpointError("short write for checkpoint " + base);
}

template <typename T>
struct LoadedCheckpoint {
  ModelGraph<T> model;
  CheckpointMeta meta;
};

/// Reads a checkpoint written by save_checkpoint; `base` excludes the suffix.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& base) {
  std::ifstream min(base + ".manifest");
  if (!min) throw CheckpointError("cannot open " + base + ".manifest");
  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, std::string>> tensors;
  std::map<std::size_t, std::string> outputs;
  std::string line;
  while (std::getline(min, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed manifest line: " + line);
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key.rfind("tensor.", 0) == 0) {
      tensors.emplace_back(key.substr(7), value);
    } else if (key.rfind("output.", 0) == 0) {
      outputs[std::stoull(key.substr(7))] = value;
    } else {
      kv[key] = value;
    }
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw CheckpointError(base + ".manifest: missing key '" + k + "'");
    return it->second;
  };
  if (get("format") != "phit-checkpoint" || get("version") != "1") throw CheckpointError("unsupported checkpoint format");
  if (get("dtype") != "f32" || get("endianness") != "little") throw CheckpointError("unsupported checkpoint encoding");

  BackboneConfig cfg;
  cfg.num_modules = std::stoi(get("config.num_modules"));
  cfg.filters_per_branch = std::stoi(get("config.filters_per_branch"));
  {
    std::stringstream ss(get("config.kernel_sizes"));
    std::string tok;
    for (auto& k : cfg.kernel_sizes) {
      if (!std::getline(ss, tok, ',')) throw CheckpointError("bad config.kernel_sizes");
      k = std::stoi(tok);
    }
  }
  cfg.bottleneck_size = std::stoi(get("config.bottleneck_size"));
  cfg.use_hybrid_filters = get("config.use_hybrid_filters") == "1";
  cfg.split_at = std::stoi(get("config.split_at"));
  cfg.pool_window = std::stoi(get("config.pool_window"));
  cfg.residual_every = std::stoi(get("config.residual_every"));

  const auto kind = parse_model_kind(get("kind"));
  if (!kind) throw CheckpointError("unknown model kind '" + get("kind") + "'");
  const std::size_t bank = std::stoull(get("bank_size"));
  const std::size_t outputs_n = std::stoull(get("num_outputs"));

  LoadedCheckpoint<T> out;
  if (*kind == ModelKind::Pretext) {
    out.model = build_pretext_model<T>(cfg, bank, 0);
  } else {
    out.model = build_baseline_model<T>(cfg, outputs_n, 0);
    out.model.kind = *kind;
  }
  for (const auto& [i, name] : outputs) {
    if (i != out.model.output_names.size()) throw CheckpointError("output names are not contiguous");
    out.model.output_names.push_back(name);
  }
  out.meta.seed = std::stoull(get("seed"));
  out.meta.epoch = std::stoi(get("epoch"));
  out.meta.train_loss = std::stod(get("train_loss"));
  for (const auto& [k, v] : kv)
    if (k.rfind("meta.", 0) == 0) out.meta.extra[k.substr(5)] = v;

  const std::filesystem::path blob_path = std::filesystem::path(base).parent_path() / get("blob");
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw CheckpointError("cannot open " + blob_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::map<std::string, std::pair<Shape, std::size_t>> index;
  for (const auto& [name, spec] : tensors) {
    const auto at = spec.find('@');
    if (at == std::string::npos) throw CheckpointError("malformed tensor entry for " + name);
    index[name] = {detail::parse_shape_key(spec.substr(0, at)), std::stoull(spec.substr(at + 1))};
  }
  std::size_t used = 0;
  out.model.for_each_tensor([&](const std::string& name, const Shape& shape, std::span<T> values, bool) {
    auto it = index.find(name);
    if (it == index.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (it->second.first != shape) {
      throw CheckpointError("tensor " + name + " has shape " + shape_str(it->second.first) + ", model expects " +
                            shape_str(shape));
    }
    const std::size_t off = it->second.second;
    if (off + values.size() * 4 > bytes.size()) throw CheckpointError("blob too short for tensor " + name);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + off + i * 4, 4);
      bits = detail::to_le(bits);
      float f;
      std::memcpy(&f, &bits, 4);
      values[i] = static_cast<T>(f);
    }
    ++used;
  });
  if (used != index.size()) throw CheckpointError("checkpoint holds tensors the model does not have");
  return out;
}

}  // namespace phit
