#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phit/autograd.hpp"
#include "phit/data.hpp"
#include "phit/ops.hpp"
#include "phit/rng.hpp"

namespace phit {

/// Hyperparameters of the inception backbone.
struct BackboneConfig {
  int num_modules = 6;
  int filters_per_branch = 32;
  std::array<int, 3> kernel_sizes{40, 20, 10};
  int bottleneck_size = 32;
  bool use_hybrid_filters = true;
  int split_at = 3;  // modules in the pre-trained part
  int pool_window = 3;
  int residual_every = 3;

  void validate() const {
    if (num_modules < 2) throw std::invalid_argument("backbone: num_modules must be >= 2");
    if (split_at < 1 || split_at >= num_modules) {
      throw std::invalid_argument("backbone: split_at must satisfy 1 <= split_at < num_modules");
    }
    if (filters_per_branch < 1 || bottleneck_size < 1 || pool_window < 1 || residual_every < 1) {
      throw std::invalid_argument("backbone: filter, bottleneck, pool and residual sizes must be positive");
    }
    for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
      if (kernel_sizes[i] < 1) throw std::invalid_argument("backbone: kernel sizes must be positive");
      if (i > 0 && kernel_sizes[i - 1] != 2 * kernel_sizes[i]) {
        throw std::invalid_argument("backbone: kernel sizes must halve from one branch to the next");
      }
    }
  }

  int finetune_modules() const { return num_modules - split_at; }
};

// ---------------------------------------------------------------------------
// hand-crafted filters
// ---------------------------------------------------------------------------

enum class HybridFamily { Increase, Decrease, Peak };

inline std::string_view hybrid_family_name(HybridFamily f) {
  switch (f) {
    case HybridFamily::Increase: return "increase";
    case HybridFamily::Decrease: return "decrease";
    case HybridFamily::Peak: return "peak";
  }
  return "?";
}

struct HybridKernel {
  HybridFamily family;
  std::vector<double> values;
};

/// Fixed edge and peak detectors. Never trained.
struct HybridFilterBank {
  std::vector<HybridKernel> kernels;
  std::size_t size() const { return kernels.size(); }
};

/**
 * Increase detectors of length 2..64 (first half -1, second half +1), their
 * negations, and peak detectors of length 6..96 built from six quadratic
 * ramps in the pattern -up, -down, +2up, +2down, -up, -down.
 */
inline HybridFilterBank build_hybrid_filters() {
  HybridFilterBank bank;
  const std::array<std::size_t, 6> edge_lengths{2, 4, 8, 16, 32, 64};
  for (std::size_t len : edge_lengths) {
    std::vector<double> k(len);
    for (std::size_t i = 0; i < len; ++i) k[i] = i < len / 2 ? -1.0 : 1.0;
    bank.kernels.push_back({HybridFamily::Increase, k});
  }
  for (std::size_t len : edge_lengths) {
    std::vector<double> k(len);
    for (std::size_t i = 0; i < len; ++i) k[i] = i < len / 2 ? 1.0 : -1.0;
    bank.kernels.push_back({HybridFamily::Decrease, k});
  }
  const std::array<std::size_t, 5> peak_lengths{6, 12, 24, 48, 96};
  for (std::size_t len : peak_lengths) {
    const std::size_t seg = len / 6;
    std::vector<double> up(seg);
    for (std::size_t i = 0; i < seg; ++i) {
      const double x = static_cast<double>(i + 1) / static_cast<double>(seg);
      up[i] = x * x;
    }
    std::vector<double> k;
    k.reserve(len);
    auto put = [&](double scale, bool rising) {
      for (std::size_t i = 0; i < seg; ++i) k.push_back(scale * (rising ? up[i] : up[seg - 1 - i]));
    };
    put(-1.0, true);
    put(-1.0, false);
    put(2.0, true);
    put(2.0, false);
    put(-1.0, true);
    put(-1.0, false);
    double sum = 0;
    for (double v : k) sum += v;
    if (std::abs(sum) > 1e-9) throw std::logic_error("build_hybrid_filters: peak kernel does not sum to zero");
    bank.kernels.push_back({HybridFamily::Peak, std::move(k)});
  }
  return bank;
}

// ---------------------------------------------------------------------------
// graph pieces
// ---------------------------------------------------------------------------

/// One inception module. `bn` holds one state per dataset at multiplexed
/// sites and a single state elsewhere.
template <typename T>
struct InceptionModule {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  bool is_first = false;
  std::optional<Var<T>> bottleneck;  // [bottleneck, in, 1]
  std::vector<Var<T>> branches;      // [filters, bottleneck|in, k]
  Var<T> pool_conv;                  // [filters, in, 1]
  std::vector<Var<T>> hybrid;        // constants, [1, 1, len]
  std::vector<HybridFamily> hybrid_families;
  std::vector<BatchNormState<T>> bn;
};

/// Residual edge from the output of module `from` (0 = network input) to
/// the output of module `to`.
template <typename T>
struct Shortcut {
  int from = 0;
  int to = 0;
  std::optional<Var<T>> projection;  // [out, in, 1] when channels differ
  std::vector<BatchNormState<T>> bn;  // empty for an identity edge
};

enum class ModelKind { Pretext, Finetune, Baseline };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Pretext: return "pretext";
    case ModelKind::Finetune: return "finetune";
    case ModelKind::Baseline: return "baseline";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "pretext") return ModelKind::Pretext;
  if (s == "finetune") return ModelKind::Finetune;
  if (s == "baseline") return ModelKind::Baseline;
  return std::nullopt;
}

struct LayerDescriptor {
  std::string name;
  std::string type;
  std::string detail;
};

template <typename T>
struct ModelGraph {
  ModelKind kind = ModelKind::Baseline;
  BackboneConfig config;
  std::size_t bank_size = 1;  // BN states per pre-trained site
  std::size_t num_outputs = 0;
  std::vector<std::string> output_names;  // source datasets or class tokens
  std::vector<InceptionModule<T>> modules;
  std::vector<Shortcut<T>> shortcuts;
  Var<T> head_weight;  // [K, C]
  Var<T> head_bias;    // [K]

  bool multiplexed() const { return bank_size > 1; }

  /// Visits every BN state in graph order.
  void for_each_bn(const std::function<void(BatchNormState<T>&)>& fn) {
    for (auto& m : modules)
      for (auto& s : m.bn) fn(s);
    for (auto& sc : shortcuts)
      for (auto& s : sc.bn) fn(s);
  }

  void set_mode(Mode mode) {
    for_each_bn([mode](BatchNormState<T>& s) { s.mode = mode; });
  }

  /**
   * Visits every persisted tensor with a stable name: trainable weights and
   * the BN running statistics. Hybrid constants are rebuilt, not visited.
   */
  void for_each_tensor(const std::function<void(const std::string&, const Shape&, std::span<T>, bool trainable)>& fn) {
    auto var = [&](const std::string& name, Var<T>& v) {
      fn(name, v.shape(), std::span<T>(v.value().data(), v.value().size()), v.requires_grad());
    };
    auto bank = [&](const std::string& prefix, std::vector<BatchNormState<T>>& states) {
      for (std::size_t s = 0; s < states.size(); ++s) {
        const std::string p = prefix + ".bn" + std::to_string(s);
        var(p + ".gamma", states[s].gamma);
        var(p + ".beta", states[s].beta);
        const Shape cs{states[s].channels()};
        fn(p + ".running_mean", cs, std::span<T>(states[s].running_mean), false);
        fn(p + ".running_var", cs, std::span<T>(states[s].running_var), false);
      }
    };
    for (std::size_t i = 0; i < modules.size(); ++i) {
      auto& m = modules[i];
      const std::string p = "module" + std::to_string(i + 1);
      if (m.bottleneck) var(p + ".bottleneck.weight", *m.bottleneck);
      for (std::size_t j = 0; j < m.branches.size(); ++j) var(p + ".conv" + std::to_string(j) + ".weight", m.branches[j]);
      var(p + ".pool_conv.weight", m.pool_conv);
      bank(p, m.bn);
    }
    for (auto& sc : shortcuts) {
      const std::string p = "shortcut" + std::to_string(sc.to);
      if (sc.projection) var(p + ".projection.weight", *sc.projection);
      bank(p, sc.bn);
    }
    var("head.weight", head_weight);
    var("head.bias", head_bias);
  }

  std::vector<Var<T>> trainable_parameters() {
    std::vector<Var<T>> out;
    auto add = [&](Var<T>& v) {
      if (v.requires_grad()) out.push_back(v);
    };
    auto bank = [&](std::vector<BatchNormState<T>>& states) {
      for (auto& s : states) {
        add(s.gamma);
        add(s.beta);
      }
    };
    for (auto& m : modules) {
      if (m.bottleneck) add(*m.bottleneck);
      for (auto& b : m.branches) add(b);
      add(m.pool_conv);
      bank(m.bn);
    }
    for (auto& sc : shortcuts) {
      if (sc.projection) add(*sc.projection);
      bank(sc.bn);
    }
    add(head_weight);
    add(head_bias);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& v : trainable_parameters()) n += v.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& v : trainable_parameters()) v.zero_grad();
    for (auto& m : modules)
      for (auto& h : m.hybrid) h.zero_grad();
  }

  /// Ordered description of the graph, residual edges included.
  std::vector<LayerDescriptor> layers() const {
    std::vector<LayerDescriptor> out;
    for (std::size_t i = 0; i < modules.size(); ++i) {
      const auto& m = modules[i];
      const std::string p = "module" + std::to_string(i + 1);
      const bool pre = static_cast<int>(i) < config.split_at;
      std::string part = kind == ModelKind::Baseline ? "backbone" : (pre ? "pretrained" : "addon");
      if (m.bottleneck) out.push_back({p + ".bottleneck", "conv1d", shape_str(m.bottleneck->shape())});
      for (std::size_t j = 0; j < m.branches.size(); ++j)
        out.push_back({p + ".conv" + std::to_string(j), "conv1d", shape_str(m.branches[j].shape())});
      out.push_back({p + ".maxpool", "maxpool1d", "window " + std::to_string(config.pool_window)});
      out.push_back({p + ".pool_conv", "conv1d", shape_str(m.pool_conv.shape())});
      if (!m.hybrid.empty()) out.push_back({p + ".hybrid", "fixed_conv1d", std::to_string(m.hybrid.size()) + " kernels"});
      out.push_back({p + ".concat", "concat", std::to_string(m.out_channels) + " channels"});
      out.push_back({p + ".bn", m.bn.size() > 1 ? "bn_multiplexer" : "batchnorm1d",
                     std::to_string(m.bn.size()) + " state(s), " + part});
      out.push_back({p + ".relu", "relu", ""});
      for (const auto& sc : shortcuts) {
        if (sc.to != static_cast<int>(i + 1)) continue;
        const std::string from = sc.from == 0 ? "input" : "module" + std::to_string(sc.from);
        out.push_back({"shortcut" + std::to_string(sc.to), sc.projection ? "residual_projection" : "residual_identity",
                       from + " -> module" + std::to_string(sc.to)});
      }
    }
    out.push_back({"gap", "global_average_pool", ""});
    out.push_back({"head", "dense", shape_str(head_weight.shape())});
    return out;
  }
};

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace detail {

/// Glorot-uniform conv kernel [out, in, k].
template <typename T>
Var<T> init_kernel(Rng& rng, std::size_t out, std::size_t in, std::size_t k) {
  const double limit = std::sqrt(6.0 / static_cast<double>((in + out) * k));
  Tensor<T> w({out, in, k});
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  return Var<T>::parameter(std::move(w));
}

template <typename T>
std::vector<BatchNormState<T>> make_bank(std::size_t channels, std::size_t size) {
  std::vector<BatchNormState<T>> bank;
  for (std::size_t i = 0; i < size; ++i) bank.push_back(BatchNormState<T>::make(channels));
  return bank;
}

}  // namespace detail

inline std::size_t module_out_channels(const BackboneConfig& cfg, bool is_first) {
  const std::size_t base = 4 * static_cast<std::size_t>(cfg.filters_per_branch);
  return base + (is_first && cfg.use_hybrid_filters ? build_hybrid_filters().size() : 0);
}

/**
 * Bottleneck (skipped for the first module), three parallel convolutions and
 * a max-pool + 1x1 branch, concatenated with the hybrid filters on the first
 * module, then BN (a bank of `bn_bank_size` states) and ReLU.
 */
template <typename T>
InceptionModule<T> build_inception_module(std::size_t in_channels, const BackboneConfig& cfg, bool is_first,
                                          std::size_t bn_bank_size, Rng& rng) {
  if (in_channels < 1) throw std::invalid_argument("build_inception_module: in_channels must be >= 1");
  if (bn_bank_size < 1) throw std::invalid_argument("build_inception_module: bn bank must hold >= 1 state");
  InceptionModule<T> m;
  m.in_channels = in_channels;
  m.is_first = is_first;
  const auto F = static_cast<std::size_t>(cfg.filters_per_branch);
  std::size_t branch_in = in_channels;
  if (!is_first) {
    m.bottleneck = detail::init_kernel<T>(rng, static_cast<std::size_t>(cfg.bottleneck_size), in_channels, 1);
    branch_in = static_cast<std::size_t>(cfg.bottleneck_size);
  }
  for (int k : cfg.kernel_sizes) m.branches.push_back(detail::init_kernel<T>(rng, F, branch_in, static_cast<std::size_t>(k)));
  m.pool_conv = detail::init_kernel<T>(rng, F, in_channels, 1);
  m.out_channels = 4 * F;
  if (is_first && cfg.use_hybrid_filters) {
    if (in_channels != 1) throw std::invalid_argument("build_inception_module: hybrid filters need a univariate input");
    for (const auto& hk : build_hybrid_filters().kernels) {
      Tensor<T> w({1, 1, hk.values.size()});
      for (std::size_t i = 0; i < hk.values.size(); ++i) w[i] = static_cast<T>(hk.values[i]);
      m.hybrid.push_back(Var<T>::constant(std::move(w)));
      m.hybrid_families.push_back(hk.family);
    }
    m.out_channels += m.hybrid.size();
  }
  m.bn = detail::make_bank<T>(m.out_channels, bn_bank_size);
  return m;
}

namespace detail {

template <typename T>
Shortcut<T> build_shortcut(int from, int to, std::size_t in_channels, std::size_t out_channels, std::size_t bank,
                           Rng& rng) {
  Shortcut<T> sc;
  sc.from = from;
  sc.to = to;
  if (in_channels != out_channels) {
    sc.projection = init_kernel<T>(rng, out_channels, in_channels, 1);
    sc.bn = make_bank<T>(out_channels, bank);
  }
  return sc;
}

template <typename T>
void build_head(ModelGraph<T>& g, std::size_t outputs, Rng& rng) {
  const std::size_t C = g.modules.back().out_channels;
  const double limit = std::sqrt(6.0 / static_cast<double>(C + outputs));
  Tensor<T> w({outputs, C});
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  g.head_weight = Var<T>::parameter(std::move(w));
  g.head_bias = Var<T>::parameter(Tensor<T>({outputs}));
  g.num_outputs = outputs;
}

/// Appends modules [first, last] (1-based) and every shortcut ending inside
/// that range, all with BN banks of `bank`.
template <typename T>
void append_modules(ModelGraph<T>& g, int first, int last, std::size_t bank, Rng& rng) {
  const auto& cfg = g.config;
  for (int i = first; i <= last; ++i) {
    const bool is_first = i == 1;
    const std::size_t in = is_first ? 1 : g.modules.back().out_channels;
    g.modules.push_back(build_inception_module<T>(in, cfg, is_first, bank, rng));
    if (i % cfg.residual_every == 0) {
      const int from = i - cfg.residual_every;
      const std::size_t from_ch = from == 0 ? 1 : g.modules[static_cast<std::size_t>(from - 1)].out_channels;
      g.shortcuts.push_back(build_shortcut<T>(from, i, from_ch, g.modules.back().out_channels, bank, rng));
    }
  }
}

}  // namespace detail

/// Pre-trained part only: modules 1..split_at, every BN site multiplexed over
/// `num_datasets` states, a GAP head with one unit per dataset.
template <typename T>
ModelGraph<T> build_pretext_model(const BackboneConfig& cfg, std::size_t num_datasets, std::uint64_t seed,
                                  std::vector<std::string> source_names = {}) {
  cfg.validate();
  if (num_datasets < 2) throw std::invalid_argument("build_pretext_model: needs at least two datasets");
  ModelGraph<T> g;
  g.kind = ModelKind::Pretext;
  g.config = cfg;
  g.bank_size = num_datasets;
  Rng rng(derive_seed(seed, "pretext-init"));
  detail::append_modules(g, 1, cfg.split_at, num_datasets, rng);
  detail::build_head(g, num_datasets, rng);
  g.output_names = std::move(source_names);
  return g;
}

/// Full backbone from random initialisation.
template <typename T>
ModelGraph<T> build_baseline_model(const BackboneConfig& cfg, std::size_t num_classes, std::uint64_t seed,
                                   std::vector<std::string> class_names = {}) {
  cfg.validate();
  if (num_classes < 2) throw std::invalid_argument("build_baseline_model: needs at least two classes");
  ModelGraph<T> g;
  g.kind = ModelKind::Baseline;
  g.config = cfg;
  Rng rng(derive_seed(seed, "baseline-init"));
  detail::append_modules(g, 1, cfg.num_modules, 1, rng);
  detail::build_head(g, num_classes, rng);
  g.output_names = std::move(class_names);
  return g;
}

/**
 * Copies the pre-trained modules (each BN bank collapsed to the state of
 * `dataset_id`), appends freshly initialised add-on modules with plain BN,
 * restores the remaining residual edges and attaches a new head.
 */
template <typename T>
ModelGraph<T> build_finetune_model(const ModelGraph<T>& pretext, std::size_t dataset_id, std::size_t num_classes,
                                   std::uint64_t seed, std::vector<std::string> class_names = {}) {
  if (pretext.kind != ModelKind::Pretext) throw std::invalid_argument("build_finetune_model: source is not a pretext model");
  if (dataset_id >= pretext.bank_size) {
    throw std::out_of_range("build_finetune_model: dataset id " + std::to_string(dataset_id) + " outside [0," +
                            std::to_string(pretext.bank_size) + ")");
  }
  if (num_classes < 2) throw std::invalid_argument("build_finetune_model: needs at least two classes");
  auto collapse = [dataset_id](const std::vector<BatchNormState<T>>& bank) {
    std::vector<BatchNormState<T>> one;
    if (!bank.empty()) one.push_back(bank[dataset_id].clone());
    return one;
  };
  ModelGraph<T> g;
  g.kind = ModelKind::Finetune;
  g.config = pretext.config;
  g.bank_size = 1;
  for (const auto& m : pretext.modules) {
    InceptionModule<T> c = m;
    if (m.bottleneck) c.bottleneck = m.bottleneck->clone();
    for (auto& b : c.branches) b = b.clone();
    c.pool_conv = m.pool_conv.clone();
    for (auto& h : c.hybrid) h = h.clone();
    c.bn = collapse(m.bn);
    g.modules.push_back(std::move(c));
  }
  for (const auto& sc : pretext.shortcuts) {
    Shortcut<T> c = sc;
    if (sc.projection) c.projection = sc.projection->clone();
    c.bn = collapse(sc.bn);
    g.shortcuts.push_back(std::move(c));
  }
  Rng rng(derive_seed(seed, "addon-init"));
  detail::append_modules(g, g.config.split_at + 1, g.config.num_modules, 1, rng);
  detail::build_head(g, num_classes, rng);
  g.output_names = std::move(class_names);
  return g;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

/**
 * Batch-norm multiplexer: each row is normalised by the state its dataset id
 * selects, using the statistics of the rows sharing that id (train) or that
 * state's running estimates (eval). Output rows keep the input order.
 */
template <typename T>
Var<T> bnm_forward(const Var<T>& input, std::span<const int> dataset_ids, std::vector<BatchNormState<T>>& bank) {
  require_rank(input.shape(), 3, "bnm_forward input");
  const std::size_t B = input.shape()[0];
  if (dataset_ids.size() != B) {
    throw ShapeError("bnm_forward: " + std::to_string(dataset_ids.size()) + " dataset ids for batch " + std::to_string(B));
  }
  std::vector<std::vector<std::size_t>> rows(bank.size());
  for (std::size_t b = 0; b < B; ++b) {
    const int id = dataset_ids[b];
    if (id < 0 || static_cast<std::size_t>(id) >= bank.size()) {
      throw std::out_of_range("bnm_forward: dataset id " + std::to_string(id) + " outside [0," +
                              std::to_string(bank.size()) + ")");
    }
    rows[static_cast<std::size_t>(id)].push_back(b);
  }
  std::vector<Var<T>> parts;
  std::vector<std::vector<std::size_t>> part_rows;
  for (std::size_t s = 0; s < bank.size(); ++s) {
    if (rows[s].empty()) continue;
    // whole batch on one state: no gather/scatter round trip
    if (rows[s].size() == B) return batchnorm1d(input, bank[s]);
    parts.push_back(batchnorm1d(gather_rows(input, std::span<const std::size_t>(rows[s])), bank[s]));
    part_rows.push_back(rows[s]);
  }
  return scatter_rows(parts, part_rows, B);
}

namespace detail {

template <typename T>
Var<T> apply_bn(const Var<T>& x, std::vector<BatchNormState<T>>& bank, std::span<const int> ids) {
  if (bank.size() == 1) return batchnorm1d(x, bank[0]);
  return bnm_forward(x, ids, bank);
}

template <typename T>
Var<T> module_forward(InceptionModule<T>& m, const Var<T>& x, std::size_t pool_window, std::span<const int> ids) {
  if (x.shape()[1] != m.in_channels) {
    throw ShapeError("inception module expects " + std::to_string(m.in_channels) + " channels, got " + shape_str(x.shape()));
  }
  const Var<T> b = m.bottleneck ? conv1d(x, *m.bottleneck) : x;
  std::vector<Var<T>> outs;
  for (auto& k : m.branches) outs.push_back(conv1d(b, k));
  outs.push_back(conv1d(maxpool1d_same(x, pool_window), m.pool_conv));
  for (auto& h : m.hybrid) outs.push_back(conv1d(x, h));
  return relu(apply_bn(concat_channels(outs), m.bn, ids));
}

}  // namespace detail

/// Runs the graph up to (and excluding) global pooling.
template <typename T>
Var<T> forward_features(ModelGraph<T>& model, const Batch<T>& batch, Mode mode) {
  if (batch.inputs.rank() != 3 || batch.inputs.dim(1) != 1) {
    throw ShapeError("forward: expected a [B,1,L] batch, got " + shape_str(batch.inputs.shape()));
  }
  if (model.multiplexed() && batch.dataset_ids.size() != batch.inputs.dim(0)) {
    throw std::invalid_argument("forward: model has batch-norm multiplexer sites but the batch carries no dataset ids");
  }
  model.set_mode(mode);
  const std::span<const int> ids(batch.dataset_ids);
  Var<T> x = Var<T>::constant(batch.inputs);
  std::vector<Var<T>> outputs{x};  // outputs[i] = output of module i, [0] = input
  for (std::size_t i = 0; i < model.modules.size(); ++i) {
    x = detail::module_forward(model.modules[i], x, static_cast<std::size_t>(model.config.pool_window), ids);
    for (auto& sc : model.shortcuts) {
      if (sc.to != static_cast<int>(i + 1)) continue;
      Var<T> s = outputs[static_cast<std::size_t>(sc.from)];
      if (sc.projection) s = detail::apply_bn(conv1d(s, *sc.projection), sc.bn, ids);
      x = relu(residual_add(x, s));
    }
    outputs.push_back(x);
  }
  return x;
}

/// Logits [B, K].
template <typename T>
Var<T> forward(ModelGraph<T>& model, const Batch<T>& batch, Mode mode) {
  return dense(gap(forward_features(model, batch, mode)), model.head_weight, model.head_bias);
}

}  // namespace phit
