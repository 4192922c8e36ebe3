#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "phit/checkpoint.hpp"
#include "phit/data.hpp"
#include "phit/eval.hpp"
#include "phit/model.hpp"
#include "phit/training.hpp"
#include "phit/ucr_archive.hpp"

#ifndef PHIT_BUILD_ID
#define PHIT_BUILD_ID "unknown"
#endif

namespace phit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

inline constexpr const char* kArchiveRootEnv = "PHIT_ARCHIVE_ROOT";
inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kFinetunedName = "finetuned";
inline constexpr const char* kBaselineName = "baseline";

/// Bad configuration or usage; maps to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string build_id() { return PHIT_BUILD_ID; }

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

using phit::detail::shortest;

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out{};
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace detail

/// "0,1,2", "0-4" or a mix such as "0-2,7".
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : detail::split_list(text)) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(detail::parse_int<std::uint64_t>("seeds", part));
      continue;
    }
    const auto lo = detail::parse_int<std::uint64_t>("seeds", detail::trim(part.substr(0, dash)));
    const auto hi = detail::parse_int<std::uint64_t>("seeds", detail::trim(part.substr(dash + 1)));
    if (hi < lo) throw ConfigError("seeds: empty range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("seeds: at least one seed is required");
  std::set<std::uint64_t> uniq(out.begin(), out.end());
  if (uniq.size() != out.size()) throw ConfigError("seeds: duplicate seed in '" + text + "'");
  return out;
}

/// Everything a command needs, from a flat key=value file plus overrides.
struct ExperimentConfig {
  std::string archive_root;
  std::string domain_map = "builtin";
  std::string exclusions = "builtin";
  std::string domain;
  std::string dataset;
  std::string out = "runs";
  int jobs = 1;
  bool normalize = true;
  int log_every = 50;
  TrainConfig train;
  BackboneConfig backbone;

  void set(const std::string& key, const std::string& raw) {
    const std::string v = detail::trim(raw);
    using detail::parse_bool, detail::parse_double;
    auto as_int = [&] { return detail::parse_int<int>(key, v); };
    if (key == "archive_root") {
      archive_root = v;
    } else if (key == "domain_map") {
      domain_map = v;
    } else if (key == "exclusions") {
      exclusions = v;
    } else if (key == "domain") {
      domain = v;
    } else if (key == "dataset") {
      dataset = v;
    } else if (key == "out") {
      out = v;
    } else if (key == "jobs") {
      jobs = as_int();
    } else if (key == "z_normalize") {
      normalize = parse_bool(key, v);
    } else if (key == "log_every") {
      log_every = as_int();
    } else if (key == "seeds") {
      train.seeds = parse_seeds(v);
    } else if (key == "batch_size") {
      train.batch_size = detail::parse_int<std::size_t>(key, v);
    } else if (key == "pretext_epochs") {
      train.pretext_epochs = as_int();
    } else if (key == "finetune_epochs") {
      train.finetune_epochs = as_int();
    } else if (key == "baseline_epochs") {
      train.baseline_epochs = as_int();
    } else if (key == "initial_lr") {
      train.initial_lr = parse_double(key, v);
    } else if (key == "plateau_factor") {
      train.plateau_factor = parse_double(key, v);
    } else if (key == "plateau_patience") {
      train.plateau_patience = as_int();
    } else if (key == "min_lr") {
      train.min_lr = parse_double(key, v);
    } else if (key == "min_delta") {
      train.min_delta = parse_double(key, v);
    } else if (key == "reset_scheduler_on_finetune") {
      train.reset_scheduler_on_finetune = parse_bool(key, v);
    } else if (key == "num_modules") {
      backbone.num_modules = as_int();
    } else if (key == "filters_per_branch") {
      backbone.filters_per_branch = as_int();
    } else if (key == "kernel_sizes") {
      const auto parts = detail::split_list(v);
      if (parts.size() != 3) throw ConfigError("config: 'kernel_sizes' expects three integers");
      for (std::size_t i = 0; i < 3; ++i) backbone.kernel_sizes[i] = detail::parse_int<int>(key, parts[i]);
    } else if (key == "bottleneck_size") {
      backbone.bottleneck_size = as_int();
    } else if (key == "use_hybrid_filters") {
      backbone.use_hybrid_filters = parse_bool(key, v);
    } else if (key == "split_at") {
      backbone.split_at = as_int();
    } else if (key == "pool_window") {
      backbone.pool_window = as_int();
    } else if (key == "residual_every") {
      backbone.residual_every = as_int();
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  /// Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> snapshot() const {
    using detail::shortest;
    std::string seeds;
    for (std::size_t i = 0; i < train.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(train.seeds[i]);
    const auto& k = backbone.kernel_sizes;
    return {
        {"archive_root", archive_root},
        {"domain_map", domain_map},
        {"exclusions", exclusions},
        {"domain", domain},
        {"dataset", dataset},
        {"out", out},
        {"jobs", std::to_string(jobs)},
        {"z_normalize", normalize ? "true" : "false"},
        {"log_every", std::to_string(log_every)},
        {"seeds", seeds},
        {"batch_size", std::to_string(train.batch_size)},
        {"pretext_epochs", std::to_string(train.pretext_epochs)},
        {"finetune_epochs", std::to_string(train.finetune_epochs)},
        {"baseline_epochs", std::to_string(train.baseline_epochs)},
        {"initial_lr", shortest(train.initial_lr)},
        {"plateau_factor", shortest(train.plateau_factor)},
        {"plateau_patience", std::to_string(train.plateau_patience)},
        {"min_lr", shortest(train.min_lr)},
        {"min_delta", shortest(train.min_delta)},
        {"reset_scheduler_on_finetune", train.reset_scheduler_on_finetune ? "true" : "false"},
        {"num_modules", std::to_string(backbone.num_modules)},
        {"filters_per_branch", std::to_string(backbone.filters_per_branch)},
        {"kernel_sizes", std::to_string(k[0]) + "," + std::to_string(k[1]) + "," + std::to_string(k[2])},
        {"bottleneck_size", std::to_string(backbone.bottleneck_size)},
        {"use_hybrid_filters", backbone.use_hybrid_filters ? "true" : "false"},
        {"split_at", std::to_string(backbone.split_at)},
        {"pool_window", std::to_string(backbone.pool_window)},
        {"residual_every", std::to_string(backbone.residual_every)},
    };
  }

  void validate() const {
    try {
      train.validate();
      backbone.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (out.empty()) throw ConfigError("config: out must not be empty");
  }
};

/// Applies "key = value" lines; '#' starts a comment line.
inline void apply_config(ExperimentConfig& cfg, std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string row = detail::trim(line);
    if (row.empty() || row[0] == '#') continue;
    const auto eq = row.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(detail::trim(row.substr(0, eq)), row.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

/// Command line of one invocation, independent of the argument parser.
struct CommandOptions {
  std::string config_path;
  std::optional<std::string> domain;
  std::optional<std::string> dataset;
  std::optional<std::string> seeds;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::vector<std::string> overrides;  // key=value
  // evaluate
  std::string results;
  std::string mode = "pair";
  std::string method = kFinetunedName;
  std::string baseline = kBaselineName;
  std::string classifiers;
  // export-filters
  std::string checkpoint;
  int module = 1;
  std::string tag;
  std::string output;
};

/// Defaults, then the config file, then --set overrides, then dedicated flags.
inline ExperimentConfig resolve_config(const CommandOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config file " + opt.config_path);
    apply_config(cfg, in, opt.config_path);
  }
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (opt.domain) cfg.domain = *opt.domain;
  if (opt.dataset) cfg.dataset = *opt.dataset;
  if (opt.seeds) cfg.train.seeds = parse_seeds(*opt.seeds);
  if (opt.out) cfg.out = *opt.out;
  if (opt.jobs) cfg.jobs = *opt.jobs;
  if (cfg.archive_root.empty()) {
    if (const char* env = std::getenv(kArchiveRootEnv)) cfg.archive_root = env;
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// archive access
// ---------------------------------------------------------------------------

struct Archive {
  std::string root;
  std::vector<DomainEntry> entries;

  std::vector<std::string> datasets_in(Domain d) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (e.domain == d) out.push_back(e.name);
    return out;
  }

  std::optional<Domain> domain_of(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e.domain;
    return std::nullopt;
  }
};

inline Archive open_archive(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.archive_root.empty()) {
    throw ConfigError(std::string("no archive root: set archive_root in the config or ") + kArchiveRootEnv);
  }
  if (!fs::is_directory(cfg.archive_root)) throw ConfigError("archive root '" + cfg.archive_root + "' is not a directory");
  Archive a;
  a.root = cfg.archive_root;
  try {
    const auto map = cfg.domain_map == "builtin" ? ucr::default_domain_map() : load_domain_map(cfg.domain_map);
    ExclusionManifest excl;
    if (cfg.exclusions == "builtin") {
      excl = ucr::default_exclusions();
    } else if (cfg.exclusions != "none") {
      excl = load_exclusion_manifest(cfg.exclusions);
    }
    std::vector<std::string> warnings;
    a.entries = resolve_domains(filter_archive(map, excl, &warnings));
    for (const auto& w : warnings) log << "warning: " << w << '\n';
  } catch (const IngestError& e) {
    throw ConfigError(e.what());
  }
  return a;
}

inline Domain require_domain(const std::string& name) {
  if (name.empty()) throw ConfigError("a domain is required (--domain)");
  auto d = parse_domain(name);
  if (!d) {
    std::string known;
    for (Domain x : kAllDomains) known += (known.empty() ? "" : ", ") + std::string(domain_name(x));
    throw ConfigError("unknown domain '" + name + "' (expected one of: " + known + ")");
  }
  return *d;
}

inline void require_files(const Archive& a, const std::vector<std::string>& names, bool need_test) {
  for (const auto& n : names) {
    for (Split s : {Split::Train, Split::Test}) {
      if (s == Split::Test && !need_test) continue;
      const auto p = ucr_split_path(a.root, n, s);
      if (!fs::is_regular_file(p)) throw ConfigError("missing dataset file " + p);
    }
  }
}

inline DatasetPair load_pair(const Archive& a, const std::string& name, Domain d, bool normalize) {
  DatasetPair p = load_ucr_pair(a.root, name, d);
  if (normalize) {
    z_normalize(p.train);
    z_normalize(p.test);
  }
  return p;
}

// ---------------------------------------------------------------------------
// run directories
// ---------------------------------------------------------------------------

inline fs::path run_dir(const ExperimentConfig& cfg, const std::string& experiment, const std::string& target,
                        std::uint64_t seed) {
  return fs::path(cfg.out) / experiment / target / std::to_string(seed);
}

inline void write_history(const fs::path& path, const TrainRun& run) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,train_loss,train_acc,lr\n";
  for (const auto& r : run.history) {
    os << r.epoch << ',' << detail::shortest(r.loss) << ',' << detail::shortest(r.accuracy) << ','
       << detail::shortest(r.lr) << '\n';
  }
}

struct RunRecord {
  std::string command;
  std::string experiment;
  std::string target;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

inline void write_run_manifest(const fs::path& path, const ExperimentConfig& cfg, const RunRecord& rec,
                               const TrainRun& run) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "build_id=" << build_id() << '\n'
     << "command=" << rec.command << '\n'
     << "experiment=" << rec.experiment << '\n'
     << "target=" << rec.target << '\n'
     << "seed=" << rec.seed << '\n';
  for (const auto& [k, v] : cfg.snapshot()) os << "config." << k << '=' << v << '\n';
  os << "epochs.realized=" << run.epochs_run() << '\n'
     << "best_epoch=" << run.best_epoch << '\n'
     << "best_train_loss=" << detail::shortest(run.history.at(static_cast<std::size_t>(run.best_epoch)).loss) << '\n'
     << "final_lr=" << detail::shortest(run.final_lr) << '\n';
  for (const auto& [k, v] : rec.extra) os << k << '=' << v << '\n';
  os << "checkpoint=checkpoint\n";
}

inline std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

template <typename T>
void save_run(const fs::path& dir, const ExperimentConfig& cfg, const RunRecord& rec, const TrainRun& run,
              ModelGraph<T>& model) {
  fs::create_directories(dir);
  CheckpointMeta meta;
  meta.seed = rec.seed;
  meta.epoch = run.best_epoch;
  meta.train_loss = run.history.at(static_cast<std::size_t>(run.best_epoch)).loss;
  meta.extra["experiment"] = rec.experiment;
  meta.extra["target"] = rec.target;
  meta.extra["epochs_run"] = std::to_string(run.epochs_run());
  meta.extra["final_lr"] = detail::shortest(run.final_lr);
  save_checkpoint((dir / "checkpoint").string(), model, meta);
  write_history(dir / "history.csv", run);
  write_run_manifest(dir / "run_manifest.txt", cfg, rec, run);
}

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

class Logger {
 public:
  explicit Logger(std::ostream& os) : os_(os) {}
  void line(const std::string& s) {
    std::lock_guard lock(mutex_);
    os_ << s << '\n' << std::flush;
  }

 private:
  std::ostream& os_;
  std::mutex mutex_;
};

inline EpochCallback progress(Logger& log, const ExperimentConfig& cfg, const std::string& label, int epochs) {
  if (cfg.log_every <= 0) return {};
  return [&log, label, epochs, every = cfg.log_every](const EpochRecord& r) {
    if ((r.epoch + 1) % every == 0 || r.epoch + 1 == epochs) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  %s epoch %d/%d loss %.6f acc %.4f lr %.2e", label.c_str(), r.epoch + 1, epochs,
                    r.loss, r.accuracy, r.lr);
      log.line(buf);
    }
  };
}

inline fs::path results_path(const ExperimentConfig& cfg) { return fs::path(cfg.out) / kResultsFile; }

/// Inserts or replaces rows of <out>/results.csv, writing through a temp file.
inline void upsert_results(const fs::path& path, const std::vector<ResultRow>& rows) {
  ResultTable table;
  if (fs::exists(path)) table = load_results_csv(path.string());
  for (const auto& r : rows) table.upsert(r);
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    write_results_csv(os, table);
  }
  fs::rename(tmp, path);
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

inline std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

/// Trains one pretext model per seed on every train split of a domain.
inline int cmd_pretrain(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opt);
    const Domain domain = require_domain(cfg.domain);
    const Archive archive = open_archive(cfg, err);
    const auto names = archive.datasets_in(domain);
    if (names.size() < 2) {
      throw ConfigError("domain " + std::string(domain_name(domain)) + " has " + std::to_string(names.size()) +
                        " dataset(s) after exclusion; the pretext task needs at least two sources");
    }
    require_files(archive, names, false);
    std::vector<LabeledDataset> train;
    for (const auto& n : names) {
      LabeledDataset d = load_ucr_dataset(ucr_split_path(archive.root, n, Split::Train), n, domain, Split::Train);
      if (cfg.normalize) z_normalize(d);
      train.push_back(std::move(d));
    }

    Logger log(out);
    const std::string target(domain_name(domain));
    log.line("pretrain " + target + ": " + std::to_string(names.size()) + " datasets, seeds " + seed_list(cfg.train.seeds));
    parallel_for(cfg.train.seeds.size(), cfg.jobs, [&](std::size_t i) {
      const std::uint64_t seed = cfg.train.seeds[i];
      const std::string label = target + " seed " + std::to_string(seed);
      auto res = train_pretext<float>(train, cfg.backbone, cfg.train, seed,
                                      progress(log, cfg, "pretext " + label, cfg.train.pretext_epochs));
      RunRecord rec{"pretrain", "pretext", target, seed, {{"epochs.planned", std::to_string(cfg.train.pretext_epochs)}}};
      for (std::size_t k = 0; k < names.size(); ++k) rec.extra.emplace_back("source." + std::to_string(k), names[k]);
      const fs::path dir = run_dir(cfg, "pretext", target, seed);
      save_run(dir, cfg, rec, res.run, res.model);
      log.line("pretext " + label + " done: best epoch " + std::to_string(res.run.best_epoch) + ", " + dir.string());
    });
    return kExitOk;
  });
}

namespace detail {

inline std::vector<std::string> target_datasets(const ExperimentConfig& cfg, const Archive& archive,
                                                std::optional<Domain> domain) {
  if (!cfg.dataset.empty()) {
    auto d = archive.domain_of(cfg.dataset);
    if (!d) throw ConfigError("dataset '" + cfg.dataset + "' is not in the study archive (unknown or excluded)");
    if (domain && *d != *domain) {
      throw ConfigError("dataset '" + cfg.dataset + "' belongs to " + std::string(domain_name(*d)) + ", not " +
                        std::string(domain_name(*domain)));
    }
    return {cfg.dataset};
  }
  if (!domain) throw ConfigError("either --dataset or --domain is required");
  auto names = archive.datasets_in(*domain);
  if (names.empty()) throw ConfigError("domain " + std::string(domain_name(*domain)) + " has no datasets");
  return names;
}

inline double ensemble_accuracy(std::vector<ModelGraph<float>>& models, const LabeledDataset& test, std::size_t batch) {
  std::vector<ModelGraph<float>*> ptrs;
  for (auto& m : models) ptrs.push_back(&m);
  return accuracy(predict(ptrs, test, batch), test.labels);
}

}  // namespace detail

/// Extends each seed's pretext model per dataset, trains, and scores the ensemble.
inline int cmd_finetune(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opt);
    const Domain domain = require_domain(cfg.domain);
    const Archive archive = open_archive(cfg, err);
    const auto names = detail::target_datasets(cfg, archive, domain);
    require_files(archive, names, true);
    const std::string dom(domain_name(domain));

    std::vector<LoadedCheckpoint<float>> pretext;
    for (auto seed : cfg.train.seeds) {
      const fs::path base = run_dir(cfg, "pretext", dom, seed) / "checkpoint";
      if (!fs::exists(base.string() + ".manifest")) {
        throw ConfigError("no pretext checkpoint at " + base.string() + ".manifest; run `phit pretrain --domain " + dom +
                          " --seeds " + std::to_string(seed) + "` with the same --out first");
      }
      pretext.push_back(load_checkpoint<float>(base.string()));
      if (pretext.back().model.kind != ModelKind::Pretext) throw ConfigError(base.string() + " is not a pretext checkpoint");
    }
    std::vector<std::size_t> ids;
    for (const auto& n : names) {
      const auto& src = pretext.front().model.output_names;
      auto it = std::find(src.begin(), src.end(), n);
      if (it == src.end()) throw ConfigError("dataset '" + n + "' was not a source of the " + dom + " pretext model");
      ids.push_back(static_cast<std::size_t>(it - src.begin()));
    }
    std::vector<DatasetPair> data;
    for (const auto& n : names) data.push_back(load_pair(archive, n, domain, cfg.normalize));

    Logger log(out);
    const std::size_t S = cfg.train.seeds.size();
    std::vector<ModelGraph<float>> models(names.size() * S);
    parallel_for(models.size(), cfg.jobs, [&](std::size_t job) {
      const std::size_t di = job / S, si = job % S;
      const std::uint64_t seed = cfg.train.seeds[si];
      const auto& pt = pretext[si];
      const std::string label = names[di] + " seed " + std::to_string(seed);
      std::optional<PlateauState> carried;
      if (auto it = pt.meta.extra.find("final_lr"); it != pt.meta.extra.end()) carried = PlateauState{std::stod(it->second)};
      auto res = finetune(pt.model, data[di].train, ids[di], cfg.train, seed, carried,
                          progress(log, cfg, "finetune " + label, cfg.train.finetune_epochs));
      const std::string pt_epochs = pt.meta.extra.count("epochs_run") ? pt.meta.extra.at("epochs_run") : "unknown";
      RunRecord rec{"finetune", "finetune", names[di], seed,
                    {{"domain", dom},
                     {"pretext_checkpoint", (run_dir(cfg, "pretext", dom, seed) / "checkpoint").string()},
                     {"dataset_id", std::to_string(ids[di])},
                     {"epochs.planned", std::to_string(cfg.train.finetune_epochs)},
                     {"epochs.pretext_realized", pt_epochs},
                     {"epochs.finetune_realized", std::to_string(res.run.epochs_run())},
                     {"epochs.baseline_budget", std::to_string(cfg.train.baseline_epochs)}}};
      if (pt_epochs != "unknown") {
        rec.extra.emplace_back("epochs.total_realized", std::to_string(std::stoi(pt_epochs) + res.run.epochs_run()));
      }
      save_run(run_dir(cfg, "finetune", names[di], seed), cfg, rec, res.run, res.model);
      models[job] = std::move(res.model);
      log.line("finetune " + label + " done: best epoch " + std::to_string(res.run.best_epoch));
    });

    std::vector<ResultRow> rows;
    for (std::size_t di = 0; di < names.size(); ++di) {
      std::vector<ModelGraph<float>> ens(std::make_move_iterator(models.begin() + static_cast<long>(di * S)),
                                         std::make_move_iterator(models.begin() + static_cast<long>((di + 1) * S)));
      const double acc = detail::ensemble_accuracy(ens, data[di].test, cfg.train.batch_size);
      rows.push_back({names[di], kFinetunedName, acc, dom, static_cast<long>(data[di].train.size())});
      log.line("finetuned ensemble " + names[di] + ": test accuracy " + phit::detail::fixed(acc, 4));
    }
    upsert_results(results_path(cfg), rows);
    return kExitOk;
  });
}

/// Random-init backbone per dataset and seed, scored as a seed ensemble.
inline int cmd_baseline(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_config(opt);
    std::optional<Domain> domain;
    if (!cfg.domain.empty()) domain = require_domain(cfg.domain);
    const Archive archive = open_archive(cfg, err);
    const auto names = detail::target_datasets(cfg, archive, domain);
    require_files(archive, names, true);
    std::vector<DatasetPair> data;
    for (const auto& n : names) data.push_back(load_pair(archive, n, *archive.domain_of(n), cfg.normalize));

    Logger log(out);
    const std::size_t S = cfg.train.seeds.size();
    std::vector<ModelGraph<float>> models(names.size() * S);
    parallel_for(models.size(), cfg.jobs, [&](std::size_t job) {
      const std::size_t di = job / S, si = job % S;
      const std::uint64_t seed = cfg.train.seeds[si];
      const std::string label = names[di] + " seed " + std::to_string(seed);
      auto res = train_baseline<float>(data[di].train, cfg.backbone, cfg.train, seed,
                                       progress(log, cfg, "baseline " + label, cfg.train.baseline_epochs));
      RunRecord rec{"baseline", "baseline", names[di], seed,
                    {{"domain", std::string(domain_name(data[di].train.domain))},
                     {"epochs.planned", std::to_string(cfg.train.baseline_epochs)},
                     {"epochs.baseline_realized", std::to_string(res.run.epochs_run())}}};
      save_run(run_dir(cfg, "baseline", names[di], seed), cfg, rec, res.run, res.model);
      models[job] = std::move(res.model);
      log.line("baseline " + label + " done: best epoch " + std::to_string(res.run.best_epoch));
    });

    std::vector<ResultRow> rows;
    for (std::size_t di = 0; di < names.size(); ++di) {
      std::vector<ModelGraph<float>> ens(std::make_move_iterator(models.begin() + static_cast<long>(di * S)),
                                         std::make_move_iterator(models.begin() + static_cast<long>((di + 1) * S)));
      const double acc = detail::ensemble_accuracy(ens, data[di].test, cfg.train.batch_size);
      rows.push_back({names[di], kBaselineName, acc, std::string(domain_name(data[di].train.domain)),
                      static_cast<long>(data[di].train.size())});
      log.line("baseline ensemble " + names[di] + ": test accuracy " + phit::detail::fixed(acc, 4));
    }
    upsert_results(results_path(cfg), rows);
    return kExitOk;
  });
}

/// Reports over a results CSV: pair, matrix, domain or trainsize.
inline int cmd_evaluate(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    static const std::set<std::string> modes{"pair", "matrix", "domain", "trainsize"};
    if (!modes.count(opt.mode)) throw ConfigError("unknown evaluate mode '" + opt.mode + "' (pair, matrix, domain, trainsize)");
    fs::path results = opt.results;
    if (results.empty()) {
      const ExperimentConfig cfg = resolve_config(opt);
      results = results_path(cfg);
    }
    if (!fs::is_regular_file(results)) throw ConfigError("results file " + results.string() + " does not exist");
    ResultTable table;
    try {
      table = load_results_csv(results.string());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(results.string() + ": " + e.what());
    }
    const fs::path dir = opt.out ? fs::path(*opt.out) : results.parent_path();

    std::ostringstream text, csv;
    if (opt.mode == "pair") {
      const auto r = compare_pair(table, opt.method, opt.baseline);
      write_pair_report_text(text, r, opt.method, opt.baseline);
      write_domain_report_csv(csv, {r});
    } else if (opt.mode == "domain") {
      const auto rows = per_domain_report(table, opt.method, opt.baseline);
      write_domain_report_text(text, rows, opt.method, opt.baseline);
      write_domain_report_csv(csv, rows);
    } else if (opt.mode == "matrix") {
      auto names = opt.classifiers.empty() ? table.classifiers() : detail::split_list(opt.classifiers);
      const auto m = pairwise_matrix(table, names);
      write_matrix_text(text, m);
      write_matrix_csv(csv, m);
    } else {
      const auto rows = train_size_analysis(table, opt.method, opt.baseline);
      write_train_size_csv(csv, rows);
      text << csv.str();
    }
    if (!dir.empty()) fs::create_directories(dir);
    for (const auto& [ext, body] : {std::pair{".csv", csv.str()}, std::pair{".txt", text.str()}}) {
      const fs::path p = dir / ("report_" + opt.mode + ext);
      std::ofstream os(p, std::ios::trunc);
      if (!os) throw std::runtime_error("cannot write " + p.string());
      os << body;
    }
    out << text.str();
    return kExitOk;
  });
}

/// Dumps every kernel of one module of a checkpoint as CSV.
inline int cmd_export_filters(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (opt.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    std::string base = opt.checkpoint;
    if (const std::string suffix = ".manifest"; base.size() > suffix.size() && base.ends_with(suffix)) {
      base.resize(base.size() - suffix.size());
    }
    if (!fs::exists(base + ".manifest")) throw ConfigError("no checkpoint manifest at " + base + ".manifest");
    auto ck = load_checkpoint<float>(base);
    if (opt.module < 1 || static_cast<std::size_t>(opt.module) > ck.model.modules.size()) {
      throw ConfigError("--module " + std::to_string(opt.module) + " is outside [1," +
                        std::to_string(ck.model.modules.size()) + "]");
    }
    const std::string tag = opt.tag.empty() ? std::string(model_kind_name(ck.model.kind)) : opt.tag;
    if (opt.output.empty() || opt.output == "-") {
      export_filters(ck.model, opt.module, tag, out);
    } else {
      const fs::path p(opt.output);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      std::ofstream os(p, std::ios::trunc);
      if (!os) throw std::runtime_error("cannot write " + p.string());
      const std::size_t rows = export_filters(ck.model, opt.module, tag, os);
      out << "wrote " << rows << " filter rows to " << p.string() << '\n';
    }
    return kExitOk;
  });
}

}  // namespace phit::cli
