#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phit/rng.hpp"
#include "phit/tensor.hpp"

namespace phit {

enum class Domain { ECG, Sensors, Devices, Simulation, Spectrogram, Motion, Traffic, Images };

inline constexpr std::array<Domain, 8> kAllDomains = {Domain::ECG,         Domain::Sensors, Domain::Devices,
                                                      Domain::Simulation,  Domain::Spectrogram,
                                                      Domain::Motion,      Domain::Traffic, Domain::Images};

inline std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::ECG: return "ECG";
    case Domain::Sensors: return "Sensors";
    case Domain::Devices: return "Devices";
    case Domain::Simulation: return "Simulation";
    case Domain::Spectrogram: return "Spectrogram";
    case Domain::Motion: return "Motion";
    case Domain::Traffic: return "Traffic";
    case Domain::Images: return "Images";
  }
  return "?";
}

/// Accepts the canonical names plus the singular/short spellings used by the
/// archive's own metadata (Sensor, Device, Simulated, Spectro, Spectrum, Image).
inline std::optional<Domain> parse_domain(std::string_view tag) {
  std::string t(tag);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "ecg") return Domain::ECG;
  if (t == "sensors" || t == "sensor") return Domain::Sensors;
  if (t == "devices" || t == "device") return Domain::Devices;
  if (t == "simulation" || t == "simulated") return Domain::Simulation;
  if (t == "spectrogram" || t == "spectro" || t == "spectrum") return Domain::Spectrogram;
  if (t == "motion") return Domain::Motion;
  if (t == "traffic") return Domain::Traffic;
  if (t == "images" || t == "image") return Domain::Images;
  return std::nullopt;
}

enum class Split { Train, Test };

inline std::string_view split_name(Split s) { return s == Split::Train ? "TRAIN" : "TEST"; }

/// Malformed or unusable dataset file.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UnivariateSeries {
  std::vector<double> values;
  std::size_t length() const { return values.size(); }
};

struct LabeledDataset {
  std::string name;
  Domain domain = Domain::ECG;
  Split split = Split::Train;
  std::vector<UnivariateSeries> series;
  std::vector<int> labels;
  int num_classes = 0;
  // Original class token of each remapped label, in first-appearance order.
  std::vector<std::string> class_tokens;

  std::size_t size() const { return series.size(); }
};

namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view tok) {
  while (!tok.empty() && (tok.front() == ' ')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ')) tok.remove_suffix(1);
  if (tok.empty()) return std::nullopt;
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/**
 * Parses one UCR split file: every line is a class token followed by
 * tab-separated reals. Labels are remapped to [0, C) in order of first
 * appearance, or through `known_tokens` (the train split's tokens) when given,
 * so that train and test share one mapping.
 */
inline LabeledDataset parse_ucr(std::istream& in, const std::string& name, Domain domain, Split split,
                                const std::vector<std::string>* known_tokens = nullptr) {
  LabeledDataset ds;
  ds.name = name;
  ds.domain = domain;
  ds.split = split;
  if (known_tokens) ds.class_tokens = *known_tokens;
  std::map<std::string, int, std::less<>> token_ids;
  for (std::size_t i = 0; i < ds.class_tokens.size(); ++i) token_ids.emplace(ds.class_tokens[i], static_cast<int>(i));

  std::string line;
  std::size_t lineno = 0;
  std::size_t expected_len = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim_cr(line);
    if (row.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto fields = detail::split_on(row, '\t');
    const std::string where = name + " line " + std::to_string(lineno);
    if (fields.size() < 2) throw IngestError(where + ": expected a label followed by at least one value");
    std::string token(fields[0]);
    while (!token.empty() && token.back() == ' ') token.pop_back();
    while (!token.empty() && token.front() == ' ') token.erase(token.begin());
    // "1", "1.0" and "1e0" denote the same class
    if (auto v = detail::parse_real(token)) {
      std::ostringstream os;
      os << *v;
      token = os.str();
    }
    if (token.empty()) throw IngestError(where + ": empty class label");
    UnivariateSeries s;
    s.values.reserve(fields.size() - 1);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      auto v = detail::parse_real(fields[f]);
      if (!v) {
        throw IngestError(where + ": field " + std::to_string(f + 1) + " ('" + std::string(fields[f]) +
                          "') is not a finite real");
      }
      s.values.push_back(*v);
    }
    if (expected_len == 0) {
      expected_len = s.values.size();
    } else if (s.values.size() != expected_len) {
      throw IngestError(where + ": has " + std::to_string(s.values.size()) + " values, expected " +
                        std::to_string(expected_len) + " (missing trailing values?)");
    }
    auto it = token_ids.find(token);
    if (it == token_ids.end()) {
      if (known_tokens) throw IngestError(where + ": class '" + token + "' does not occur in the train split");
      it = token_ids.emplace(token, static_cast<int>(ds.class_tokens.size())).first;
      ds.class_tokens.push_back(token);
    }
    ds.series.push_back(std::move(s));
    ds.labels.push_back(it->second);
  }
  if (ds.series.empty()) throw IngestError(name + ": no records");
  ds.num_classes = static_cast<int>(ds.class_tokens.size());
  if (ds.num_classes < 2) throw IngestError(name + ": only one class present (line 1 onward)");
  return ds;
}

inline LabeledDataset load_ucr_dataset(const std::string& path, const std::string& name, Domain domain,
                                       Split split = Split::Train,
                                       const std::vector<std::string>* known_tokens = nullptr) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path);
  return parse_ucr(in, name, domain, split, known_tokens);
}

struct DatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

inline std::string ucr_split_path(const std::string& root, const std::string& name, Split split) {
  return root + "/" + name + "/" + name + "_" + std::string(split_name(split)) + ".tsv";
}

/// Loads <root>/<name>/<name>_TRAIN.tsv and _TEST.tsv with a shared label map.
inline DatasetPair load_ucr_pair(const std::string& root, const std::string& name, Domain domain) {
  DatasetPair p;
  p.train = load_ucr_dataset(ucr_split_path(root, name, Split::Train), name, domain, Split::Train);
  p.test = load_ucr_dataset(ucr_split_path(root, name, Split::Test), name, domain, Split::Test, &p.train.class_tokens);
  p.test.num_classes = p.train.num_classes;
  return p;
}

/// (x - mean) / std with the population std; near-constant series map to zeros.
inline UnivariateSeries z_normalize(const UnivariateSeries& s) {
  UnivariateSeries out;
  const std::size_t n = s.values.size();
  if (n == 0) return out;
  const double mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / static_cast<double>(n);
  double var = 0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  out.values.resize(n);
  if (sd < 1e-8) return out;
  for (std::size_t i = 0; i < n; ++i) out.values[i] = (s.values[i] - mean) / sd;
  return out;
}

inline void z_normalize(LabeledDataset& ds) {
  for (auto& s : ds.series) s = z_normalize(s);
}

// ---------------------------------------------------------------------------
// archive metadata: exclusion manifest and domain map
// ---------------------------------------------------------------------------

struct ExclusionManifest {
  std::map<std::string, std::string> reasons;  // name -> reason

  bool contains(const std::string& name) const { return reasons.count(name) > 0; }
  std::size_t size() const { return reasons.size(); }
};

namespace detail {

/// "key<TAB>value" records; '#' comments and blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_tab_pairs(std::istream& in, const std::string& what,
                                                                        bool value_required) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = trim_cr(line);
    if (row.empty() || row.front() == '#') continue;
    const std::size_t tab = row.find('\t');
    std::string key(row.substr(0, tab));
    std::string value = tab == std::string_view::npos ? std::string() : std::string(row.substr(tab + 1));
    if (key.empty() || (value_required && value.empty())) {
      throw IngestError(what + " line " + std::to_string(lineno) + ": expected name<TAB>value");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

}  // namespace detail

inline ExclusionManifest parse_exclusion_manifest(std::istream& in) {
  ExclusionManifest m;
  for (auto& [name, reason] : detail::parse_tab_pairs(in, "exclusion manifest", false)) m.reasons[name] = reason;
  return m;
}

inline ExclusionManifest load_exclusion_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open exclusion manifest " + path);
  return parse_exclusion_manifest(in);
}

/**
 * Drops every item whose `name` is listed in the manifest. Manifest names
 * that match nothing are reported through `warnings` (or stderr when null).
 */
template <typename Item>
std::vector<Item> filter_archive(const std::vector<Item>& items, const ExclusionManifest& manifest,
                                 std::vector<std::string>* warnings = nullptr) {
  std::vector<Item> kept;
  std::set<std::string> present;
  for (const auto& it : items) {
    present.insert(it.name);
    if (!manifest.contains(it.name)) kept.push_back(it);
  }
  for (const auto& [name, reason] : manifest.reasons) {
    if (present.count(name)) continue;
    const std::string msg = "exclusion manifest names unknown dataset '" + name + "'";
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::cerr << "warning: " << msg << '\n';
    }
  }
  return kept;
}

/// One archive dataset with its raw type tag from the domain map.
struct ArchiveEntry {
  std::string name;
  std::string tag;
};

/// Archive entry whose tag resolved to one of the study domains.
struct DomainEntry {
  std::string name;
  Domain domain;
};

inline std::vector<ArchiveEntry> parse_domain_map(std::istream& in) {
  std::vector<ArchiveEntry> out;
  std::set<std::string> seen;
  for (auto& [name, tag] : detail::parse_tab_pairs(in, "domain map", true)) {
    if (!seen.insert(name).second) throw IngestError("domain map lists '" + name + "' twice");
    out.push_back({name, tag});
  }
  return out;
}

inline std::vector<ArchiveEntry> load_domain_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open domain map " + path);
  return parse_domain_map(in);
}

/// Resolves tags to domains; a tag outside the eight study domains is rejected.
inline std::vector<DomainEntry> resolve_domains(const std::vector<ArchiveEntry>& entries) {
  std::vector<DomainEntry> out;
  for (const auto& e : entries) {
    auto d = parse_domain(e.tag);
    if (!d) throw IngestError("dataset '" + e.name + "' has unknown domain '" + e.tag + "'");
    out.push_back({e.name, *d});
  }
  return out;
}

/// Partitions items by their `domain` member, preserving input order.
template <typename Item>
std::map<Domain, std::vector<Item>> group_by_domain(const std::vector<Item>& items) {
  std::map<Domain, std::vector<Item>> groups;
  for (const auto& it : items) groups[it.domain].push_back(it);
  return groups;
}

// ---------------------------------------------------------------------------
// pretext dataset
// ---------------------------------------------------------------------------

/// Union of several train splits labelled by source index.
struct PretextDataset {
  std::vector<std::string> source_names;
  std::vector<UnivariateSeries> series;
  std::vector<int> dataset_ids;
  std::vector<std::size_t> per_source_counts;
  std::size_t total = 0;

  std::size_t size() const { return series.size(); }
  std::size_t num_sources() const { return source_names.size(); }
};

inline PretextDataset build_pretext_dataset(const std::vector<LabeledDataset>& datasets) {
  PretextDataset pt;
  std::set<std::string> names;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& d = datasets[i];
    if (!names.insert(d.name).second) throw std::invalid_argument("build_pretext_dataset: duplicate dataset '" + d.name + "'");
    pt.source_names.push_back(d.name);
    pt.per_source_counts.push_back(d.size());
    for (const auto& s : d.series) {
      pt.series.push_back(s);
      pt.dataset_ids.push_back(static_cast<int>(i));
    }
  }
  pt.total = pt.series.size();
  return pt;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

template <typename T>
struct Batch {
  Tensor<T> inputs;               // [B, 1, Lmax], zero padded at the tail
  std::vector<int> dataset_ids;   // empty when the source carries none
  std::vector<int> labels;
  std::vector<std::size_t> original_lengths;
  std::vector<std::size_t> indices;  // sample positions in the source

  std::size_t size() const { return labels.size(); }
};

namespace detail {

template <typename T>
std::vector<Batch<T>> batch_rows(const std::vector<UnivariateSeries>& series, const std::vector<int>& labels,
                                 const std::vector<int>* ids, std::size_t batch_size, std::uint64_t seed,
                                 bool shuffle) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<Batch<T>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch<T> b;
    std::size_t lmax = 0;
    for (std::size_t i = start; i < end; ++i) lmax = std::max(lmax, series[order[i]].length());
    b.inputs = Tensor<T>({end - start, 1, lmax});
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t s = order[i];
      const auto& v = series[s].values;
      T* row = b.inputs.row(i - start, 0);
      for (std::size_t t = 0; t < v.size(); ++t) row[t] = static_cast<T>(v[t]);
      b.labels.push_back(labels[s]);
      if (ids) b.dataset_ids.push_back((*ids)[s]);
      b.original_lengths.push_back(v.size());
      b.indices.push_back(s);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

/// Pretext batches: labels and dataset ids are both the source index.
template <typename T>
std::vector<Batch<T>> make_batches(const PretextDataset& ds, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
  return detail::batch_rows<T>(ds.series, ds.dataset_ids, &ds.dataset_ids, batch_size, seed, shuffle);
}

/// Classification batches: labels are class indices, no dataset ids.
template <typename T>
std::vector<Batch<T>> make_batches(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
  return detail::batch_rows<T>(ds.series, ds.labels, nullptr, batch_size, seed, shuffle);
}

}  // namespace phit
