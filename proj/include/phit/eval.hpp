#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phit/model.hpp"

namespace phit {

// ---------------------------------------------------------------------------
// scalar statistics
// ---------------------------------------------------------------------------

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (labels.empty()) throw std::invalid_argument("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
  int total() const { return wins + ties + losses; }
  friend bool operator==(const WinTieLoss&, const WinTieLoss&) = default;
};

inline double round_to(double v, int decimals) {
  const double s = std::pow(10.0, decimals);
  return std::round(v * s) / s;
}

/**
 * Counts datasets where `a` beats, ties or loses to `b`. Accuracies are
 * rounded to `decimals` places first; |a - b| <= tie_eps is a tie.
 */
inline WinTieLoss win_tie_loss(std::span<const double> a, std::span<const double> b, double tie_eps = 0.0,
                               int decimals = 4) {
  if (a.size() != b.size()) throw std::invalid_argument("win_tie_loss: length mismatch");
  WinTieLoss r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = round_to(a[i], decimals) - round_to(b[i], decimals);
    if (std::abs(d) <= tie_eps) {
      ++r.ties;
    } else if (d > 0) {
      ++r.wins;
    } else {
      ++r.losses;
    }
  }
  return r;
}

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0.0;  // sum of ranks of the positive differences
  std::size_t n_effective = 0;
  bool exact = false;
  bool degenerate = false;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Absolute differences are compared on a 1e-10 grid so that accuracy
/// differences equal in decimal do not split into distinct ranks.
inline std::int64_t wilcoxon_key(double d) { return std::llround(std::abs(d) * 1e10); }

struct SignedRanks {
  std::vector<int> doubled_ranks;  // 2 * average rank, integral
  std::vector<bool> positive;
  std::vector<std::size_t> tie_sizes;
};

/// Drops zero differences and assigns average ranks to |d|.
inline SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: length mismatch");
  std::vector<std::pair<std::int64_t, bool>> nz;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const std::int64_t k = wilcoxon_key(d);
    if (k != 0) nz.emplace_back(k, d > 0);
  }
  std::sort(nz.begin(), nz.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  SignedRanks r;
  for (std::size_t i = 0; i < nz.size();) {
    std::size_t j = i;
    while (j + 1 < nz.size() && nz[j + 1].first == nz[i].first) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2
    const int doubled = static_cast<int>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      r.doubled_ranks.push_back(doubled);
      r.positive.push_back(nz[k].second);
    }
    r.tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  return r;
}

/**
 * Two-tailed Wilcoxon signed-rank test of a against b. Up to 25 non-zero
 * differences the p-value is exact: the null distribution of the positive
 * rank sum over all 2^n sign assignments is counted by dynamic programming.
 * Beyond that a normal approximation with tie-corrected variance and
 * continuity correction is used.
 */
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  const SignedRanks sr = signed_ranks(a, b);
  WilcoxonResult res;
  const std::size_t n = sr.doubled_ranks.size();
  res.n_effective = n;
  if (n == 0) {
    res.degenerate = true;
    res.p_value = 1.0;
    return res;
  }
  long total2 = 0, plus2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += sr.doubled_ranks[i];
    if (sr.positive[i]) plus2 += sr.doubled_ranks[i];
  }
  res.statistic = static_cast<double>(plus2) / 2.0;
  const long t2 = std::min(plus2, total2 - plus2);

  if (n <= kWilcoxonExactLimit) {
    res.exact = true;
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (int r : sr.doubled_ranks) {
      for (long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      reach += r;
    }
    double tail = 0;
    for (long s = 0; s <= t2; ++s) tail += count[static_cast<std::size_t>(s)];
    res.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    return res;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  for (std::size_t t : sr.tie_sizes) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  const double t = static_cast<double>(t2) / 2.0;
  const double num = std::min(0.0, t - mean + 0.5);
  const double z = var > 0 ? num / std::sqrt(var) : 0.0;
  res.p_value = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
  return res;
}

// ---------------------------------------------------------------------------
// result tables
// ---------------------------------------------------------------------------

struct ResultRow {
  std::string dataset;
  std::string classifier;
  double accuracy = 0;
  std::optional<std::string> domain;
  std::optional<long> train_size;
};

/// Test accuracies keyed by (dataset, classifier) with per-dataset metadata.
class ResultTable {
 public:
  void add(ResultRow row) {
    if (!(row.accuracy >= 0.0 && row.accuracy <= 1.0)) {
      throw std::invalid_argument("result table: accuracy " + std::to_string(row.accuracy) + " for " + row.dataset +
                                  "/" + row.classifier + " is outside [0,1]");
    }
    const auto key = std::make_pair(row.dataset, row.classifier);
    if (index_.count(key)) throw std::invalid_argument("result table: duplicate entry " + row.dataset + "/" + row.classifier);
    if (row.domain) domains_[row.dataset] = *row.domain;
    if (row.train_size) train_sizes_[row.dataset] = *row.train_size;
    index_[key] = rows_.size();
    rows_.push_back(std::move(row));
  }

  /// Replaces an existing (dataset, classifier) entry or appends.
  void upsert(ResultRow row) {
    const auto key = std::make_pair(row.dataset, row.classifier);
    auto it = index_.find(key);
    if (it == index_.end()) return add(std::move(row));
    if (row.domain) domains_[row.dataset] = *row.domain;
    if (row.train_size) train_sizes_[row.dataset] = *row.train_size;
    rows_[it->second] = std::move(row);
  }

  const std::vector<ResultRow>& rows() const { return rows_; }

  std::optional<double> get(const std::string& dataset, const std::string& classifier) const {
    auto it = index_.find({dataset, classifier});
    if (it == index_.end()) return std::nullopt;
    return rows_[it->second].accuracy;
  }

  std::optional<std::string> domain(const std::string& dataset) const {
    auto it = domains_.find(dataset);
    return it == domains_.end() ? std::nullopt : std::optional<std::string>(it->second);
  }

  std::optional<long> train_size(const std::string& dataset) const {
    auto it = train_sizes_.find(dataset);
    return it == train_sizes_.end() ? std::nullopt : std::optional<long>(it->second);
  }

  /// Classifiers in first-appearance order.
  std::vector<std::string> classifiers() const {
    std::vector<std::string> out;
    for (const auto& r : rows_)
      if (std::find(out.begin(), out.end(), r.classifier) == out.end()) out.push_back(r.classifier);
    return out;
  }

  /// Datasets (first-appearance order) scored for `classifier`.
  std::vector<std::string> datasets(const std::string& classifier) const {
    std::vector<std::string> out;
    for (const auto& r : rows_)
      if (r.classifier == classifier) out.push_back(r.dataset);
    return out;
  }

 private:
  std::vector<ResultRow> rows_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  std::map<std::string, std::string> domains_;
  std::map<std::string, long> train_sizes_;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string signed_fixed(double v, int decimals) {
  if (std::abs(v) < 0.5 * std::pow(10.0, -decimals)) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", decimals, v);
  return buf;
}

inline std::string sci3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

}  // namespace detail

/// CSV with header dataset,classifier,accuracy[,domain,train_size].
inline ResultTable parse_results_csv(std::istream& in) {
  ResultTable t;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_csv(line);
    if (header.empty()) {
      header = f;
      if (header.size() < 3 || header[0] != "dataset" || header[1] != "classifier" || header[2] != "accuracy") {
        throw std::invalid_argument("results csv: header must start with dataset,classifier,accuracy");
      }
      continue;
    }
    if (f.size() != header.size()) {
      throw std::invalid_argument("results csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    }
    ResultRow row;
    row.dataset = f[0];
    row.classifier = f[1];
    try {
      row.accuracy = std::stod(f[2]);
    } catch (const std::exception&) {
      throw std::invalid_argument("results csv line " + std::to_string(lineno) + ": bad accuracy '" + f[2] + "'");
    }
    for (std::size_t i = 3; i < header.size(); ++i) {
      if (f[i].empty()) continue;
      if (header[i] == "domain") row.domain = f[i];
      if (header[i] == "train_size") row.train_size = std::stol(f[i]);
    }
    t.add(std::move(row));
  }
  if (header.empty()) throw std::invalid_argument("results csv: empty file");
  return t;
}

inline ResultTable load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_results_csv(in);
}

inline void write_results_csv(std::ostream& os, const ResultTable& t) {
  os << "dataset,classifier,accuracy,domain,train_size\n";
  for (const auto& r : t.rows()) {
    os << r.dataset << ',' << r.classifier << ',' << detail::shortest(r.accuracy) << ','
       << t.domain(r.dataset).value_or("") << ',';
    if (auto n = t.train_size(r.dataset)) os << *n;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// comparisons
// ---------------------------------------------------------------------------

/// method vs baseline over a set of datasets.
struct ComparisonReport {
  std::string label;  // domain name, or "all"
  std::size_t datasets = 0;
  WinTieLoss wtl;
  double loss_percentage = 0;
  double mean_difference = 0;  // method - baseline
  WilcoxonResult wilcoxon;
};

namespace detail {

inline void aligned(const ResultTable& t, const std::vector<std::string>& names, const std::string& method,
                    const std::string& baseline, std::vector<double>& a, std::vector<double>& b) {
  for (const auto& d : names) {
    auto x = t.get(d, method);
    auto y = t.get(d, baseline);
    if (!x) throw std::invalid_argument("no result for dataset '" + d + "' and classifier '" + method + "'");
    if (!y) throw std::invalid_argument("no result for dataset '" + d + "' and classifier '" + baseline + "'");
    a.push_back(*x);
    b.push_back(*y);
  }
}

inline ComparisonReport compare(const std::string& label, const std::vector<double>& a, const std::vector<double>& b) {
  ComparisonReport r;
  r.label = label;
  r.datasets = a.size();
  r.wtl = win_tie_loss(a, b);
  r.loss_percentage = a.empty() ? 0.0 : 100.0 * r.wtl.losses / static_cast<double>(a.size());
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] - b[i];
  r.mean_difference = a.empty() ? 0.0 : s / static_cast<double>(a.size());
  r.wilcoxon = wilcoxon_signed_rank(a, b);
  return r;
}

inline std::vector<std::string> union_datasets(const ResultTable& t, const std::string& method, const std::string& baseline) {
  std::vector<std::string> out = t.datasets(method);
  for (const auto& d : t.datasets(baseline))
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  return out;
}

}  // namespace detail

/// Global 1v1 comparison over every dataset either classifier reports.
inline ComparisonReport compare_pair(const ResultTable& t, const std::string& method, const std::string& baseline) {
  std::vector<double> a, b;
  detail::aligned(t, detail::union_datasets(t, method, baseline), method, baseline, a, b);
  return detail::compare("all", a, b);
}

/// One row per domain, domains in alphabetical order.
inline std::vector<ComparisonReport> per_domain_report(const ResultTable& t, const std::string& method,
                                                       const std::string& baseline) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& d : detail::union_datasets(t, method, baseline)) {
    auto dom = t.domain(d);
    if (!dom) throw std::invalid_argument("dataset '" + d + "' has no domain");
    groups[*dom].push_back(d);
  }
  std::vector<ComparisonReport> out;
  for (const auto& [dom, names] : groups) {
    std::vector<double> a, b;
    detail::aligned(t, names, method, baseline, a, b);
    out.push_back(detail::compare(dom, a, b));
  }
  return out;
}

inline void write_domain_report_text(std::ostream& os, const std::vector<ComparisonReport>& rows, const std::string& method,
                                     const std::string& baseline) {
  os << "Win/Tie/Loss of " << method << " against " << baseline << " per domain\n";
  os << std::left << std::setw(14) << "Domain" << std::right << std::setw(10) << "Datasets" << std::setw(7) << "Wins"
     << std::setw(7) << "Ties" << std::setw(8) << "Losses" << std::setw(10) << "Losses %" << std::setw(12) << "Mean diff"
     << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.label << std::right << std::setw(10) << r.datasets << std::setw(7) << r.wtl.wins
       << std::setw(7) << r.wtl.ties << std::setw(8) << r.wtl.losses << std::setw(10)
       << detail::fixed(r.loss_percentage, 2) + " %" << std::setw(12) << detail::signed_fixed(r.mean_difference, 4)
       << '\n';
  }
}

inline void write_domain_report_csv(std::ostream& os, const std::vector<ComparisonReport>& rows) {
  os << "domain,datasets,wins,ties,losses,loss_percentage,mean_difference,p_value\n";
  for (const auto& r : rows) {
    os << r.label << ',' << r.datasets << ',' << r.wtl.wins << ',' << r.wtl.ties << ',' << r.wtl.losses << ','
       << detail::fixed(r.loss_percentage, 2) << ',' << detail::signed_fixed(r.mean_difference, 4) << ','
       << detail::sci3(r.wilcoxon.p_value) << '\n';
  }
}

inline void write_pair_report_text(std::ostream& os, const ComparisonReport& r, const std::string& method,
                                   const std::string& baseline, double alpha = 0.05) {
  os << method << " vs " << baseline << " over " << r.datasets << " datasets\n"
     << "  wins/ties/losses: " << r.wtl.wins << '/' << r.wtl.ties << '/' << r.wtl.losses << '\n'
     << "  mean accuracy difference: " << detail::signed_fixed(r.mean_difference, 4) << '\n'
     << "  Wilcoxon signed-rank p (two-tailed, "
     << (r.wilcoxon.degenerate ? "all differences zero" : r.wilcoxon.exact ? "exact" : "normal approx.") << "): " << detail::sci3(r.wilcoxon.p_value) << '\n'
     << "  significant at alpha=" << alpha << ": " << (r.wilcoxon.p_value < alpha ? "yes" : "no") << '\n';
}

struct PairCell {
  double mean_difference = 0;  // row - column
  WinTieLoss wtl;              // wins of the row classifier
  double p_value = 1.0;
};

struct PairwiseMatrix {
  std::vector<std::string> order;  // by mean accuracy, descending
  std::vector<double> mean_accuracy;
  std::vector<std::vector<PairCell>> cells;
};

/// All pairwise comparisons; every classifier must cover the same datasets.
inline PairwiseMatrix pairwise_matrix(const ResultTable& t, std::vector<std::string> classifiers) {
  if (classifiers.size() < 2) throw std::invalid_argument("pairwise_matrix: needs at least two classifiers");
  std::set<std::string> ref;
  for (const auto& d : t.datasets(classifiers[0])) ref.insert(d);
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& c : classifiers) {
    auto ds = t.datasets(c);
    if (std::set<std::string>(ds.begin(), ds.end()) != ref) {
      throw std::invalid_argument("pairwise_matrix: classifier '" + c + "' does not cover the same datasets as '" +
                                  classifiers[0] + "'");
    }
    double s = 0;
    for (const auto& d : ref) s += *t.get(d, c);
    ranked.emplace_back(ref.empty() ? 0.0 : s / static_cast<double>(ref.size()), c);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  PairwiseMatrix m;
  for (const auto& [mean, name] : ranked) {
    m.order.push_back(name);
    m.mean_accuracy.push_back(mean);
  }
  const std::size_t n = m.order.size();
  m.cells.assign(n, std::vector<PairCell>(n));
  const std::vector<std::string> ds(ref.begin(), ref.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<double> a, b;
      detail::aligned(t, ds, m.order[i], m.order[j], a, b);
      const ComparisonReport r = detail::compare("", a, b);
      m.cells[i][j] = {r.mean_difference, r.wtl, r.wilcoxon.p_value};
      m.cells[j][i] = {-r.mean_difference, {r.wtl.losses, r.wtl.ties, r.wtl.wins}, r.wilcoxon.p_value};
    }
  }
  return m;
}

inline void write_matrix_csv(std::ostream& os, const PairwiseMatrix& m) {
  os << "row,column,row_mean_accuracy,column_mean_accuracy,mean_difference,wins,ties,losses,p_value\n";
  for (std::size_t i = 0; i < m.order.size(); ++i)
    for (std::size_t j = 0; j < m.order.size(); ++j) {
      if (i == j) continue;
      const auto& c = m.cells[i][j];
      os << m.order[i] << ',' << m.order[j] << ',' << detail::fixed(m.mean_accuracy[i], 4) << ','
         << detail::fixed(m.mean_accuracy[j], 4) << ',' << detail::signed_fixed(c.mean_difference, 4) << ','
         << c.wtl.wins << ',' << c.wtl.ties << ',' << c.wtl.losses << ',' << detail::sci3(c.p_value) << '\n';
    }
}

inline void write_matrix_text(std::ostream& os, const PairwiseMatrix& m) {
  const int w = 26;
  os << std::left << std::setw(w) << "" << std::right;
  for (const auto& c : m.order) os << std::setw(w) << c;
  os << '\n';
  for (std::size_t i = 0; i < m.order.size(); ++i) {
    os << std::left << std::setw(w) << (m.order[i] + " (" + detail::fixed(m.mean_accuracy[i], 4) + ")") << std::right;
    for (std::size_t j = 0; j < m.order.size(); ++j) {
      if (i == j) {
        os << std::setw(w) << "-";
        continue;
      }
      const auto& c = m.cells[i][j];
      os << std::setw(w)
         << (detail::signed_fixed(c.mean_difference, 4) + " " + std::to_string(c.wtl.wins) + "/" +
             std::to_string(c.wtl.ties) + "/" + std::to_string(c.wtl.losses) + " " + detail::sci3(c.p_value));
    }
    os << '\n';
  }
}

struct TrainSizeRow {
  std::string dataset;
  std::string domain;
  long train_size = 0;
  double log10_train_size = 0;
  double accuracy_difference = 0;  // method - baseline
};

/// Training-set size against accuracy gain, grouped by domain and sorted by size.
inline std::vector<TrainSizeRow> train_size_analysis(const ResultTable& t, const std::string& method,
                                                     const std::string& baseline) {
  std::vector<TrainSizeRow> rows;
  for (const auto& d : detail::union_datasets(t, method, baseline)) {
    auto n = t.train_size(d);
    if (!n) throw std::invalid_argument("dataset '" + d + "' has no train size");
    if (*n < 1) throw std::invalid_argument("dataset '" + d + "' has a non-positive train size");
    std::vector<double> a, b;
    detail::aligned(t, {d}, method, baseline, a, b);
    rows.push_back({d, t.domain(d).value_or(""), *n, std::log10(static_cast<double>(*n)), a[0] - b[0]});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    if (x.domain != y.domain) return x.domain < y.domain;
    if (x.train_size != y.train_size) return x.train_size < y.train_size;
    return x.dataset < y.dataset;
  });
  return rows;
}

/// Datasets below this many training samples are where pre-training tends to help.
inline constexpr long kSmallTrainThreshold = 1000;

inline void write_train_size_csv(std::ostream& os, const std::vector<TrainSizeRow>& rows) {
  os << "# small_train_threshold=" << kSmallTrainThreshold << " (log10=3)\n";
  os << "dataset,domain,train_size,log10_train_size,accuracy_difference\n";
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.domain << ',' << r.train_size << ',' << detail::fixed(r.log10_train_size, 4) << ','
       << detail::signed_fixed(r.accuracy_difference, 4) << '\n';
  }
}

// ---------------------------------------------------------------------------
// filter export
// ---------------------------------------------------------------------------

struct FilterRow {
  std::string model;
  int module = 0;
  std::string branch;
  std::size_t out_channel = 0;
  std::size_t in_channel = 0;
  std::vector<float> values;
};

/**
 * Writes every convolution kernel slice of module `module_index` (1-based)
 * as one CSV row: model,module,branch,out_channel,in_channel,length,values
 * with the values space separated at full float precision.
 */
template <typename T>
std::size_t export_filters(const ModelGraph<T>& model, int module_index, const std::string& tag, std::ostream& os) {
  if (module_index < 1 || static_cast<std::size_t>(module_index) > model.modules.size()) {
    throw std::out_of_range("export_filters: module " + std::to_string(module_index) + " outside [1," +
                            std::to_string(model.modules.size()) + "]");
  }
  const auto& m = model.modules[static_cast<std::size_t>(module_index - 1)];
  os << "model,module,branch,out_channel,in_channel,length,values\n";
  std::size_t rows = 0;
  auto dump = [&](const std::string& branch, const Tensor<T>& w) {
    for (std::size_t o = 0; o < w.dim(0); ++o)
      for (std::size_t c = 0; c < w.dim(1); ++c) {
        os << tag << ',' << module_index << ',' << branch << ',' << o << ',' << c << ',' << w.dim(2) << ',';
        const T* r = w.row(o, c);
        for (std::size_t k = 0; k < w.dim(2); ++k) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(r[k])));
          os << (k ? " " : "") << buf;
        }
        os << '\n';
        ++rows;
      }
  };
  if (m.bottleneck) dump("bottleneck", m.bottleneck->value());
  for (std::size_t j = 0; j < m.branches.size(); ++j)
    dump("conv_k" + std::to_string(m.branches[j].shape()[2]), m.branches[j].value());
  dump("pool_conv", m.pool_conv.value());
  for (std::size_t h = 0; h < m.hybrid.size(); ++h)
    dump("hybrid_" + std::string(hybrid_family_name(m.hybrid_families[h])) + "_k" +
             std::to_string(m.hybrid[h].shape()[2]),
         m.hybrid[h].value());
  return rows;
}

inline std::vector<FilterRow> parse_filter_csv(std::istream& in) {
  std::vector<FilterRow> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = detail::split_csv(line);
    if (f.size() != 7) throw std::invalid_argument("filter csv: expected 7 fields");
    FilterRow r;
    r.model = f[0];
    r.module = std::stoi(f[1]);
    r.branch = f[2];
    r.out_channel = std::stoull(f[3]);
    r.in_channel = std::stoull(f[4]);
    const std::size_t len = std::stoull(f[5]);
    std::stringstream ss(f[6]);
    std::string tok;
    while (ss >> tok) r.values.push_back(std::strtof(tok.c_str(), nullptr));
    if (r.values.size() != len) throw std::invalid_argument("filter csv: length does not match value count");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace phit
