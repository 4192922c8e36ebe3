#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "phit/checkpoint.hpp"
#include "phit/cli.hpp"
#include "phit/eval.hpp"
#include "phit/gradcheck.hpp"
#include "phit/training.hpp"
#include "synthetic.hpp"

using namespace phit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Var<double> random_var(Shape s, std::uint64_t seed, bool grad = true) {
  const auto n = shape_size(s);
  return Var<double>::leaf(Tensor<double>(std::move(s), oracle::random_values(n, seed)), grad);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("phit_accept_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  using Op = std::function<Var<double>(std::vector<Var<double>>&)>;
  struct Case {
    std::string name;
    Op op;
    std::vector<Var<double>> inputs;
  };
  std::vector<std::string> names;
  std::size_t total = 0, failed = 0;
  double worst = 0;
  std::string worst_op;
  for (std::uint64_t k = 0; k < 20; ++k) {
    std::mt19937_64 g(1000 + k);
    auto dim = [&](std::size_t lo, std::size_t hi) { return lo + g() % (hi - lo + 1); };
    const std::size_t B = dim(2, 4), C = dim(1, 3), L = dim(3, 9), K = dim(1, 5), O = dim(1, 3);
    const std::uint64_t s = 100 * k;
    std::vector<int> labels(B);
    for (auto& y : labels) y = static_cast<int>(g() % O);
    std::vector<int> ids(B);
    for (std::size_t b = 0; b < B; ++b) ids[b] = static_cast<int>(b % 2);
    std::vector<std::size_t> rows{B - 1, 0};
    std::vector<Case> cases;
    cases.push_back({"conv1d", [](auto& in) { return conv1d(in[0], in[1], in[2]); },
                     {random_var({B, C, L}, s + 1), random_var({O, C, K}, s + 2), random_var({O}, s + 3)}});
    cases.push_back({"batchnorm1d",
                     [C](auto& in) {
                       auto st = BatchNormState<double>::make(C);
                       st.gamma = in[1];
                       st.beta = in[2];
                       return batchnorm1d(in[0], st);
                     },
                     {random_var({B, C, L}, s + 4), random_var({C}, s + 5), random_var({C}, s + 6)}});
    cases.push_back({"bnm_forward",
                     [C, ids](auto& in) {
                       std::vector<BatchNormState<double>> bank{BatchNormState<double>::make(C),
                                                                BatchNormState<double>::make(C)};
                       bank[1].gamma = in[1];
                       bank[1].beta = in[2];
                       return bnm_forward(in[0], ids, bank);
                     },
                     {random_var({B, C, L}, s + 7), random_var({C}, s + 8), random_var({C}, s + 9)}});
    cases.push_back({"gather_rows", [rows](auto& in) { return gather_rows(in[0], std::span<const std::size_t>(rows)); },
                     {random_var({B, C, L}, s + 10)}});
    cases.push_back({"scatter_rows",
                     [B](auto& in) {
                       std::vector<std::vector<std::size_t>> r{{}, {}};
                       for (std::size_t b = 0; b < B; ++b) r[b % 2].push_back(b);
                       return scatter_rows<double>({in[0], in[1]}, r, B);
                     },
                     {random_var({(B + 1) / 2, C, L}, s + 11), random_var({B / 2, C, L}, s + 12)}});
    cases.push_back({"maxpool1d_same", [K](auto& in) { return maxpool1d_same(in[0], K); }, {random_var({B, C, L}, s + 13)}});
    cases.push_back({"gap", [](auto& in) { return gap(in[0]); }, {random_var({B, C, L}, s + 14)}});
    cases.push_back({"dense", [](auto& in) { return dense(in[0], in[1], in[2]); },
                     {random_var({B, C}, s + 15), random_var({O, C}, s + 16), random_var({O}, s + 17)}});
    cases.push_back({"relu", [](auto& in) { return relu(in[0]); }, {random_var({B, C, L}, s + 18)}});
    cases.push_back({"concat_channels", [](auto& in) { return concat_channels<double>({in[0], in[1]}); },
                     {random_var({B, C, L}, s + 19), random_var({B, O, L}, s + 20)}});
    cases.push_back({"residual_add", [](auto& in) { return residual_add(in[0], in[1]); },
                     {random_var({B, C, L}, s + 21), random_var({B, C, L}, s + 22)}});
    cases.push_back({"softmax_cross_entropy",
                     [labels](auto& in) { return softmax_cross_entropy(in[0], std::span<const int>(labels)); },
                     {random_var({B, O + 1}, s + 23)}});
    for (auto& c : cases) {
      if (k == 0) names.push_back(c.name);
      const auto r = finite_diff_check(c.op, c.inputs, 1e-3, s + 99);
      ++total;
      if (!r.passed) ++failed;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_op = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 60.0,
          std::to_string(names.size()) + " ops x 20 random cases, " + std::to_string(failed) + "/" +
              std::to_string(total) + " failed, max rel error " + fmt("%.2e", worst) + " (" + worst_op + "), " +
              fmt("%.1f", secs) + " s"};
}

Outcome bnm_collapse() {
  std::size_t mismatches = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    std::mt19937_64 g(k);
    const std::size_t B = 1 + g() % 8, C = 1 + g() % 5, L = 1 + g() % 12;
    const auto v = oracle::random_values(B * C * L, 5000 + k, -3, 3);
    auto plain = BatchNormState<double>::make(C);
    const auto gv = oracle::random_values(C, 7000 + k, 0.5, 1.5), bv = oracle::random_values(C, 8000 + k);
    plain.gamma = Var<double>::parameter(Tensor<double>({C}, gv));
    plain.beta = Var<double>::parameter(Tensor<double>({C}, bv));
    std::vector<BatchNormState<double>> bank{plain.clone()};
    const std::vector<int> ids(B, 0);
    auto xa = Var<double>::leaf(Tensor<double>({B, C, L}, v), true);
    auto xb = Var<double>::leaf(Tensor<double>({B, C, L}, v), true);
    auto ya = bnm_forward(xa, ids, bank);
    auto yb = batchnorm1d(xb, plain);
    if (ya.value() != yb.value()) ++mismatches;
    const auto seed_grad = Tensor<double>(ya.shape(), oracle::random_values(ya.value().size(), 9000 + k));
    backward(ya, seed_grad);
    backward(yb, seed_grad);
    if (xa.grad() != xb.grad() || bank[0].gamma.grad() != plain.gamma.grad()) ++mismatches;
    if (bank[0].running_mean != plain.running_mean || bank[0].running_var != plain.running_var) ++mismatches;
    bank[0].mode = plain.mode = Mode::Eval;
    if (bnm_forward(xa, ids, bank).value() != batchnorm1d(xb, plain).value()) ++mismatches;
  }
  return {mismatches == 0, "100 random batches, train and eval, " + std::to_string(mismatches) + " mismatches"};
}

Outcome bnm_partition() {
  double worst_oracle = 0;
  std::size_t inexact = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    std::mt19937_64 g(k + 31);
    const std::size_t S = 2 + g() % 3, C = 1 + g() % 4, L = 2 + g() % 10, B = S + g() % 10;
    std::vector<int> ids(B);
    for (std::size_t b = 0; b < B; ++b) ids[b] = static_cast<int>(b < S ? b : g() % S);
    std::shuffle(ids.begin(), ids.end(), g);
    const auto v = oracle::random_values(B * C * L, 300 + k, -2, 2);
    std::vector<BatchNormState<double>> bank, reference;
    for (std::size_t s = 0; s < S; ++s) {
      auto st = BatchNormState<double>::make(C);
      st.gamma = Var<double>::parameter(Tensor<double>({C}, oracle::random_values(C, 400 + 10 * k + s, 0.5, 2)));
      st.beta = Var<double>::parameter(Tensor<double>({C}, oracle::random_values(C, 500 + 10 * k + s)));
      bank.push_back(st.clone());
      reference.push_back(st.clone());
    }
    const auto x = Var<double>::constant(Tensor<double>({B, C, L}, v));
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      for (auto& s : bank) s.mode = mode;
      for (auto& s : reference) s.mode = mode;
      const auto y = bnm_forward(x, ids, bank).value();
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<std::size_t> rows;
        for (std::size_t b = 0; b < B; ++b)
          if (ids[b] == static_cast<int>(s)) rows.push_back(b);
        Tensor<double> part({rows.size(), C, L});
        for (std::size_t i = 0; i < rows.size(); ++i)
          std::copy_n(v.data() + rows[i] * C * L, C * L, part.data() + i * C * L);
        oracle::Array3 pa{rows.size(), C, L, part.values()};
        const auto expect = batchnorm1d(Var<double>::constant(part), reference[s]).value();
        oracle::Array3 ref;
        if (mode == Mode::Train) {
          std::vector<double> mean, var;
          ref = oracle::batchnorm_train(pa, reference[s].gamma.value().values(), reference[s].beta.value().values(),
                                        1e-5, &mean, &var);
        }
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < L; ++t) {
              const double got = y.at(rows[i], c, t);
              if (got != expect.at(i, c, t)) ++inexact;
              if (mode == Mode::Train) worst_oracle = std::max(worst_oracle, std::abs(got - ref.at(i, c, t)));
            }
        if (mode == Mode::Train &&
            (bank[s].running_mean != reference[s].running_mean || bank[s].running_var != reference[s].running_var))
          ++inexact;
      }
    }
  }
  return {inexact == 0 && worst_oracle <= 1e-6,
          "100 random batches with 2-4 ids, " + std::to_string(inexact) +
              " differences from per-partition BN, max |diff| to long-double oracle " + fmt("%.2e", worst_oracle)};
}

Outcome pretext_learnability() {
  const auto t0 = Clock::now();
  std::vector<LabeledDataset> sources{synth::waveform_dataset("sine", synth::Shape::Sine, 50, 64, 11),
                                      synth::waveform_dataset("square", synth::Shape::Square, 50, 64, 12),
                                      synth::waveform_dataset("noise", synth::Shape::Noise, 50, 64, 13)};
  BackboneConfig bb;
  bb.num_modules = 3;
  bb.split_at = 2;  // the pretext model holds the first two modules
  TrainConfig tc;
  tc.pretext_epochs = 100;
  tc.batch_size = 64;
  auto res = train_pretext<float>(sources, bb, tc, 0);
  const auto pt = build_pretext_dataset(sources);
  std::vector<ModelGraph<float>*> one{&res.model};
  const double acc = accuracy(predict(one, pt), pt.dataset_ids);
  const double secs = seconds_since(t0);
  return {acc >= 0.95 && secs < 300.0 && res.model.modules.size() == 2,
          "3 sources x 50 x 64, 2 modules, 100 epochs: train accuracy " + fmt("%.4f", acc) + ", " + fmt("%.1f", secs) +
              " s"};
}

Outcome finetune_benefit() {
  const auto t0 = Clock::now();
  const std::size_t L = 64;
  // noise close to the bump height so that 20 samples do not saturate the baseline
  std::vector<LabeledDataset> train{synth::motif_dataset("small", 20, L, 1.0, 21),
                                    synth::motif_dataset("wide", 200, L, 1.2, 22),
                                    synth::motif_dataset("mid", 200, L, 0.8, 23)};
  const auto test = synth::motif_dataset("small", 200, L, 1.0, 24, Split::Test);
  BackboneConfig bb;
  bb.num_modules = 4;
  bb.split_at = 2;
  bb.filters_per_branch = 8;
  bb.bottleneck_size = 8;
  bb.kernel_sizes = {20, 10, 5};
  TrainConfig tc;
  tc.pretext_epochs = tc.finetune_epochs = 100;
  tc.baseline_epochs = 200;
  double ft_sum = 0, bl_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto pt = train_pretext<float>(train, bb, tc, seed);
    auto ft = finetune(pt.model, train[0], 0, tc, seed);
    auto bl = train_baseline<float>(train[0], bb, tc, seed);
    std::vector<ModelGraph<float>*> f{&ft.model}, b{&bl.model};
    const double fa = accuracy(predict(f, test), test.labels), ba = accuracy(predict(b, test), test.labels);
    ft_sum += fa;
    bl_sum += ba;
    per_seed += (seed ? " " : "") + fmt("%.3f", fa) + "/" + fmt("%.3f", ba);
  }
  const double secs = seconds_since(t0);
  const double ft_mean = ft_sum / 5, bl_mean = bl_sum / 5;
  return {ft_mean >= bl_mean && secs < 900.0,
          "20-sample target, 100+100 vs 200 epochs, 5 seeds: fine-tuned mean " + fmt("%.4f", ft_mean) +
              " vs baseline mean " + fmt("%.4f", bl_mean) + " (per seed " + per_seed + "), " + fmt("%.1f", secs) + " s"};
}

cli::CommandOptions tiny_options(const fs::path& root, const fs::path& out) {
  cli::CommandOptions o;
  o.config_path = (root / "run.cfg").string();
  o.out = out.string();
  o.seeds = "0,1";
  return o;
}

void write_tiny_archive(const fs::path& root) {
  std::uint64_t seed = 40;
  for (const char* name : {"Alpha", "Beta"}) {
    synth::write_ucr(root / "archive", synth::motif_dataset(name, 16, 40, 0.5, seed++), Split::Train);
    synth::write_ucr(root / "archive", synth::motif_dataset(name, 12, 40, 0.5, seed++, Split::Test), Split::Test);
  }
  std::ofstream(root / "domains.tsv") << "Alpha\tECG\nBeta\tECG\n";
  std::ofstream(root / "run.cfg") << "archive_root = " << (root / "archive").string() << "\n"
                                  << "domain_map = " << (root / "domains.tsv").string() << "\n"
                                  << "exclusions = none\nnum_modules = 2\nsplit_at = 1\nfilters_per_branch = 4\n"
                                  << "bottleneck_size = 4\nkernel_sizes = 8,4,2\nbatch_size = 8\n"
                                  << "pretext_epochs = 4\nfinetune_epochs = 4\nbaseline_epochs = 8\nlog_every = 0\n";
}

Outcome epoch_budget() {
  const TrainConfig def;
  const bool defaults_ok = def.pretext_epochs == 750 && def.finetune_epochs == 750 && def.baseline_epochs == 1500 &&
                           def.epoch_budget_ok();
  const auto root = scratch("budget");
  write_tiny_archive(root);
  std::ostringstream sink;
  auto o = tiny_options(root, root / "runs");
  o.domain = "ECG";
  const int rc = cli::cmd_pretrain(o, sink, sink) + cli::cmd_finetune(o, sink, sink) + cli::cmd_baseline(o, sink, sink);
  bool manifests_ok = rc == 0;
  std::string seen;
  for (const char* d : {"Alpha", "Beta"})
    for (const char* s : {"0", "1"}) {
      if (!manifests_ok) break;
      const auto ft = cli::read_key_values(root / "runs/finetune" / d / s / "run_manifest.txt");
      const auto bl = cli::read_key_values(root / "runs/baseline" / d / s / "run_manifest.txt");
      const int p = std::stoi(ft.at("epochs.pretext_realized")), f = std::stoi(ft.at("epochs.finetune_realized"));
      const int total = std::stoi(ft.at("epochs.total_realized")), b = std::stoi(bl.at("epochs.baseline_realized"));
      manifests_ok = manifests_ok && p + f == total && total <= b && b == std::stoi(ft.at("epochs.baseline_budget"));
      seen = std::to_string(p) + "+" + std::to_string(f) + " <= " + std::to_string(b);
    }
  fs::remove_all(root);
  return {defaults_ok && manifests_ok, "defaults 750+750 <= 1500; run manifests (4 runs) realize " + seen +
                                           (rc ? ", commands failed: " + sink.str() : "")};
}

Outcome wilcoxon_exactness() {
  std::mt19937_64 g(2024);
  double worst = 0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + g() % 12;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(g() % 30) / 30.0;
      b[i] = static_cast<double>(g() % 30) / 30.0;
    }
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(a, b).p_value - oracle::wilcoxon_bruteforce(a, b)));
  }
  const std::vector<double> same{0.4, 0.8, 0.9};
  const auto deg = wilcoxon_signed_rank(same, same);
  return {worst < 1e-12 && deg.p_value == 1.0,
          "200 cases n<=12, max |dp| to enumeration " + fmt("%.2e", worst) + "; all-tie input p = " +
              fmt("%.1f", deg.p_value)};
}

Outcome table_formatter() {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> acc(0.3, 0.9), gap(0.001, 0.05);
  std::ostringstream motion_csv;
  motion_csv << "dataset,classifier,accuracy,domain,train_size\n";
  for (int i = 0; i < 13; ++i) {
    const double x = acc(g);
    const double y = i < 11 ? x - gap(g) : i == 11 ? x : x + gap(g);
    motion_csv << "M" << i << ",finetuned," << fmt("%.4f", x) << ",Motion,\n";
    motion_csv << "M" << i << ",baseline," << fmt("%.4f", y) << ",Motion,\n";
  }
  std::istringstream motion_in(motion_csv.str());
  const auto motion = parse_results_csv(motion_in);
  std::ostringstream text;
  write_domain_report_text(text, per_domain_report(motion, "finetuned", "baseline"), "finetuned", "baseline");
  const bool pct = text.str().find("7.69 %") != std::string::npos;

  std::ostringstream csv;
  csv << "dataset,classifier,accuracy\n";
  for (int i = 0; i < 88; ++i) {
    const double x = acc(g);
    const double y = i < 48 ? x - gap(g) : i < 71 ? x + gap(g) : x;
    csv << "D" << i << ",finetuned," << fmt("%.4f", x) << "\nD" << i << ",baseline," << fmt("%.4f", y) << '\n';
  }
  std::istringstream in(csv.str());
  const auto table = parse_results_csv(in);
  std::vector<double> a, b;
  for (int i = 0; i < 88; ++i) {
    a.push_back(*table.get("D" + std::to_string(i), "finetuned"));
    b.push_back(*table.get("D" + std::to_string(i), "baseline"));
  }
  const auto w = win_tie_loss(a, b);
  return {pct && w == WinTieLoss{48, 17, 23},
          std::string("11/1/1 over 13 datasets prints ") + (pct ? "7.69 %" : "something else") +
              "; reconstructed global counts (" + std::to_string(w.wins) + ", " + std::to_string(w.ties) + ", " +
              std::to_string(w.losses) + ")"};
}

Outcome scheduler() {
  const PlateauConfig cfg;
  PlateauState st;
  std::vector<double> trace;
  for (int e = 0; e <= cfg.patience; ++e) trace.push_back(reduce_lr_on_plateau(st, 1.0, cfg));
  const bool halves = trace[static_cast<std::size_t>(cfg.patience) - 1] == 1e-3 &&
                      trace[static_cast<std::size_t>(cfg.patience)] == 5e-4;
  for (int e = 0; e < 5000; ++e) reduce_lr_on_plateau(st, 1.0, cfg);
  const bool floors = st.lr == cfg.min_lr;
  PlateauState up;
  bool steady = true;
  for (int e = 0; e < 2000; ++e) steady = steady && reduce_lr_on_plateau(up, 100.0 - 0.01 * e, cfg) == 1e-3;
  return {halves && floors && steady, std::string("constant loss: 1e-3 until the ") + std::to_string(cfg.patience) +
                                          "th stalled epoch, then 5e-4; floor " + fmt("%.0e", st.lr) +
                                          "; improving trace " + (steady ? "never reduced" : "reduced")};
}

Outcome reproducibility() {
  const auto root = scratch("repro");
  write_tiny_archive(root);
  std::ostringstream sink;
  auto a = tiny_options(root, root / "a");
  auto b = tiny_options(root, root / "b");
  a.domain = b.domain = "ECG";
  const int rc = cli::cmd_pretrain(a, sink, sink) + cli::cmd_pretrain(b, sink, sink);
  bool same = rc == 0;
  for (const char* s : {"0", "1"}) {
    if (!same) break;
    const auto da = root / "a/pretext/ECG" / s, db = root / "b/pretext/ECG" / s;
    same = oracle::read_bytes(da / "checkpoint.bin") == oracle::read_bytes(db / "checkpoint.bin") &&
           oracle::read_text(da / "history.csv") == oracle::read_text(db / "history.csv") &&
           oracle::read_text(da / "checkpoint.manifest") == oracle::read_text(db / "checkpoint.manifest");
  }
  fs::remove_all(root);
  return {same, "two pretrain runs, seeds 0 and 1: checkpoints, manifests and histories " +
                    std::string(same ? "bit-identical" : "differ")};
}

Outcome checkpoint_round_trip() {
  const auto root = scratch("ckpt");
  auto g = build_pretext_model<float>(BackboneConfig{}, 3, 5, {"a", "b", "c"});
  Batch<float> batch;
  const auto v = oracle::random_values(6 * 50, 3);
  batch.inputs = Tensor<float>({6, 1, 50}, std::vector<float>(v.begin(), v.end()));
  batch.dataset_ids = {0, 1, 2, 0, 1, 2};
  batch.labels = batch.dataset_ids;
  forward(g, batch, Mode::Train);
  const auto before = forward(g, batch, Mode::Eval).value();
  save_checkpoint((root / "one").string(), g, {5, 3, 0.25, {}});
  auto loaded = load_checkpoint<float>((root / "one").string());
  save_checkpoint((root / "two").string(), loaded.model, loaded.meta);
  const bool bytes = oracle::read_bytes(root / "one.bin") == oracle::read_bytes(root / "two.bin");
  const bool logits = forward(loaded.model, batch, Mode::Eval).value() == before;
  fs::remove_all(root);
  return {bytes && logits, std::string("default-width pretext model: blobs ") + (bytes ? "identical" : "differ") +
                               ", eval logits " + (logits ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"BNM single-state collapse", bnm_collapse},
      {"BNM partition oracle", bnm_partition},
      {"pretext learnability", pretext_learnability},
      {"fine-tune benefit", finetune_benefit},
      {"epoch budget", epoch_budget},
      {"Wilcoxon exactness", wilcoxon_exactness},
      {"domain table formatter", table_formatter},
      {"plateau scheduler", scheduler},
      {"reproducibility", reproducibility},
      {"checkpoint round trip", checkpoint_round_trip},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
