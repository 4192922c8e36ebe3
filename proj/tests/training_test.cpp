#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "phit/eval.hpp"
#include "phit/training.hpp"
#include "synthetic.hpp"

using namespace phit;

namespace {

BackboneConfig tiny_backbone() {
  BackboneConfig c;
  c.num_modules = 2;
  c.split_at = 1;
  c.filters_per_branch = 4;
  c.bottleneck_size = 4;
  c.kernel_sizes = {8, 4, 2};
  c.use_hybrid_filters = false;
  return c;
}

TrainConfig short_run(int epochs) {
  TrainConfig t;
  t.pretext_epochs = t.finetune_epochs = epochs;
  t.baseline_epochs = 2 * epochs;
  t.batch_size = 16;
  return t;
}

std::vector<float> weights(ModelGraph<float>& g) {
  std::vector<float> out;
  g.for_each_tensor([&](const std::string&, const Shape&, std::span<float> v, bool) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

}  // namespace

TEST(TrainConfig, DefaultsAndBudget) {
  const TrainConfig t;
  EXPECT_EQ(t.batch_size, 64u);
  EXPECT_EQ(t.pretext_epochs, 750);
  EXPECT_EQ(t.finetune_epochs, 750);
  EXPECT_EQ(t.baseline_epochs, 1500);
  EXPECT_EQ(t.pretext_epochs + t.finetune_epochs, t.baseline_epochs);
  EXPECT_TRUE(t.epoch_budget_ok());
  EXPECT_EQ(t.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  TrainConfig bad;
  bad.plateau_factor = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SelectBest, ExamplesAndOracle) {
  auto run_of = [](std::vector<double> losses) {
    TrainRun r;
    for (std::size_t i = 0; i < losses.size(); ++i) r.history.push_back({static_cast<int>(i), losses[i], 0, 0});
    return r;
  };
  EXPECT_EQ(select_best(run_of({3, 2, 2.5})).epoch, 1);
  EXPECT_EQ(select_best(run_of({2, 2})).epoch, 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto v = oracle::random_values(30, seed, 0, 5);
    v[7] = v[19] = -1;  // forced tie
    const auto best = select_best(run_of(v));
    EXPECT_EQ(best.epoch, static_cast<int>(oracle::argmin_first(v)));
    for (double x : v) EXPECT_LE(best.loss, x);
  }
  EXPECT_THROW(select_best(TrainRun{}), std::invalid_argument);
}

TEST(Baseline, ReachesPerfectTrainAccuracyOnSeparableData) {
  const auto data = synth::separable(24, 32, 1);
  auto res = train_baseline<float>(data, tiny_backbone(), short_run(30), 0);
  double best_acc = 0;
  for (const auto& r : res.run.history) best_acc = std::max(best_acc, r.accuracy);
  EXPECT_EQ(best_acc, 1.0);
  std::vector<ModelGraph<float>*> one{&res.model};
  EXPECT_EQ(accuracy(predict(one, data), data.labels), 1.0);
}

TEST(Baseline, SameSeedSameRun) {
  const auto data = synth::separable(20, 24, 2);
  auto a = train_baseline<float>(data, tiny_backbone(), short_run(4), 11);
  auto b = train_baseline<float>(data, tiny_backbone(), short_run(4), 11);
  ASSERT_EQ(a.run.history.size(), b.run.history.size());
  for (std::size_t i = 0; i < a.run.history.size(); ++i) {
    EXPECT_EQ(a.run.history[i].loss, b.run.history[i].loss);
    EXPECT_EQ(a.run.history[i].accuracy, b.run.history[i].accuracy);
  }
  EXPECT_EQ(weights(a.model), weights(b.model));
  auto c = train_baseline<float>(data, tiny_backbone(), short_run(4), 12);
  EXPECT_NE(weights(a.model), weights(c.model));
}

TEST(Fit, LearningRateTraceAndBestEpoch) {
  const auto data = synth::separable(16, 16, 3);
  auto cfg = short_run(40);
  cfg.plateau_patience = 3;
  cfg.min_lr = 2e-4;
  auto res = train_baseline<float>(data, tiny_backbone(), cfg, 5);
  const auto& h = res.run.history;
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i].lr, h[i - 1].lr);
  for (const auto& r : h) EXPECT_GE(r.lr, cfg.min_lr);
  const auto best = select_best(res.run);
  EXPECT_EQ(best.epoch, res.run.best_epoch);
  EXPECT_EQ(res.run.epochs_run(), cfg.baseline_epochs);
}

TEST(Pretext, SeparableSourcesAreLearned) {
  std::vector<LabeledDataset> sources{synth::waveform_dataset("sine", synth::Shape::Sine, 20, 48, 1),
                                      synth::waveform_dataset("noise", synth::Shape::Noise, 20, 48, 2)};
  auto res = train_pretext<float>(sources, tiny_backbone(), short_run(25), 0);
  EXPECT_GE(res.run.history[static_cast<std::size_t>(res.run.best_epoch)].accuracy, 0.95);
  EXPECT_EQ(res.model.output_names, (std::vector<std::string>{"sine", "noise"}));
  auto test = sources;
  test[0].split = Split::Test;
  EXPECT_THROW(train_pretext<float>(test, tiny_backbone(), short_run(1), 0), std::invalid_argument);
}

// Every bank collapsed to source 0: the two copies become indistinguishable.
TEST(Pretext, DuplicatedSourcesWithoutIdsAreIndistinguishable) {
  const auto a = synth::waveform_dataset("a", synth::Shape::Sine, 24, 32, 4);
  auto b = a;
  b.name = "b";
  auto res = train_pretext<float>({a, b}, tiny_backbone(), short_run(20), 1);
  const auto pt = build_pretext_dataset({a, b});
  auto batches = make_batches<float>(pt, 64, 0, false);
  ModelGraph<float> probe = res.model;
  for (auto& m : probe.modules)
    for (auto& s : m.bn) s = m.bn[0].clone();
  for (auto& sc : probe.shortcuts)
    for (auto& s : sc.bn) s = sc.bn[0].clone();
  const auto logits = forward(probe, batches[0], Mode::Eval).value();
  const std::size_t half = a.size();
  double loss = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(logits.at(i, k), logits.at(i + half, k));
  const auto probs = softmax(logits);
  for (std::size_t i = 0; i < pt.size(); ++i) {
    loss -= std::log(static_cast<double>(probs.at(i, static_cast<std::size_t>(pt.dataset_ids[i]))));
    correct += argmax_rows(probs)[i] == pt.dataset_ids[i];
  }
  EXPECT_EQ(correct, half);  // each pair gets the same prediction: exactly one of the two is right
  EXPECT_GE(loss / static_cast<double>(pt.size()), std::log(2.0) - 1e-6);
}

TEST(Finetune, ChecksSourceAndClasses) {
  std::vector<LabeledDataset> sources{synth::separable(8, 16, 1), synth::separable(8, 16, 2)};
  sources[1].name = "other";
  auto pt = train_pretext<float>(sources, tiny_backbone(), short_run(2), 0);
  EXPECT_THROW(finetune(pt.model, sources[0], 1, short_run(1), 0), std::invalid_argument);
  auto one_class = sources[0];
  one_class.num_classes = 1;
  EXPECT_THROW(finetune(pt.model, one_class, 0, short_run(1), 0), std::invalid_argument);
  auto ft = finetune(pt.model, sources[0], 0, short_run(3), 0);
  EXPECT_EQ(ft.model.kind, ModelKind::Finetune);
  EXPECT_EQ(ft.run.epochs_run(), 3);
}

TEST(Finetune, CarriedSchedulerOnlyWhenResetDisabled) {
  std::vector<LabeledDataset> sources{synth::separable(8, 16, 1), synth::separable(8, 16, 2)};
  sources[1].name = "other";
  auto pt = train_pretext<float>(sources, tiny_backbone(), short_run(2), 0);
  auto cfg = short_run(2);
  const PlateauState carried{2.5e-4};
  EXPECT_EQ(finetune(pt.model, sources[0], 0, cfg, 0, carried).run.history[0].lr, cfg.initial_lr);
  cfg.reset_scheduler_on_finetune = false;
  EXPECT_EQ(finetune(pt.model, sources[0], 0, cfg, 0, carried).run.history[0].lr, 2.5e-4);
}

TEST(Ensemble, SingleModelIsItsSoftmax) {
  auto g = build_baseline_model<float>(tiny_backbone(), 3, 0);
  Batch<float> b;
  const auto v = oracle::random_values(4 * 20, 1);
  b.inputs = Tensor<float>({4, 1, 20}, std::vector<float>(v.begin(), v.end()));
  b.labels = {0, 1, 2, 0};
  const auto p = ensemble_predict<float>({&g}, b);
  EXPECT_EQ(p, softmax(forward(g, b, Mode::Eval).value()));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p.at(i, 0) + p.at(i, 1) + p.at(i, 2), 1.0, 1e-6);
  auto other = build_baseline_model<float>(tiny_backbone(), 2, 0);
  EXPECT_THROW(ensemble_predict<float>({&g, &other}, b), std::invalid_argument);
}

TEST(Ensemble, OppositeConfidentModelsTieToLowestIndex) {
  auto a = build_baseline_model<float>(tiny_backbone(), 2, 0);
  auto b = build_baseline_model<float>(tiny_backbone(), 2, 0);
  for (auto* g : {&a, &b}) g->head_weight.value().fill(0.0f);
  a.head_bias.value() = Tensor<float>({2}, {10.0f, -10.0f});
  b.head_bias.value() = Tensor<float>({2}, {-10.0f, 10.0f});
  Batch<float> batch;
  batch.inputs = Tensor<float>({3, 1, 12}, 0.5f);
  batch.labels = {0, 0, 0};
  const auto p = ensemble_predict<float>({&a, &b}, batch);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(p.at(i, 0), p.at(i, 1));
  EXPECT_EQ(argmax_rows(p), (std::vector<int>{0, 0, 0}));
}

TEST(Ensemble, NotWorseThanWeakestMember) {
  const auto data = synth::motif_dataset("m", 30, 40, 0.8, 3);
  std::vector<TrainResult<float>> runs;
  for (std::uint64_t s = 0; s < 5; ++s) runs.push_back(train_baseline<float>(data, tiny_backbone(), short_run(5), s));
  std::vector<ModelGraph<float>*> all;
  double weakest = 1.0;
  for (auto& r : runs) {
    all.push_back(&r.model);
    std::vector<ModelGraph<float>*> one{&r.model};
    weakest = std::min(weakest, accuracy(predict(one, data), data.labels));
  }
  EXPECT_GE(accuracy(predict(all, data), data.labels), weakest);
}
