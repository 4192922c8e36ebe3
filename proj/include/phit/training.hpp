#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phit/data.hpp"
#include "phit/model.hpp"
#include "phit/ops.hpp"
#include "phit/optim.hpp"

namespace phit {

struct TrainConfig {
  std::size_t batch_size = 64;
  int pretext_epochs = 750;
  int finetune_epochs = 750;
  int baseline_epochs = 1500;
  double initial_lr = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 50;
  double min_lr = 1e-4;
  double min_delta = 1e-4;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  // Fresh optimizer and scheduler when fine-tuning starts.
  bool reset_scheduler_on_finetune = true;
  AdamConfig adam;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
    if (pretext_epochs < 1 || finetune_epochs < 1 || baseline_epochs < 1) {
      throw std::invalid_argument("train config: epoch counts must be positive");
    }
    if (!(initial_lr > 0) || !(min_lr > 0) || plateau_patience < 1) {
      throw std::invalid_argument("train config: learning rates and patience must be positive");
    }
    if (!(plateau_factor > 0 && plateau_factor < 1)) throw std::invalid_argument("train config: plateau_factor must be in (0,1)");
    if (seeds.empty()) throw std::invalid_argument("train config: at least one seed is required");
  }

  /// Pre-training plus fine-tuning never exceeds the baseline's budget.
  bool epoch_budget_ok() const { return pretext_epochs + finetune_epochs <= baseline_epochs; }

  PlateauConfig plateau() const { return {plateau_factor, plateau_patience, min_lr, min_delta}; }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0;
  double accuracy = 0;
  double lr = 0;  // rate used during this epoch
};

struct TrainRun {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  std::vector<std::string> checkpoint_paths;
  double final_lr = 0;

  int epochs_run() const { return static_cast<int>(history.size()); }
};

struct BestCheckpoint {
  int epoch = -1;
  double loss = 0;
  std::string path;
};

/// Argmin of the epoch losses; the earliest epoch wins ties.
inline BestCheckpoint select_best(const TrainRun& run) {
  if (run.history.empty()) throw std::invalid_argument("select_best: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < run.history.size(); ++i)
    if (run.history[i].loss < run.history[best].loss) best = i;
  BestCheckpoint b{static_cast<int>(best), run.history[best].loss, {}};
  if (!run.checkpoint_paths.empty()) b.path = run.checkpoint_paths.back();
  return b;
}

template <typename T>
struct TrainResult {
  TrainRun run;
  ModelGraph<T> model;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

/// Copy of every persisted tensor, for best-epoch restore.
template <typename T>
std::vector<std::vector<T>> snapshot(ModelGraph<T>& model) {
  std::vector<std::vector<T>> out;
  model.for_each_tensor([&](const std::string&, const Shape&, std::span<T> v, bool) { out.emplace_back(v.begin(), v.end()); });
  return out;
}

template <typename T>
void restore(ModelGraph<T>& model, const std::vector<std::vector<T>>& snap) {
  std::size_t i = 0;
  model.for_each_tensor([&](const std::string&, const Shape&, std::span<T> v, bool) {
    std::copy(snap[i].begin(), snap[i].end(), v.begin());
    ++i;
  });
}

inline int argmax_row(const auto& tensor, std::size_t row) {
  const std::size_t K = tensor.dim(1);
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (tensor.at(row, k) > tensor.at(row, best)) best = k;
  return static_cast<int>(best);
}

}  // namespace detail

/**
 * Mini-batch Adam with plateau decay on the epoch training loss. Batches
 * are reshuffled every epoch from derive_seed(seed, epoch). The parameters
 * of the lowest-loss epoch are restored before returning.
 */
template <typename T, typename Data>
TrainRun fit(ModelGraph<T>& model, const Data& data, int epochs, const TrainConfig& cfg, std::uint64_t seed,
             PlateauState sched, const EpochCallback& on_epoch = {}) {
  if (data.size() == 0) throw std::invalid_argument("fit: empty training set");
  TrainRun run;
  AdamState<T> adam;
  auto params = model.trainable_parameters();
  const PlateauConfig pcfg = cfg.plateau();
  std::vector<std::vector<T>> best_snapshot;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = sched.lr;
    auto batches = make_batches<T>(data, cfg.batch_size, derive_seed(seed, static_cast<std::uint64_t>(epoch)), true);
    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    for (const auto& batch : batches) {
      model.zero_grad();
      Var<T> logits = forward(model, batch, Mode::Train);
      Var<T> loss = softmax_cross_entropy(logits, std::span<const int>(batch.labels));
      backward(loss);
      adam_step(params, adam, lr, cfg.adam);
      loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b)
        if (detail::argmax_row(logits.value(), b) == batch.labels[b]) ++correct;
      seen += batch.size();
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen), lr};
    if (!std::isfinite(rec.loss)) throw std::runtime_error("fit: training loss diverged at epoch " + std::to_string(epoch));
    run.history.push_back(rec);
    if (rec.loss < best_loss) {
      best_loss = rec.loss;
      run.best_epoch = epoch;
      best_snapshot = detail::snapshot(model);
    }
    reduce_lr_on_plateau(sched, rec.loss, pcfg);
    if (on_epoch) on_epoch(rec);
  }
  model.zero_grad();
  detail::restore(model, best_snapshot);
  run.final_lr = sched.lr;
  return run;
}

/// Pretext training: predict the source dataset of every series.
template <typename T>
TrainResult<T> train_pretext(const std::vector<LabeledDataset>& datasets, const BackboneConfig& backbone,
                             const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  if (datasets.size() < 2) throw std::invalid_argument("train_pretext: needs at least two datasets");
  for (const auto& d : datasets)
    if (d.split != Split::Train) throw std::invalid_argument("train_pretext: '" + d.name + "' is not a train split");
  const PretextDataset pt = build_pretext_dataset(datasets);
  TrainResult<T> r{{}, build_pretext_model<T>(backbone, pt.num_sources(), seed, pt.source_names)};
  r.run = fit(r.model, pt, cfg.pretext_epochs, cfg, seed, PlateauState{cfg.initial_lr}, on_epoch);
  return r;
}

/**
 * Extends a trained pretext model for `dataset` (found at `dataset_id` in
 * its source list) and trains the whole network on the class labels.
 * `carried` continues the pretext scheduler when resets are disabled.
 */
template <typename T>
TrainResult<T> finetune(const ModelGraph<T>& pretext, const LabeledDataset& dataset, std::size_t dataset_id,
                        const TrainConfig& cfg, std::uint64_t seed, std::optional<PlateauState> carried = std::nullopt,
                        const EpochCallback& on_epoch = {}) {
  if (dataset.num_classes < 2) throw std::invalid_argument("finetune: '" + dataset.name + "' has fewer than two classes");
  if (dataset_id < pretext.output_names.size() && pretext.output_names[dataset_id] != dataset.name) {
    throw std::invalid_argument("finetune: pretext source " + std::to_string(dataset_id) + " is '" +
                                pretext.output_names[dataset_id] + "', not '" + dataset.name + "'");
  }
  TrainResult<T> r{{}, build_finetune_model(pretext, dataset_id, static_cast<std::size_t>(dataset.num_classes), seed,
                                            dataset.class_tokens)};
  PlateauState sched{cfg.initial_lr};
  if (!cfg.reset_scheduler_on_finetune && carried) sched = *carried;
  r.run = fit(r.model, dataset, cfg.finetune_epochs, cfg, seed, sched, on_epoch);
  return r;
}

/// Full backbone from random initialisation for the baseline budget.
template <typename T>
TrainResult<T> train_baseline(const LabeledDataset& dataset, const BackboneConfig& backbone, const TrainConfig& cfg,
                              std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  if (dataset.num_classes < 2) throw std::invalid_argument("train_baseline: '" + dataset.name + "' has fewer than two classes");
  TrainResult<T> r{{}, build_baseline_model<T>(backbone, static_cast<std::size_t>(dataset.num_classes), seed,
                                              dataset.class_tokens)};
  r.run = fit(r.model, dataset, cfg.baseline_epochs, cfg, seed, PlateauState{cfg.initial_lr}, on_epoch);
  return r;
}

// ---------------------------------------------------------------------------
// inference
// ---------------------------------------------------------------------------

/// Mean of the models' softmax outputs (eval mode), [B, K].
template <typename T>
Tensor<T> ensemble_predict(std::vector<ModelGraph<T>*> models, const Batch<T>& batch) {
  if (models.empty()) throw std::invalid_argument("ensemble_predict: no models");
  const std::size_t K = models[0]->num_outputs;
  Tensor<T> mean({batch.size(), K});
  for (auto* m : models) {
    if (m->num_outputs != K) throw std::invalid_argument("ensemble_predict: models disagree on the number of outputs");
    const Tensor<T> p = softmax(forward(*m, batch, Mode::Eval).value());
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (auto& v : mean.values()) v /= static_cast<T>(models.size());
  return mean;
}

/// Row argmax, lowest index on ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& probs) {
  std::vector<int> out;
  for (std::size_t b = 0; b < probs.dim(0); ++b) out.push_back(detail::argmax_row(probs, b));
  return out;
}

/// Ensemble predictions for every sample of `data`, in sample order.
template <typename T, typename Data>
std::vector<int> predict(std::vector<ModelGraph<T>*> models, const Data& data, std::size_t batch_size = 64) {
  std::vector<int> out(data.size());
  for (const auto& batch : make_batches<T>(data, batch_size, 0, false)) {
    const auto pred = argmax_rows(ensemble_predict(models, batch));
    for (std::size_t i = 0; i < pred.size(); ++i) out[batch.indices[i]] = pred[i];
  }
  return out;
}

}  // namespace phit
