#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "phit/autograd.hpp"

namespace phit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// First/second moment estimates, one pair per parameter.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  long step = 0;
};

/**
 * Bias-corrected Adam update applied in place to every parameter that has
 * received a gradient. Parameters without a gradient still see their
 * moments decay.
 */
template <typename T>
void adam_step(std::vector<Var<T>>& params, AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& w = params[i].value();
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    if (m.shape() != w.shape()) throw ShapeError("adam_step: moment shape mismatch");
    const bool has = params[i].has_grad();
    const T* g = has ? params[i].grad().data() : nullptr;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const T gj = has ? g[j] : T{0};
      m[j] = b1 * m[j] + (T{1} - b1) * gj;
      v[j] = b2 * v[j] + (T{1} - b2) * gj * gj;
      w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
}

struct PlateauConfig {
  double factor = 0.5;
  int patience = 50;
  double min_lr = 1e-4;
  double min_delta = 1e-4;
};

/// Learning-rate decay on a stalled training loss.
struct PlateauState {
  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;
};

/// Feeds one epoch loss and returns the learning rate for the next epoch.
inline double reduce_lr_on_plateau(PlateauState& state, double epoch_loss, const PlateauConfig& cfg) {
  if (epoch_loss < state.best - cfg.min_delta) {
    state.best = epoch_loss;
    state.wait = 0;
    return state.lr;
  }
  if (++state.wait >= cfg.patience) {
    state.lr = std::max(state.lr * cfg.factor, cfg.min_lr);
    state.wait = 0;
  }
  return state.lr;
}

}  // namespace phit
