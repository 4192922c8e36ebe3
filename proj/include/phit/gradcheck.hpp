#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phit/autograd.hpp"
#include "phit/rng.hpp"

namespace phit {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/**
 * Compares reverse-mode gradients of `op` against central differences.
 *
 * The op output is reduced to a scalar through fixed random weights so every
 * output element contributes. Relative error is |a - n| / max(|a|, |n|, 1e-4),
 * the floor keeping near-zero entries from dominating.
 */
inline GradCheckReport finite_diff_check(const std::function<Var<double>(std::vector<Var<double>>&)>& op,
                                         std::vector<Var<double>> inputs, double tol, std::uint64_t seed = 7,
                                         double h = 1e-5) {
  Var<double> probe = op(inputs);
  Rng rng(seed);
  std::vector<double> weights(probe.value().size());
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);

  auto scalarize = [&](const Var<double>& out) {
    double s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * out.value()[i];
    return s;
  };

  for (auto& v : inputs) v.zero_grad();
  {
    Var<double> out = op(inputs);
    backward(out, Tensor<double>(out.shape(), weights));
  }

  GradCheckReport report;
  for (auto& v : inputs) {
    if (!v.requires_grad()) continue;
    const Tensor<double> analytic = v.has_grad() ? v.grad() : Tensor<double>(v.shape());
    for (std::size_t i = 0; i < v.value().size(); ++i) {
      const double orig = v.value()[i];
      v.value()[i] = orig + h;
      const double fp = scalarize(op(inputs));
      v.value()[i] = orig - h;
      const double fm = scalarize(op(inputs));
      v.value()[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-4});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace phit
