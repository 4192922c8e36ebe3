#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "phit/autograd.hpp"
#include "phit/tensor.hpp"

namespace phit {

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };

/// Zeros placed before the first sample for a `same` window of `extent`
/// taps. Odd remainders go to the left so an even-length kernel centres on
/// its second half.
inline std::size_t same_left_pad(std::size_t extent) { return (extent + 1) / 2; }

namespace detail {

template <typename T>
bool wants_grad(const Node<T>& n, std::size_t parent) {
  return parent < n.parents.size() && n.parents[parent]->requires_grad;
}

template <typename T>
Tensor<T>& parent_grad(Node<T>& n, std::size_t parent) {
  return n.parents[parent]->grad_buffer();
}

template <typename T>
const Tensor<T>& parent_value(Node<T>& n, std::size_t parent) {
  return n.parents[parent]->value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

/**
 * Cross-correlation of [B,Cin,L] with a [Cout,Cin,K] kernel, stride 1.
 *
 * out[b,o,t] = bias[o] + sum_{c,k} w[o,c,k] * x[b,c,t + k*dilation - left]
 * where left = same_left_pad((K-1)*dilation) for `same` and 0 for `valid`.
 */
template <typename T>
Var<T> conv1d(const Var<T>& input, const Var<T>& kernel, const std::optional<std::type_identity_t<Var<T>>>& bias = std::nullopt,
              Padding padding = Padding::Same, std::size_t dilation = 1) {
  const Shape& xs = input.shape();
  const Shape& ws = kernel.shape();
  require_rank(xs, 3, "conv1d input");
  require_rank(ws, 3, "conv1d kernel");
  if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
  const std::size_t B = xs[0], Cin = xs[1], L = xs[2];
  const std::size_t Cout = ws[0], K = ws[2];
  if (ws[1] != Cin) {
    throw ShapeError("conv1d: input has " + std::to_string(Cin) + " channels but kernel expects " +
                     std::to_string(ws[1]) + " (input " + shape_str(xs) + ", kernel " + shape_str(ws) + ")");
  }
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != Cout)) {
    throw ShapeError("conv1d: bias shape " + shape_str(bias->shape()) + " does not match Cout=" + std::to_string(Cout));
  }
  if (K == 0) throw ShapeError("conv1d: empty kernel");
  const std::size_t span = (K - 1) * dilation;
  std::size_t Lout = L;
  std::ptrdiff_t left = 0;
  if (padding == Padding::Same) {
    left = static_cast<std::ptrdiff_t>(same_left_pad(span));
  } else {
    if (span + 1 > L) throw ShapeError("conv1d: valid kernel span exceeds input length " + std::to_string(L));
    Lout = L - span;
  }

  // Valid output range [lo, hi) for tap k, where the input index t+off is in bounds.
  auto tap_range = [=](std::size_t k, std::ptrdiff_t& off, std::size_t& lo, std::size_t& hi) {
    off = static_cast<std::ptrdiff_t>(k * dilation) - left;
    const std::ptrdiff_t l = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t h = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Lout), static_cast<std::ptrdiff_t>(L) - off);
    lo = static_cast<std::size_t>(l);
    hi = static_cast<std::size_t>(std::max(l, h));
  };

  const Tensor<T>& x = input.value();
  const Tensor<T>& w = kernel.value();
  Tensor<T> out({B, Cout, Lout});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < Cout; ++o) {
      T* yr = out.row(b, o);
      if (bias) std::fill(yr, yr + Lout, bias->value()[o]);
      for (std::size_t c = 0; c < Cin; ++c) {
        const T* xr = x.row(b, c);
        const T* wr = w.row(o, c);
        for (std::size_t k = 0; k < K; ++k) {
          std::ptrdiff_t off;
          std::size_t lo, hi;
          tap_range(k, off, lo, hi);
          const T wk = wr[k];
          const T* xs_off = xr + off;
          for (std::size_t t = lo; t < hi; ++t) yr[t] += wk * xs_off[t];
        }
      }
    }
  }

  std::vector<Var<T>> parents{input, kernel};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias.has_value();
  return make_result<T>(std::move(out), parents, [=](Node<T>& n) {
    const Tensor<T>& gy = n.grad;
    const Tensor<T>& xv = detail::parent_value(n, 0);
    const Tensor<T>& wv = detail::parent_value(n, 1);
    const bool gx_on = detail::wants_grad(n, 0), gw_on = detail::wants_grad(n, 1);
    const bool gb_on = has_bias && detail::wants_grad(n, 2);
    Tensor<T>* gx = gx_on ? &detail::parent_grad(n, 0) : nullptr;
    Tensor<T>* gw = gw_on ? &detail::parent_grad(n, 1) : nullptr;
    Tensor<T>* gb = gb_on ? &detail::parent_grad(n, 2) : nullptr;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < Cout; ++o) {
        const T* gyr = gy.row(b, o);
        if (gb) {
          T s{0};
          for (std::size_t t = 0; t < Lout; ++t) s += gyr[t];
          (*gb)[o] += s;
        }
        for (std::size_t c = 0; c < Cin; ++c) {
          const T* xr = xv.row(b, c);
          const T* wr = wv.row(o, c);
          T* gxr = gx ? gx->row(b, c) : nullptr;
          T* gwr = gw ? gw->row(o, c) : nullptr;
          for (std::size_t k = 0; k < K; ++k) {
            std::ptrdiff_t off;
            std::size_t lo, hi;
            tap_range(k, off, lo, hi);
            if (gwr) {
              T s{0};
              const T* xs_off = xr + off;
              for (std::size_t t = lo; t < hi; ++t) s += gyr[t] * xs_off[t];
              gwr[k] += s;
            }
            if (gxr) {
              const T wk = wr[k];
              T* gxs_off = gxr + off;
              for (std::size_t t = lo; t < hi; ++t) gxs_off[t] += wk * gyr[t];
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

/// Per-channel affine normalization state. Running statistics follow
/// new = (1 - momentum) * old + momentum * batch.
template <typename T>
struct BatchNormState {
  Var<T> gamma;  // [C]
  Var<T> beta;   // [C]
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T epsilon = T(1e-5);
  Mode mode = Mode::Train;

  static BatchNormState make(std::size_t channels) {
    BatchNormState s;
    s.gamma = Var<T>::parameter(Tensor<T>({channels}, T{1}));
    s.beta = Var<T>::parameter(Tensor<T>({channels}, T{0}));
    s.running_mean.assign(channels, T{0});
    s.running_var.assign(channels, T{1});
    return s;
  }

  std::size_t channels() const { return running_mean.size(); }

  /// Independent copy (fresh leaves for gamma/beta).
  BatchNormState clone() const {
    BatchNormState s = *this;
    s.gamma = gamma.clone();
    s.beta = beta.clone();
    return s;
  }
};

/**
 * Batch normalization over (batch, time) for every channel.
 *
 * Train mode uses the biased batch statistics and folds them into the
 * running estimates; eval mode reads the running estimates only.
 */
template <typename T>
Var<T> batchnorm1d(const Var<T>& input, BatchNormState<T>& state) {
  const Shape& xs = input.shape();
  require_rank(xs, 3, "batchnorm1d input");
  const std::size_t B = xs[0], C = xs[1], L = xs[2];
  if (state.channels() != C || state.gamma.value().size() != C || state.beta.value().size() != C) {
    throw ShapeError("batchnorm1d: state has " + std::to_string(state.channels()) + " channels, input " +
                     shape_str(xs));
  }
  const std::size_t count = B * L;
  if (state.mode == Mode::Train && count == 0) throw ShapeError("batchnorm1d: empty batch in train mode");

  const Tensor<T>& x = input.value();
  const Tensor<T>& gamma = state.gamma.value();
  const Tensor<T>& beta = state.beta.value();
  std::vector<T> mean(C), inv_std(C);
  if (state.mode == Mode::Train) {
    for (std::size_t c = 0; c < C; ++c) {
      T s{0};
      for (std::size_t b = 0; b < B; ++b) {
        const T* r = x.row(b, c);
        for (std::size_t t = 0; t < L; ++t) s += r[t];
      }
      const T mu = s / static_cast<T>(count);
      T v{0};
      for (std::size_t b = 0; b < B; ++b) {
        const T* r = x.row(b, c);
        for (std::size_t t = 0; t < L; ++t) {
          const T d = r[t] - mu;
          v += d * d;
        }
      }
      v /= static_cast<T>(count);
      mean[c] = mu;
      inv_std[c] = T{1} / std::sqrt(v + state.epsilon);
      state.running_mean[c] = (T{1} - state.momentum) * state.running_mean[c] + state.momentum * mu;
      state.running_var[c] = (T{1} - state.momentum) * state.running_var[c] + state.momentum * v;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = T{1} / std::sqrt(state.running_var[c] + state.epsilon);
    }
  }

  Tensor<T> xhat(xs);
  Tensor<T> out(xs);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* r = x.row(b, c);
      T* h = xhat.row(b, c);
      T* y = out.row(b, c);
      const T mu = mean[c], is = inv_std[c], g = gamma[c], be = beta[c];
      for (std::size_t t = 0; t < L; ++t) {
        h[t] = (r[t] - mu) * is;
        y[t] = g * h[t] + be;
      }
    }
  }

  const bool train = state.mode == Mode::Train;
  return make_result<T>(std::move(out), {input, state.gamma, state.beta},
                        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& n) {
                          const Tensor<T>& gy = n.grad;
                          const Tensor<T>& g = detail::parent_value(n, 1);
                          std::vector<T> sum_gy(C, T{0}), sum_gy_xhat(C, T{0});
                          for (std::size_t b = 0; b < B; ++b) {
                            for (std::size_t c = 0; c < C; ++c) {
                              const T* gr = gy.row(b, c);
                              const T* h = xhat.row(b, c);
                              for (std::size_t t = 0; t < L; ++t) {
                                sum_gy[c] += gr[t];
                                sum_gy_xhat[c] += gr[t] * h[t];
                              }
                            }
                          }
                          if (detail::wants_grad(n, 1)) {
                            auto& gg = detail::parent_grad(n, 1);
                            for (std::size_t c = 0; c < C; ++c) gg[c] += sum_gy_xhat[c];
                          }
                          if (detail::wants_grad(n, 2)) {
                            auto& gb = detail::parent_grad(n, 2);
                            for (std::size_t c = 0; c < C; ++c) gb[c] += sum_gy[c];
                          }
                          if (!detail::wants_grad(n, 0)) return;
                          auto& gx = detail::parent_grad(n, 0);
                          const T inv_n = T{1} / static_cast<T>(count);
                          for (std::size_t b = 0; b < B; ++b) {
                            for (std::size_t c = 0; c < C; ++c) {
                              const T* gr = gy.row(b, c);
                              const T* h = xhat.row(b, c);
                              T* gxr = gx.row(b, c);
                              const T scale = g[c] * inv_std[c];
                              if (train) {
                                const T m1 = sum_gy[c] * inv_n, m2 = sum_gy_xhat[c] * inv_n;
                                for (std::size_t t = 0; t < L; ++t) gxr[t] += scale * (gr[t] - m1 - h[t] * m2);
                              } else {
                                for (std::size_t t = 0; t < L; ++t) gxr[t] += scale * gr[t];
                              }
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// row gather / scatter (used by the batch-norm multiplexer)
// ---------------------------------------------------------------------------

/// Selects batch rows of a [B,C,L] tensor, in the given order.
template <typename T>
Var<T> gather_rows(const Var<T>& input, std::span<const std::size_t> rows) {
  const Shape& xs = input.shape();
  require_rank(xs, 3, "gather_rows input");
  const std::size_t stride = xs[1] * xs[2];
  Tensor<T> out({rows.size(), xs[1], xs[2]});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xs[0]) throw ShapeError("gather_rows: row out of range");
    std::copy_n(input.value().data() + rows[i] * stride, stride, out.data() + i * stride);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result<T>(std::move(out), {input}, [idx, stride](Node<T>& n) {
    auto& gx = detail::parent_grad(n, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const T* src = n.grad.data() + i * stride;
      T* dst = gx.data() + idx[i] * stride;
      for (std::size_t j = 0; j < stride; ++j) dst[j] += src[j];
    }
  });
}

/// Inverse of a set of gather_rows calls: part p row i lands at rows[p][i].
template <typename T>
Var<T> scatter_rows(const std::vector<Var<T>>& parts, const std::vector<std::vector<std::size_t>>& rows,
                    std::size_t batch) {
  if (parts.empty() || parts.size() != rows.size()) throw ShapeError("scatter_rows: parts/rows mismatch");
  const Shape& s0 = parts[0].shape();
  require_rank(s0, 3, "scatter_rows part");
  const std::size_t stride = s0[1] * s0[2];
  Tensor<T> out({batch, s0[1], s0[2]});
  std::size_t filled = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != 3 || s[1] != s0[1] || s[2] != s0[2] || s[0] != rows[p].size()) {
      throw ShapeError("scatter_rows: part " + std::to_string(p) + " has shape " + shape_str(s));
    }
    for (std::size_t i = 0; i < rows[p].size(); ++i) {
      if (rows[p][i] >= batch) throw ShapeError("scatter_rows: row out of range");
      std::copy_n(parts[p].value().data() + i * stride, stride, out.data() + rows[p][i] * stride);
    }
    filled += rows[p].size();
  }
  if (filled != batch) throw ShapeError("scatter_rows: rows do not cover the batch");
  return make_result<T>(std::move(out), parts, [rows, stride](Node<T>& n) {
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (!detail::wants_grad(n, p)) continue;
      auto& gp = detail::parent_grad(n, p);
      for (std::size_t i = 0; i < rows[p].size(); ++i) {
        const T* src = n.grad.data() + rows[p][i] * stride;
        T* dst = gp.data() + i * stride;
        for (std::size_t j = 0; j < stride; ++j) dst[j] += src[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

/// Stride-1 sliding max with zero padding, length preserving. The gradient
/// goes to the first maximal tap of each window; taps that land on padding
/// receive nothing.
template <typename T>
Var<T> maxpool1d_same(const Var<T>& input, std::size_t window) {
  if (window < 1) throw std::invalid_argument("maxpool1d_same: window must be >= 1");
  const Shape& xs = input.shape();
  require_rank(xs, 3, "maxpool1d_same input");
  const std::size_t B = xs[0], C = xs[1], L = xs[2];
  const auto left = static_cast<std::ptrdiff_t>(same_left_pad(window - 1));
  Tensor<T> out(xs);
  // -1 marks a padded argmax
  std::vector<std::ptrdiff_t> argmax(out.size(), -1);
  const Tensor<T>& x = input.value();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* r = x.row(b, c);
      T* y = out.row(b, c);
      std::ptrdiff_t* am = argmax.data() + (b * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) {
        T best = std::numeric_limits<T>::lowest();
        std::ptrdiff_t arg = -1;
        for (std::size_t k = 0; k < window; ++k) {
          const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t + k) - left;
          const bool inside = i >= 0 && i < static_cast<std::ptrdiff_t>(L);
          const T v = inside ? r[i] : T{0};
          if (v > best) {
            best = v;
            arg = inside ? i : -1;
          }
        }
        y[t] = best;
        am[t] = arg;
      }
    }
  }
  return make_result<T>(std::move(out), {input}, [argmax = std::move(argmax), B, C, L](Node<T>& n) {
    auto& gx = detail::parent_grad(n, 0);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      for (std::size_t t = 0; t < L; ++t) {
        const std::ptrdiff_t a = argmax[bc * L + t];
        if (a >= 0) gx.data()[bc * L + static_cast<std::size_t>(a)] += n.grad.data()[bc * L + t];
      }
    }
  });
}

/// Global average pooling over time: [B,C,L] -> [B,C].
template <typename T>
Var<T> gap(const Var<T>& input) {
  const Shape& xs = input.shape();
  require_rank(xs, 3, "gap input");
  const std::size_t B = xs[0], C = xs[1], L = xs[2];
  if (L == 0) throw ShapeError("gap: empty time axis");
  Tensor<T> out({B, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* r = input.value().row(b, c);
      T s{0};
      for (std::size_t t = 0; t < L; ++t) s += r[t];
      out.at(b, c) = s / static_cast<T>(L);
    }
  }
  return make_result<T>(std::move(out), {input}, [B, C, L](Node<T>& n) {
    auto& gx = detail::parent_grad(n, 0);
    const T inv = T{1} / static_cast<T>(L);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const T g = n.grad.at(b, c) * inv;
        T* r = gx.row(b, c);
        for (std::size_t t = 0; t < L; ++t) r[t] += g;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// dense / elementwise / structural
// ---------------------------------------------------------------------------

/// y = x W^T + b with x [B,C], W [U,C], b [U].
template <typename T>
Var<T> dense(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require_rank(xs, 2, "dense input");
  require_rank(ws, 2, "dense weight");
  const std::size_t B = xs[0], C = xs[1], U = ws[0];
  if (ws[1] != C) throw ShapeError("dense: input " + shape_str(xs) + " vs weight " + shape_str(ws));
  if (bias.shape() != Shape{U}) throw ShapeError("dense: bias " + shape_str(bias.shape()) + " vs U=" + std::to_string(U));
  Tensor<T> out({B, U});
  const auto& x = input.value();
  const auto& w = weight.value();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t u = 0; u < U; ++u) {
      T s = bias.value()[u];
      for (std::size_t c = 0; c < C; ++c) s += x.at(b, c) * w.at(u, c);
      out.at(b, u) = s;
    }
  }
  return make_result<T>(std::move(out), {input, weight, bias}, [B, C, U](Node<T>& n) {
    const auto& gy = n.grad;
    const auto& x = detail::parent_value(n, 0);
    const auto& w = detail::parent_value(n, 1);
    if (detail::wants_grad(n, 0)) {
      auto& gx = detail::parent_grad(n, 0);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t u = 0; u < U; ++u)
          for (std::size_t c = 0; c < C; ++c) gx.at(b, c) += gy.at(b, u) * w.at(u, c);
    }
    if (detail::wants_grad(n, 1)) {
      auto& gw = detail::parent_grad(n, 1);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t u = 0; u < U; ++u)
          for (std::size_t c = 0; c < C; ++c) gw.at(u, c) += gy.at(b, u) * x.at(b, c);
    }
    if (detail::wants_grad(n, 2)) {
      auto& gb = detail::parent_grad(n, 2);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t u = 0; u < U; ++u) gb[u] += gy.at(b, u);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& input) {
  Tensor<T> out = input.value();
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return make_result<T>(std::move(out), {input}, [](Node<T>& n) {
    auto& gx = detail::parent_grad(n, 0);
    const auto& x = detail::parent_value(n, 0);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > T{0}) gx[i] += n.grad[i];
  });
}

/// Stacks [B,Ci,L] tensors along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& s0 = inputs[0].shape();
  require_rank(s0, 3, "concat_channels input");
  const std::size_t B = s0[0], L = s0[2];
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& v : inputs) {
    const Shape& s = v.shape();
    if (s.size() != 3 || s[0] != B || s[2] != L) {
      throw ShapeError("concat_channels: " + shape_str(s) + " does not conform to " + shape_str(s0));
    }
    offsets.push_back(total);
    total += s[1];
  }
  Tensor<T> out({B, total, L});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& v = inputs[i].value();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < v.dim(1); ++c) std::copy_n(v.row(b, c), L, out.row(b, offsets[i] + c));
  }
  return make_result<T>(std::move(out), inputs, [offsets, B, L](Node<T>& n) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (!detail::wants_grad(n, i)) continue;
      auto& g = detail::parent_grad(n, i);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < g.dim(1); ++c) {
          const T* src = n.grad.row(b, offsets[i] + c);
          T* dst = g.row(b, c);
          for (std::size_t t = 0; t < L; ++t) dst[t] += src[t];
        }
    }
  });
}

template <typename T>
Var<T> residual_add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual_add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!detail::wants_grad(n, p)) continue;
      auto& g = detail::parent_grad(n, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

/// Row-wise softmax with max subtraction (not differentiable).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    T mx = std::numeric_limits<T>::lowest();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, logits.at(b, k));
    T z{0};
    for (std::size_t k = 0; k < K; ++k) z += (p.at(b, k) = std::exp(logits.at(b, k) - mx));
    for (std::size_t k = 0; k < K; ++k) p.at(b, k) /= z;
  }
  return p;
}

/// Mean over the batch of -log softmax(logits)[label]; returns shape [1].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  require_rank(s, 2, "softmax_cross_entropy logits");
  const std::size_t B = s[0], K = s[1];
  if (labels.size() != B) throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " + std::to_string(B));
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
    }
  }
  const auto& z = logits.value();
  T loss{0};
  for (std::size_t b = 0; b < B; ++b) {
    T mx = std::numeric_limits<T>::lowest();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, z.at(b, k));
    T se{0};
    for (std::size_t k = 0; k < K; ++k) se += std::exp(z.at(b, k) - mx);
    loss += std::log(se) + mx - z.at(b, static_cast<std::size_t>(labels[b]));
  }
  loss /= static_cast<T>(B);
  std::vector<int> y(labels.begin(), labels.end());
  return make_result<T>(Tensor<T>({1}, loss), {logits}, [y, B, K](Node<T>& n) {
    const Tensor<T> p = softmax(detail::parent_value(n, 0));
    auto& g = detail::parent_grad(n, 0);
    const T scale = n.grad[0] / static_cast<T>(B);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < K; ++k)
        g.at(b, k) += scale * (p.at(b, k) - (static_cast<int>(k) == y[b] ? T{1} : T{0}));
  });
}

}  // namespace phit
