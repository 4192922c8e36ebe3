#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "phit/tensor.hpp"

namespace phit {

/// One vertex of the reverse-mode tape.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents' grads.
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/**
 * Handle to a tape node. Copies share the node; use clone() for an
 * independent leaf with the same value.
 */
template <typename T>
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor<T> value, bool requires_grad) {
    Var v;
    v.node_ = std::make_shared<Node<T>>();
    v.node_->value = std::move(value);
    v.node_->requires_grad = requires_grad;
    return v;
  }
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }
  static Var parameter(Tensor<T> value) { return leaf(std::move(value), true); }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient accumulated so far; empty tensor when none reached this node.
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  Var clone() const { return leaf(node_->value, node_->requires_grad); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds a non-leaf node; requires_grad propagates from any parent.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward_fn) {
  Var<T> out = Var<T>::constant(std::move(value));
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    Node<T>* n = out.node();
    n->requires_grad = true;
    for (auto& p : parents) n->parents.push_back(p.ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return out;
}

/// Reverse sweep from `root`, seeding its gradient with `seed`.
template <typename T>
void backward(const Var<T>& root, const Tensor<T>& seed) {
  if (seed.shape() != root.shape()) throw ShapeError("backward: seed shape does not match root");
  if (!root.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Tensor<T>& g = root.node()->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
}

/// Reverse sweep from a single-value root.
template <typename T>
void backward(const Var<T>& root) {
  if (root.value().size() != 1) throw ShapeError("backward: root must hold a single value");
  backward(root, Tensor<T>(root.shape(), T{1}));
}

}  // namespace phit
