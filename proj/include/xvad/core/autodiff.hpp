#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xvad/core/tensor.hpp"

namespace xvad {

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph construction for its scope (inference / value-only math).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Reverse-mode autodiff handle: a tensor plus its position in a define-by-run
/// graph. Handles share nodes; graphs are single-shot (build, backward once,
/// drop). Backward closures capture parent handles, never their own node, so
/// graph teardown is plain reference counting.
template <typename T>
class Var {
 public:
  Var() = default;

  explicit Var(Tensor<T> value, bool requires_grad = false)
      : n_(std::make_shared<Node>()) {
    n_->value = std::move(value);
    n_->requires_grad = requires_grad;
  }

  static Var leaf(Tensor<T> value, bool requires_grad) { return Var(std::move(value), requires_grad); }

  bool defined() const { return n_ != nullptr; }
  const Tensor<T>& value() const { return n_->value; }
  Tensor<T>& mutable_value() { return n_->value; }
  const Shape& shape() const { return n_->value.shape(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }

  /// Accumulated gradient; undefined tensor until backward touches this node.
  const Tensor<T>& grad() const { return n_->grad; }
  bool has_grad() const { return n_->grad.defined(); }

  // Var is a shared handle: gradient bookkeeping mutates the node, not the
  // handle, so it is available through const copies captured in closures.
  void zero_grad() const {
    if (n_->grad.defined())
      n_->grad.fill(T(0));
  }

  void accum_grad(const Tensor<T>& g) const {
    require(g.shape() == n_->value.shape(), "grad shape ", g.shape().str(), " vs value ",
            n_->value.shape().str());
    if (!n_->grad.defined())
      n_->grad = Tensor<T>::zeros(n_->value.shape());
    n_->grad.add_(g);
  }

  /// Same value, severed from the graph.
  Var detach() const { return Var(n_->value, false); }

  /// Runs reverse accumulation from this (scalar) node.
  void backward() const {
    require(n_->value.numel() == 1, "backward() root must be scalar, got ", shape().str());
    if (!n_->requires_grad) return;
    // Topological order over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{n_.get(), 0}};
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* p = node->parents[next++].n_.get();
        if (p && p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->grad = Tensor<T>::ones(n_->value.shape());
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backward && node->grad.defined()) node->backward(node->grad);
    }
  }

  /// Graph-construction hook used by op implementations: wraps `value` in a
  /// node depending on `parents` when autodiff is enabled and some parent
  /// requires gradients; otherwise returns a constant node.
  static Var make_op(Tensor<T> value, std::vector<Var> parents,
                     std::function<void(const Tensor<T>&)> backward) {
    Var out(std::move(value), false);
    if (!grad_enabled()) return out;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (!needs) return out;
    out.n_->requires_grad = true;
    out.n_->parents = std::move(parents);
    out.n_->backward = std::move(backward);
    return out;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(const Tensor<T>&)> backward;
  };

  std::shared_ptr<Node> n_;
};

}  // namespace xvad
