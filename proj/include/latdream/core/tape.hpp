#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latdream/core/mat.hpp"

namespace latdream {

// A named tensor with an accumulated gradient. Modules own their parameters;
// optimizers and checkpoints see them through ParamSet.
template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool trainable = true;  // false for running statistics and similar buffers

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat<S>::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad = Mat<S>::Zero(value.rows(), value.cols()); }
};

template <class S>
class ParamSet {
 public:
  void add(Param<S>* p) { items_.push_back(p); }
  void add(ParamSet<S> other) {
    for (auto* p : other.items_) items_.push_back(p);
  }
  const std::vector<Param<S>*>& items() const { return items_; }
  size_t size() const { return items_.size(); }
  Param<S>* operator[](size_t i) const { return items_[i]; }

  void zero_grads() const {
    for (auto* p : items_) p->zero_grad();
  }
  std::vector<Param<S>*> trainable() const {
    std::vector<Param<S>*> out;
    for (auto* p : items_)
      if (p->trainable) out.push_back(p);
    return out;
  }
  Param<S>* find(const std::string& name) const {
    for (auto* p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

 private:
  std::vector<Param<S>*> items_;
};

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Ops append nodes holding the forward value plus a
// closure that scatters the node's gradient into its parents. backward()
// walks the tape in reverse creation order, which is a valid topological
// order by construction.
template <class S>
class Tape {
 public:
  Tape() = default;
  explicit Tape(bool grad_enabled) : grad_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_; }
  int size() const { return int(nodes_.size()); }

  // Constant leaf; gradients never flow into it.
  Var input(Mat<S> v) { return push(std::move(v), false, nullptr, nullptr); }

  // Constant leaf cached per tape by key, for repeated frozen-parameter use.
  Var input_cached(const void* key, const Mat<S>& v) {
    auto it = frozen_cache_.find(key);
    if (it != frozen_cache_.end()) return Var{it->second};
    Var out = push(v, false, nullptr, nullptr);
    frozen_cache_[key] = out.id;
    return out;
  }

  // Gradient-tracked leaf whose grad is readable after backward().
  Var leaf(Mat<S> v) { return push(std::move(v), grad_, nullptr, nullptr); }

  // Leaf bound to an external parameter; backward() accumulates into p.grad.
  // Cached so that repeated use within one tape shares a single node.
  Var param(Param<S>& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return Var{it->second};
    Var out = push(p.value, grad_, nullptr, grad_ ? &p : nullptr);
    param_cache_[&p] = out.id;
    return out;
  }

  const Mat<S>& val(Var v) const { return nodes_[check(v)].v; }

  bool needs_grad(Var v) const { return nodes_[check(v)].needs; }

  // Gradient buffer of a node, allocated (zeroed) on first access.
  Mat<S>& grad_ref(Var v) {
    Node& n = nodes_[check(v)];
    if (n.g.size() == 0) n.g = Mat<S>::Zero(n.v.rows(), n.v.cols());
    return n.g;
  }

  // True if a gradient ever reached this node during backward().
  bool grad_touched(Var v) const { return nodes_[check(v)].g.size() != 0; }

  using BackFn = std::function<void(Tape<S>&, const Mat<S>&)>;

  // Generic op node. `back` receives this node's gradient and must accumulate
  // into grad_ref(parent) for every parent with needs_grad().
  Var make(Mat<S> value, std::initializer_list<Var> parents, BackFn back) {
    bool needs = false;
    if (grad_) {
      for (Var p : parents) needs = needs || nodes_[check(p)].needs;
    }
    return push(std::move(value), needs, needs ? std::move(back) : nullptr,
                nullptr);
  }

  Var make(Mat<S> value, const std::vector<Var>& parents, BackFn back) {
    bool needs = false;
    if (grad_) {
      for (Var p : parents) needs = needs || nodes_[check(p)].needs;
    }
    return push(std::move(value), needs, needs ? std::move(back) : nullptr,
                nullptr);
  }

  // Value copy with the gradient path severed.
  Var detach(Var a) { return input(val(a)); }

  void backward(Var loss) {
    Node& ln = nodes_[check(loss)];
    if (ln.v.rows() != 1 || ln.v.cols() != 1)
      throw std::invalid_argument("Tape::backward: loss must be 1x1");
    grad_ref(loss)(0, 0) += S(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs || n.g.size() == 0) continue;
      if (n.back) n.back(*this, n.g);
      if (n.bound) {
        n.bound->ensure_grad();
        n.bound->grad += n.g;
      }
    }
  }

  // Drop all node gradients (keeps values); call between two backward passes
  // over the same tape so contributions do not mix.
  void clear_grads() {
    for (Node& n : nodes_) n.g.resize(0, 0);
  }

 private:
  struct Node {
    Mat<S> v;
    Mat<S> g;
    BackFn back;
    Param<S>* bound = nullptr;
    bool needs = false;
  };

  int32_t check(Var v) const {
    if (v.id < 0 || v.id >= int32_t(nodes_.size()))
      throw std::out_of_range("Tape: invalid Var");
    return v.id;
  }

  Var push(Mat<S> v, bool needs, BackFn back, Param<S>* bound) {
    Node n;
    n.v = std::move(v);
    n.back = std::move(back);
    n.bound = bound;
    n.needs = needs || bound != nullptr;
    nodes_.push_back(std::move(n));
    return Var{int32_t(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int32_t> param_cache_;
  std::unordered_map<const void*, int32_t> frozen_cache_;
  bool grad_ = true;
};

}  // namespace latdream
