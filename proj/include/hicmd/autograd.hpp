#pragma once
// Tape-based reverse-mode differentiation. A Graph records every node in
// creation order, so a reverse sweep over the tape is a valid topological
// order for backpropagation.

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hicmd/tensor.hpp"

namespace hicmd {

template <class T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

// Named parameter arrays. Iteration is in name order, which keeps
// serialization and optimizer updates deterministic.
template <class T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> init) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw Error("duplicate parameter name: " + name);
    it->second.value = std::move(init);
    it->second.zero_grad();
    return it->second;
  }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>());
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

template <class T>
class Graph;

template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor<T>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
};

template <class T>
class Graph {
 public:
  // Receives the node's output gradient; accumulates into parents via grad().
  using Backward = std::function<void(Graph&, const Tensor<T>&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr, nullptr); }

  // Binds a parameter as a leaf. Repeated binds of the same parameter return
  // the same node so its gradient accumulates across every use. Frozen
  // parameters behave as constants.
  Var<T> param(Parameter<T>& p, bool trainable = true) {
    auto& cache = bound_[trainable ? 1 : 0];
    if (auto it = cache.find(&p); it != cache.end()) return {this, it->second};
    Var<T> v = push(p.value, trainable, nullptr, trainable ? &p : nullptr);
    cache.emplace(&p, v.id);
    return v;
  }

  // Records an op output. The backward closure is dropped when no parent
  // requires a gradient.
  Var<T> emit(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || (p.valid() && nodes_[p.id].needs_grad);
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
  }
  Var<T> emit(Tensor<T> value, const std::vector<Var<T>>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || (p.valid() && nodes_[p.id].needs_grad);
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
  }

  // Id the next recorded node will receive.
  int next_id() const { return static_cast<int>(nodes_.size()); }

  const Tensor<T>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool needs_grad(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(Var<T> v) const { return v.valid() && needs_grad(v.id); }

  // Gradient buffer of a node, zero-allocated on first use.
  Tensor<T>& grad(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  const Tensor<T>* grad_if_any(int id) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    return n.grad.empty() ? nullptr : &n.grad;
  }

  // Backpropagates d(root)/d(node) for a scalar root and adds the result to
  // every bound trainable parameter's grad.
  void backward(Var<T> root) {
    if (root.graph != this) throw Error("backward on a variable from another graph");
    if (value(root.id).size() != 1) throw Error("backward root must be a scalar, got " + shape_str(value(root.id).shape()));
    if (!nodes_[root.id].needs_grad) return;
    grad(root.id)[0] += T(1);
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink) {
        if (n.sink->grad.size() != n.value.size()) n.sink->zero_grad();
        auto* dst = n.sink->grad.data();
        const auto* src = n.grad.data();
        for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
      }
    }
  }

  // Clears node gradients so backward can run again from another root.
  void clear_grads() {
    for (auto& n : nodes_) n.grad = Tensor<T>();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Backward backward;
    Parameter<T>* sink = nullptr;
  };

  Var<T> push(Tensor<T> value, bool needs, Backward backward, Parameter<T>* sink) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), needs, std::move(backward), sink});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> bound_[2];
};

}  // namespace hicmd
