// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "segloc/tensor.hpp"

namespace segloc::ag {

/// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Tracks how many activation scalars are alive across the graphs attached
/// to it. Only values owned by graph nodes count; parameters, inputs and
/// gradient buffers do not.
class ActivationMeter {
 public:
  void add(std::size_t n) {
    live_ += n;
    if (live_ > peak_) peak_ = live_;
  }
  void release(std::size_t n) { live_ -= n; }
  std::size_t live() const { return live_; }
  std::size_t peak() const { return peak_; }
  void reset_peak() { peak_ = live_; }

 private:
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
};

/// Reverse-mode tape. Nodes are appended in topological order, so the
/// backward sweep is a reverse scan. Parameter leaves point at external
/// storage and flush their gradient into a caller-owned sink at the end of
/// backward(); a leaf without a sink is frozen and stops gradient flow.
template <class T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, Var self)>;

  explicit Graph(ActivationMeter* meter = nullptr) : meter_(meter) {}
  ~Graph() {
    if (meter_ != nullptr) meter_->release(metered_);
  }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value) { return push(std::move(value), nullptr, nullptr, false, {}); }

  /// Borrowed input; `value` must outlive the graph.
  Var input(const Tensor<T>& value) { return push({}, &value, nullptr, false, {}); }

  Var param(const Tensor<T>& value, Tensor<T>* grad_sink) {
    return push({}, &value, grad_sink, grad_sink != nullptr, {});
  }

  /// Appends an op node. It requires grad iff any of `inputs` does; when
  /// none do the backward closure is dropped.
  Var op(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
    bool req = false;
    for (Var v : inputs) req = req || requires_grad(v);
    return push(std::move(value), nullptr, nullptr, req, req ? std::move(backward) : Backward{});
  }
  Var op(Tensor<T> value, const std::vector<Var>& inputs, Backward backward) {
    bool req = false;
    for (Var v : inputs) req = req || requires_grad(v);
    return push(std::move(value), nullptr, nullptr, req, req ? std::move(backward) : Backward{});
  }

  const Tensor<T>& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return v.valid() && nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  /// Gradient buffer of `v`, zero-allocated on first touch.
  Tensor<T>& grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.empty() && !value(v).empty()) n.grad = Tensor<T>(value(v).shape());
    return n.grad;
  }
  bool has_grad(Var v) const { return !nodes_[static_cast<std::size_t>(v.id)].grad.empty(); }

  void backward(Var root) {
    Tensor<T> seed(value(root).shape(), T(1));
    backward(root, seed);
  }

  void backward(Var root, const Tensor<T>& seed) {
    if (!requires_grad(root)) return;
    Tensor<T>& g0 = grad(root);
    if (seed.size() != g0.size()) throw InvalidInput("backward seed shape mismatch");
    for (std::size_t i = 0; i < seed.size(); ++i) g0[i] += seed[i];
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, Var{id});
      if (n.sink != nullptr) {
        Tensor<T>& s = *n.sink;
        if (s.size() != n.grad.size()) throw InvalidInput("gradient sink shape mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += n.grad[i];
      }
      n.grad = Tensor<T>();
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  ActivationMeter* meter() const { return meter_; }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T>* sink = nullptr;
    bool requires_grad = false;
    Backward backward;
    Tensor<T> grad;
  };

  Var push(Tensor<T> value, const Tensor<T>* external, Tensor<T>* sink, bool req, Backward bw) {
    if (meter_ != nullptr && external == nullptr) {
      meter_->add(value.size());
      metered_ += value.size();
    }
    nodes_.push_back(Node{std::move(value), external, sink, req, std::move(bw), {}});
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  ActivationMeter* meter_ = nullptr;
  std::size_t metered_ = 0;
};

}  // namespace segloc::ag
