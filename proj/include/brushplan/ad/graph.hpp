#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brushplan/ad/tensor.hpp"

namespace brushplan::ad {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// owning Graph is alive.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// View handed to an op's backward rule while the graph is being replayed.
class BackwardContext {
 public:
  std::span<const double> grad_out() const { return grad_out_; }
  const Tensor& output() const;
  const Tensor& input(std::size_t k) const;
  bool needs_grad(std::size_t k) const;
  /// Accumulator for input k, zero-initialized on first access.
  std::span<double> input_grad(std::size_t k);

 private:
  friend class Graph;
  BackwardContext(Graph& graph, std::size_t node, std::span<const double> grad_out)
      : graph_(graph), node_(node), grad_out_(grad_out) {}

  Graph& graph_;
  std::size_t node_;
  std::span<const double> grad_out_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Tape of recorded forward operations. Node ids are assigned in recording
/// order, which is also a valid topological order, so backward replays the
/// tape in reverse. Single-threaded; one backward pass per recording.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable input; receives a gradient in backward().
  Var leaf(Tensor value);
  /// Fixed input; never receives a gradient.
  Var constant(Tensor value);
  /// Appends an op result. `backward` is dropped when no input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, std::string_view op);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::string_view op_name(Var v) const { return nodes_.at(v.id()).op; }

  /// Gradient of the last backward() loss with respect to `v`; zeros when
  /// `v` was not reached.
  Tensor grad(Var v) const;

  void backward(Var loss);
  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class BackwardContext;

  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string op;
    bool requires_grad = false;
    std::vector<double> grad;
  };

  std::span<double> grad_buffer(std::size_t id);

  std::deque<Node> nodes_;  // stable references while recording
  bool backward_done_ = false;
};

}  // namespace brushplan::ad
