#include "brushplan/ad/graph.hpp"

#include <stdexcept>

namespace brushplan::ad {

const Tensor& Var::value() const {
  if (!graph_) throw std::logic_error("Var: empty handle");
  return graph_->value(*this);
}

const Tensor& BackwardContext::output() const { return graph_.nodes_[node_].value; }

const Tensor& BackwardContext::input(std::size_t k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(k)].value;
}

bool BackwardContext::needs_grad(std::size_t k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(k)].requires_grad;
}

std::span<double> BackwardContext::input_grad(std::size_t k) {
  const auto id = graph_.nodes_[node_].inputs.at(k);
  if (!graph_.nodes_[id].requires_grad) return {};
  return graph_.grad_buffer(id);
}

Var Graph::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, "leaf", true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, "constant", false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward,
                  std::string_view op) {
  if (backward_done_) {
    throw std::logic_error("Graph: cannot record '" + std::string(op) + "' after backward");
  }
  Node node{std::move(value), {}, {}, std::string(op), false, {}};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.graph() != this) {
      throw std::invalid_argument("Graph: input of '" + std::string(op) +
                                  "' belongs to another graph");
    }
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

Tensor Graph::grad(Var v) const {
  const auto& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor(node.value.shape());
  return Tensor(node.value.shape(), node.grad);
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::invalid_argument("backward: loss from another graph");
  if (backward_done_) {
    throw std::logic_error("backward: graph already differentiated; record it again");
  }
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_string(value(loss).shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    BackwardContext ctx(*this, id, node.grad);
    node.backward(ctx);
  }
}

}  // namespace brushplan::ad
