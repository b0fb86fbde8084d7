#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bharnet/tensor.hpp"

namespace bharnet::nn {

namespace detail {

/// One value in the computation graph. Non-leaf nodes keep their inputs
/// alive and know how to push their gradient into them.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a node of the reverse-mode tape. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimisers; never call while a graph built on this node is live.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Accumulated gradient (zeros when nothing reached this node).
  Tensor grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Var make_result(Tensor, std::vector<Var>, std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

/// Builds an op output. When no input requires a gradient the result is a
/// constant and the closure is dropped.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);

/// Reverse sweep from a single-element loss. Gradients accumulate into
/// every reachable node that requires them. Throws ContractError for a
/// non-scalar loss.
void backward(const Var& loss);

}  // namespace bharnet::nn
