// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Dense row-major tensor of doubles with a reverse-mode differentiation tape.
//
// A Tensor is a shared handle to a graph node. Forward operations create new
// nodes that remember their inputs and a local backward rule; backward()
// orders the reachable nodes topologically and runs the rules in reverse.
// Only leaves (tensors built directly from data) may be mutated in place,
// which is how optimizers update parameters.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace eanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  /// Copies `data`; throws ShapeError when product(shape) != data.size().
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  double at(std::size_t flat_index) const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;

  /// In-place access for leaves (parameters). Throws ContractError otherwise.
  std::span<double> mutable_data();

  bool has_grad() const;
  /// Gradient of the last backward() pass; empty span when none.
  std::span<const double> grad() const;
  void zero_grad();

  /// Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

using BackwardFn = std::function<void(detail::Node&)>;

/// Builds an operation result. History is only recorded when at least one
/// input requires a gradient; otherwise `fn` is dropped.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, BackwardFn fn);
Tensor make_result(Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& inputs, BackwardFn fn);

/// Topologically ordered record of the graph reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  /// Inputs of every node precede it.
  const std::vector<detail::Node*>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<detail::Node*> nodes_;
};

/// Zeroes every gradient on the tape of `loss`, seeds d(loss)/d(loss) = 1
/// and propagates. `loss` must hold exactly one element.
void backward(const Tensor& loss);

}  // namespace eanet
