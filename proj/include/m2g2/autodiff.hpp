// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m2g2/tensor.hpp"

namespace m2g2 {

class ParamStore;
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid for the
/// lifetime of its tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { enabled, disabled };

/// Reverse-mode tape. Nodes are appended in execution order, so replaying
/// them back to front is a valid topological order.
///
/// With GradMode::disabled no backward closures are stored and parameters
/// are bound as constants; used for evaluation passes.
class Tape {
 public:
  /// Receives the node's forward value and its accumulated gradient.
  using BackwardFn =
      std::function<void(const Tensor& out_value, const Tensor& out_grad, Tape& tape)>;

  explicit Tape(GradMode mode = GradMode::enabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that requires a gradient but is not backed by a ParamStore.
  Var variable(Tensor value);
  /// Binds a stored parameter. Repeated calls within one tape return the same
  /// node, so gradients from every use accumulate into one slot.
  Var param(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  /// Gradient of the last backward() target w.r.t. `v` (zeros if unreached).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  bool grad_enabled() const noexcept { return mode_ == GradMode::enabled; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Back-propagates from a 1x1 node and adds the results into the gradient
  /// slots of every bound ParamStore parameter.
  void backward(Var loss);

  // Primitive authoring interface.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn fn);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  void accumulate(Var target, const Tensor& delta);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  struct ParamBinding {
    std::size_t node;
    ParamStore* store;
    std::size_t index;
  };

  Var push(Node node);

  GradMode mode_;
  std::deque<Node> nodes_;
  std::vector<ParamBinding> bindings_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::string, std::size_t>> bound_;
};

enum class Activation { identity, relu, sigmoid, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// Differentiable primitives. Shape violations throw ShapeError naming both
// operand shapes; non-finite results throw NonFiniteError.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (N x C) + bias (1 x C) broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, double s);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var identity(Var a);
Var activate(Var a, Activation act);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Repeats each column `times` times in place: [a b] -> [a a b b] for times=2.
Var repeat_cols(Var a, std::size_t times);
/// Block-diagonal application of a constant operator; see block_left_mul.
Var block_left_mul(const Tensor& op, Var x);
Var block_left_mul_t(const Tensor& op, Var x);
Var sum(Var a);
Var sum_squares(Var a);

}  // namespace m2g2
