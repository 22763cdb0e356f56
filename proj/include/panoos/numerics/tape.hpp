#pragma once

#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "panoos/numerics/parameter.hpp"
#include "panoos/numerics/tensor.hpp"

namespace panoos {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Linear record of primitive ops for reverse-mode differentiation.
///
/// Ops are appended in evaluation order, so every input id precedes the id of
/// the op that reads it. `backward` walks the record in reverse and
/// accumulates gradients additively; nodes that no path from the root
/// reaches keep an all-zero gradient.
class Tape {
 public:
  /// Receives the tape and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable input that is not a Parameter; read its gradient with grad().
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter. Repeated calls return the same node. Only
  /// trainable parameters receive gradients.
  Var param(Parameter& p);

  /// Appends an op. `backward` is skipped when no input requires a gradient.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_buffer(int id);
  /// Gradient of `v` from the last backward(); zeros if `v` was unreached.
  Tensor grad(Var v) const;

  /// Reverse sweep from a scalar root. Parameter gradients are added to
  /// Parameter::grad, so two calls without zeroing double them.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  // deque: value references handed out by Var stay valid as the tape grows.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace panoos
