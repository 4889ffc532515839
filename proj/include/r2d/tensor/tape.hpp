#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>

#include "r2d/tensor/tensor.hpp"

namespace r2d::tensor {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Append-only record of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so operands always precede their
/// consumers. A tape supports exactly one backward pass. In inference mode
/// only values are kept; no gradient rules are stored and backward() is an
/// error.
class Tape {
 public:
  enum class Mode { Record, Inference };

  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(Mode mode = Mode::Record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf referencing externally owned storage that must outlive the tape.
  /// Registering the same name twice returns the original node.
  Var parameter(const std::string& name, const Tensor& value);

  /// Appends the result of a primitive. `op` names it in error messages.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient buffer of v, zero-initialised on first access.
  Tensor& grad(Var v);

  bool recording() const { return mode_ == Mode::Record; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t backward_visits() const { return backward_visits_; }

  /// Gradients of a scalar loss with respect to every registered parameter.
  /// Parameters the loss does not reach get zero tensors.
  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  Mode mode_;
  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool used_ = false;
  std::size_t backward_visits_ = 0;
};

}  // namespace r2d::tensor
