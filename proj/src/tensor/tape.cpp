#include "r2d/tensor/tape.hpp"

#include "r2d/errors.hpp"

namespace r2d::tensor {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("value() on an unbound Var");
  return tape_->value(*this);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[v.index_];
}

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[v.index_];
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant contains non-finite values");
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  Node n;
  n.external = &value;
  n.requires_grad = recording();
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  if (used_) throw ReuseError(std::string(op) + ": tape already differentiated");
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced non-finite values");
  }
  Node n;
  n.owned = std::move(value);
  if (recording()) {
    for (Var in : inputs) {
      if (node(in).requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external != nullptr ? *n.external : n.owned;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor& Tape::grad(Var v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor(value(v).shape());
    n.has_grad = true;
  }
  return n.grad;
}

Gradients Tape::backward(Var loss) {
  if (!recording()) throw ContractError("backward() on an inference-mode tape");
  if (used_) throw ReuseError("backward() already ran on this tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(lv.shape()));
  }
  used_ = true;
  backward_visits_ = 0;
  if (node(loss).requires_grad) {
    grad(loss)[0] = 1.0;
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
      ++backward_visits_;
    }
  }
  Gradients out;
  for (const auto& [name, index] : params_) {
    const Node& n = nodes_[index];
    out.emplace(name, n.has_grad ? n.grad : Tensor(n.external->shape()));
  }
  return out;
}

}  // namespace r2d::tensor
