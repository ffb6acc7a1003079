#include "msstrn/tape.hpp"

#include <string>

#include "msstrn/errors.hpp"

namespace msstrn {

const DenseArray& Var::value() const { return tape_->value(id_); }
const Shape& Var::shape() const { return tape_->value(id_).shape(); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

DenseArray Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  return DenseArray(shape());
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

namespace {

void require_finite_leaf(const DenseArray& value, std::string_view kind, std::string_view name = {}) {
  if (!value.all_finite()) {
    std::string msg = "non-finite value in " + std::string(kind);
    if (!name.empty()) msg += " '" + std::string(name) + "'";
    throw NumericError(msg);
  }
}

}  // namespace

Var Tape::constant(DenseArray value) {
  require_finite_leaf(value, "constant");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(DenseArray value) {
  require_finite_leaf(value, "variable");
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(ParameterStore& store, std::string_view name) {
  Parameter& p = store.at(name);
  require_finite_leaf(p.value, "parameter", name);
  Node n;
  n.op = "parameter";
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.bound = p.trainable ? &p : nullptr;
  return push(std::move(n));
}

Var Tape::record(std::string_view op, DenseArray value, std::initializer_list<Var> parents,
                 Backward backward) {
  bool needs_grad = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ContractError(std::string(op) + ": operands from different tapes");
    needs_grad = needs_grad || p.requires_grad();
  }
  return record(op, std::move(value), needs_grad, std::move(backward));
}

Var Tape::record(std::string_view op, DenseArray value, bool needs_grad, Backward backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by '" + std::string(op) + "'");
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

DenseArray& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = DenseArray(n.value.shape());
  return n.grad;
}

std::size_t Tape::backward(Var root) {
  if (&root.tape() != this) throw ContractError("backward: root belongs to another tape");
  if (root.value().size() != 1) {
    throw ShapeError("backward needs a single-element root, got " + to_string(root.shape()));
  }
  for (auto& n : nodes_) n.grad = DenseArray();
  if (!nodes_[root.id()].requires_grad) return 0;
  grad(root.id())[0] = 1.0;

  std::size_t visited = 0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, i);
      ++visited;
    }
    if (n.bound != nullptr) {
      auto dst = n.bound->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  }
  return visited;
}

}  // namespace msstrn
