#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>

#include "msstrn/dense_array.hpp"
#include "msstrn/parameter_store.hpp"

namespace msstrn {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const DenseArray& value() const;
  const Shape& shape() const;
  // Gradient after Tape::backward; a zero array when nothing reached this node.
  DenseArray grad() const;
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of primitive operations for reverse-mode differentiation.
// A tape belongs to one thread for the duration of a forward/backward pass.
class Tape {
 public:
  // Propagates gradient from node `self` into its parents.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseArray value);
  Var variable(DenseArray value);
  // Leaf bound to a store entry. backward() accumulates into Parameter::grad.
  // Frozen (non-trainable) entries are recorded as constants.
  Var parameter(ParameterStore& store, std::string_view name);

  // Appends a node. The value must be finite; `backward` is dropped when no
  // parent requires a gradient.
  Var record(std::string_view op, DenseArray value, std::initializer_list<Var> parents,
             Backward backward);
  Var record(std::string_view op, DenseArray value, bool needs_grad, Backward backward);

  // Seeds d(root)/d(root) = 1 for a single-element root and runs the reverse
  // sweep. Returns the number of nodes whose backward rule ran.
  std::size_t backward(Var root);

  const DenseArray& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Mutable gradient buffer, zero-initialized on first access.
  DenseArray& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::string_view op;
    DenseArray value;
    DenseArray grad;
    Backward backward;
    bool requires_grad = false;
    Parameter* bound = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

}  // namespace msstrn
