#pragma once

#include <string>
#include <string_view>

#include "msstrn/parameter_store.hpp"
#include "msstrn/tape.hpp"

namespace msstrn {

// Places store entries on a tape. A binder built from a const store records
// plain constants, for inference passes that never call backward.
class ParameterBinder {
 public:
  ParameterBinder(Tape& tape, ParameterStore& store) : tape_(&tape), store_(&store), mutable_(&store) {}
  ParameterBinder(Tape& tape, const ParameterStore& store) : tape_(&tape), store_(&store) {}

  Var operator()(std::string_view name) const {
    if (mutable_ != nullptr) return tape_->parameter(*mutable_, name);
    return tape_->constant(store_->at(name).value);
  }

  bool contains(std::string_view name) const { return store_->contains(name); }
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  const ParameterStore* store_;
  ParameterStore* mutable_ = nullptr;
};

inline std::string join_name(std::string_view prefix, std::string_view leaf) {
  if (prefix.empty()) return std::string(leaf);
  std::string out(prefix);
  out += '.';
  out += leaf;
  return out;
}

}  // namespace msstrn
