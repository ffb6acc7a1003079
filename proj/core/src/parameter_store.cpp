#include "msstrn/parameter_store.hpp"

#include "msstrn/errors.hpp"

namespace msstrn {

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Weight: return "weight";
    case ParamRole::Bias: return "bias";
    case ParamRole::Norm: return "norm";
    case ParamRole::Embedding: return "embedding";
  }
  return "weight";
}

Parameter& ParameterStore::add(std::string name, DenseArray init, ParamRole role, bool trainable) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  Parameter p;
  p.grad = DenseArray(init.shape());
  p.value = std::move(init);
  p.name = std::move(name);
  p.role = role;
  p.trainable = trainable;
  entries_.push_back(std::move(p));
  return entries_.back();
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Parameter& ParameterStore::at(std::string_view name) { return entries_[index_of(name)]; }
const Parameter& ParameterStore::at(std::string_view name) const { return entries_[index_of(name)]; }

std::size_t ParameterStore::scalar_count(std::string_view prefix) const {
  std::size_t total = 0;
  for (const auto& p : entries_) {
    if (std::string_view(p.name).starts_with(prefix)) total += p.value.size();
  }
  return total;
}

void ParameterStore::set_value(std::string_view name, const DenseArray& value) {
  Parameter& p = at(name);
  if (p.value.shape() != value.shape()) {
    throw ShapeError("parameter '" + p.name + "' has shape " + to_string(p.value.shape()) +
                     ", got " + to_string(value.shape()));
  }
  p.value = value;
}

void ParameterStore::zero_grad() {
  for (auto& p : entries_) p.grad.fill(0.0);
}

}  // namespace msstrn
