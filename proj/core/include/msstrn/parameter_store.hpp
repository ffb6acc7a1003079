#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msstrn/dense_array.hpp"

namespace msstrn {

// Role decides optimizer treatment: biases and layer-norm parameters are
// exempt from weight decay.
enum class ParamRole { Weight, Bias, Norm, Embedding };

std::string_view to_string(ParamRole role);

struct Parameter {
  std::string name;
  DenseArray value;
  DenseArray grad;
  ParamRole role = ParamRole::Weight;
  bool trainable = true;
};

// Insertion-ordered collection of named parameters. Names are unique and
// shapes are fixed at registration.
class ParameterStore {
 public:
  Parameter& add(std::string name, DenseArray init, ParamRole role, bool trainable = true);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter& operator[](std::size_t index) { return entries_[index]; }
  const Parameter& operator[](std::size_t index) const { return entries_[index]; }

  std::span<Parameter> entries() noexcept { return entries_; }
  std::span<const Parameter> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  // Number of scalar entries, optionally restricted to names with a prefix.
  std::size_t scalar_count(std::string_view prefix = {}) const;

  void set_value(std::string_view name, const DenseArray& value);
  void zero_grad();

 private:
  std::vector<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace msstrn
