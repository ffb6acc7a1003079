#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "msstrn/parameter_store.hpp"
#include "msstrn/tape.hpp"

namespace msstrn {

// Builds a scalar on the given tape, binding parameters from the store.
using ScalarProgram = std::function<Var(Tape&, ParameterStore&)>;

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::vector<ParamCheck> params;

  const ParamCheck* worst() const;
};

// Compares reverse-mode gradients of `program` against central differences
// for every trainable entry in `params`. Relative error per entry is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport grad_check(const ScalarProgram& program, ParameterStore& params, double eps = 1e-5);

}  // namespace msstrn
