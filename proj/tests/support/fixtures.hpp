#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "msstrn/dense_array.hpp"
#include "msstrn/grad_check.hpp"
#include "msstrn/parameter_store.hpp"

namespace fixture {

using msstrn::DenseArray;
using msstrn::Shape;

inline DenseArray random_array(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  DenseArray a(shape);
  for (double& v : a.data()) v = dist(rng);
  return a;
}

// Overwrites every entry whose name starts with `prefix` with uniform draws,
// so zero-initialized biases also take part in oracle comparisons.
inline void randomize(msstrn::ParameterStore& store, std::mt19937_64& rng, double scale = 0.5,
                      std::string_view prefix = {}) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& p : store.entries()) {
    if (!std::string_view(p.name).starts_with(prefix)) continue;
    for (double& v : p.value.data()) v = dist(rng);
  }
}

inline void zero_all(msstrn::ParameterStore& store) {
  for (auto& p : store.entries()) p.value.fill(0.0);
}

inline std::vector<double> column(const DenseArray& a, std::size_t offset, std::size_t count) {
  return {a.data().begin() + static_cast<std::ptrdiff_t>(offset),
          a.data().begin() + static_cast<std::ptrdiff_t>(offset + count)};
}

}  // namespace fixture
