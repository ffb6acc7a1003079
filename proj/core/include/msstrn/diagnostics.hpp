#pragma once

#include <cstddef>
#include <cstdint>

#include "msstrn/grad_check.hpp"
#include "msstrn/model.hpp"

namespace msstrn {

// N=4, T=4, T'=2, s=2, d=3, hidden=4, K=2, h=1 with the MS-SS stack.
ModelConfig tiny_model_config();

// Evaluation point for model gradient checks. Inputs are seeded normal
// draws; targets sit below the initial prediction by 0.5 to 1.5 elementwise,
// so the L1 loss is differentiable there and no output-side gradient
// cancels to exactly zero.
struct GradCheckPoint {
  Model model;
  DenseArray inputs;
  DenseArray targets;
};

GradCheckPoint grad_check_point(const ModelConfig& config, std::size_t batch, std::uint64_t data_seed);

// L1 loss of the point's model; the returned program references `point`.
ScalarProgram grad_check_program(GradCheckPoint& point);

// grad_check over every model parameter at grad_check_point(config, batch, data_seed).
GradCheckReport model_grad_check(const ModelConfig& config, std::size_t batch = 1, std::uint64_t data_seed = 1,
                                 double eps = 1e-5);

}  // namespace msstrn
