#include "msstrn/diagnostics.hpp"

#include <random>

namespace msstrn {

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.nodes = 4;
  c.input_steps = 4;
  c.horizon = 2;
  c.window = 2;
  c.embed_dim = 3;
  c.hidden_dim = 4;
  c.cheb_depth = 2;
  c.heads = 1;
  return c;
}

GradCheckPoint grad_check_point(const ModelConfig& config, std::size_t batch, std::uint64_t data_seed) {
  GradCheckPoint point{Model(config), DenseArray(), DenseArray()};
  std::mt19937_64 rng(data_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> offset(0.5, 1.5);

  point.inputs = DenseArray({batch, config.input_steps, config.nodes, config.features});
  for (double& v : point.inputs.data()) v = normal(rng);
  point.targets = point.model.predict(point.inputs);
  for (double& v : point.targets.data()) v -= offset(rng);
  return point;
}

ScalarProgram grad_check_program(GradCheckPoint& point) {
  return [&point](Tape& tape, ParameterStore&) {
    return l1_loss(point.model.forward(tape, tape.constant(point.inputs)), tape.constant(point.targets));
  };
}

GradCheckReport model_grad_check(const ModelConfig& config, std::size_t batch, std::uint64_t data_seed, double eps) {
  GradCheckPoint point = grad_check_point(config, batch, data_seed);
  return grad_check(grad_check_program(point), point.model.parameters(), eps);
}

}  // namespace msstrn
