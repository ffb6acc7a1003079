#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msstrn/adaptive_graph.hpp"
#include "msstrn/dense_array.hpp"
#include "msstrn/parameter_store.hpp"
#include "msstrn/recurrent.hpp"
#include "msstrn/tape.hpp"

namespace msstrn {

using recurrent::LayerKind;

// Ablation variants.
enum class Variant {
  Full,    // generated position graphs + synchronous attention
  Static,  // one fixed row-normalized adjacency replaces all generated graphs
  Only,    // graphs from the node embedding alone (no time positions)
  Att,     // MS gates use attention with a learned value matrix
  Apgcn,   // MS gates use the graph convolution only
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

// "MS-SS" -> {MultiStep, SingleStep}. Tokens are SS or MS separated by '-'.
std::vector<LayerKind> parse_stack(std::string_view text);
std::string format_stack(const std::vector<LayerKind>& stack);

struct ModelConfig {
  std::size_t nodes = 0;
  std::size_t features = 1;
  std::size_t input_steps = 12;  // T
  std::size_t horizon = 12;      // T'
  std::size_t embed_dim = 9;     // d
  std::size_t hidden_dim = 16;
  std::size_t cheb_depth = 2;    // K
  std::size_t heads = 4;         // h
  std::size_t window = 3;        // s
  std::vector<LayerKind> stack{LayerKind::MultiStep, LayerKind::SingleStep};
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  // N x N, required by Variant::Static. Rows are normalized to sum to 1.
  std::optional<DenseArray> static_adjacency;
  bool norm_trainable = true;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

// Final layer-norm plus a per-node dense map hidden -> horizon shared by all nodes.
struct OutputHead {
  Var gain;
  Var bias;
  Var weight;       // hidden x horizon
  Var weight_bias;  // horizon
};

// h_last: B x N x hidden -> B x horizon x N x 1.
Var output_projection(Var h_last, const OutputHead& head, double eps = 1e-5);

// Mean absolute error over all elements.
Var l1_loss(Var pred, Var truth);

class Model {
 public:
  // Declares and initializes every parameter from config.seed.
  explicit Model(ModelConfig config);
  // Adopts existing values; they must match the declared names and shapes.
  Model(ModelConfig config, const ParameterStore& values);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  // inputs: B x T x N x C (normalized) -> B x T' x N x 1. The non-const
  // overload binds parameters so backward() fills their gradients.
  Var forward(Tape& tape, Var inputs);
  Var forward(Tape& tape, Var inputs) const;

  DenseArray predict(const DenseArray& inputs) const;

  // Row-normalized copy of the static adjacency, when configured.
  const std::optional<DenseArray>& fixed_graph() const noexcept { return fixed_graph_; }

 private:
  Var run(const ParameterBinder& bind, Var inputs) const;
  recurrent::GateDims layer_dims(std::size_t layer) const;

  ModelConfig config_;
  ParameterStore params_;
  std::optional<DenseArray> fixed_graph_;
};

}  // namespace msstrn
