#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "msstrn/adaptive_graph.hpp"
#include "msstrn/attention.hpp"
#include "msstrn/graph_conv.hpp"

// Spatial-temporal GRU cells. SS cells step one input at a time with a
// graph convolution inside each gate; MS cells consume a window of s steps
// with synchronous attention inside each gate.
namespace msstrn::recurrent {

enum class LayerKind { SingleStep, MultiStep };

// What sits inside each gate of a layer.
enum class GateFlavor {
  GraphConv,       // apgcn (SS layers, and MS layers of the apgcn ablation)
  SyncAttention,   // stsatt with graph-conv values
  PlainAttention,  // multi-head attention with a learned value matrix
};

struct GateDims {
  GateFlavor flavor = GateFlavor::GraphConv;
  std::size_t features = 0;  // input width of the layer
  std::size_t hidden = 0;
  std::size_t embed_dim = 0;
  std::size_t depth = 2;
  std::size_t heads = 1;

  std::size_t cell_in() const { return features + hidden; }
  conv::ConvDims conv_dims() const;
  attention::AttentionDims attention_dims() const;
};

// One gate's inner transform.
struct GateTransform {
  std::optional<conv::NodeAdaptiveWeights> conv;
  std::optional<attention::AttentionParams> attention;
};

// Update, reset and candidate transforms with independent storage.
struct GruGateParams {
  GateDims dims;
  GateTransform update;
  GateTransform reset;
  GateTransform candidate;
};

std::size_t parameter_count(const GateDims& dims);

// Registers <prefix>.{update,reset,candidate}.{conv,attention}.*
void declare_gru(ParameterStore& store, std::string_view prefix, const GateDims& dims, std::mt19937_64& rng);
GruGateParams bind_gru(const ParameterBinder& bind, std::string_view prefix, const GateDims& dims);

// x: B x N x features, h_prev: B x N x hidden -> B x N x hidden.
Var ss_gru_cell(Var x, Var h_prev, std::span<const Var> stack, Var embedding, const GruGateParams& params);

// x_win: B x s x N x features, h_prev: B x s x N x hidden -> B x s x N x hidden.
Var ms_gru_cell(Var x_win, Var h_prev, std::span<const Var> stack, Var embedding, const GruGateParams& params);

// Scans a layer over `seq` (T entries of B x N x features) from a zero
// hidden state. SS layers use stride 1 with the per-step graphs; MS layers
// use stride s with the per-window graphs and emit s outputs per window.
std::vector<Var> run_layer(std::span<const Var> seq, LayerKind kind, std::size_t stride,
                           const graph::GraphBanks& banks, const GruGateParams& params);

}  // namespace msstrn::recurrent
