#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>

#include "msstrn/binder.hpp"
#include "msstrn/graph_conv.hpp"
#include "msstrn/tape.hpp"

// Spatial-temporal synchronous attention: per-node temporal self-attention
// whose values are spatially mixed by a node-adaptive graph convolution.
namespace msstrn::attention {

struct AttentionDims {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t heads = 1;
  // Learn a plain value matrix instead of taking values from the graph conv.
  bool value_projection = false;

  std::size_t head_dim() const { return out / heads; }
  void validate() const;
};

// Query/key projections are stored fused (in x out); head j uses columns
// [j*out/h, (j+1)*out/h). The output projection is out x out.
struct AttentionParams {
  AttentionDims dims;
  Var query;
  Var key;
  Var output;
  std::optional<Var> value;
};

std::size_t parameter_count(const AttentionDims& dims);

void declare_attention(ParameterStore& store, std::string_view prefix, const AttentionDims& dims,
                       std::mt19937_64& rng);
AttentionParams bind_attention(const ParameterBinder& bind, std::string_view prefix,
                               const AttentionDims& dims);

// q, k, v: R x s x d_h. Each of the R rows attends over its own s positions:
// softmax(q k^T / sqrt(d_h)) v.
Var temporal_attention(Var q, Var k, Var v);

// x: B x s x N x in. Values come from `gcn` (or the plain value matrix when
// the attention was declared with one); queries and keys come from x.
// Returns B x s x N x out.
Var stsatt(Var x, std::span<const Var> stack, Var embedding, const conv::NodeAdaptiveWeights* gcn,
           const AttentionParams& att);

}  // namespace msstrn::attention
