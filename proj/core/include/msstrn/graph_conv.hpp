#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>

#include "msstrn/binder.hpp"
#include "msstrn/tape.hpp"

namespace msstrn::conv {

struct ConvDims {
  std::size_t embed_dim = 0;  // d
  std::size_t depth = 2;      // K
  std::size_t in = 0;
  std::size_t out = 0;
};

// Weight pool d x K x in x out and bias pool d x out. Node n gets
// Theta[n] = sum_e E[n,e] * W[e] and beta[n] = sum_e E[n,e] * b[e].
struct NodeAdaptiveWeights {
  ConvDims dims;
  Var weight;
  Var bias;
};

std::size_t parameter_count(const ConvDims& dims);

// Registers <prefix>.weight and <prefix>.bias (zero).
void declare_node_adaptive(ParameterStore& store, std::string_view prefix, const ConvDims& dims,
                           std::mt19937_64& rng);
NodeAdaptiveWeights bind_node_adaptive(const ParameterBinder& bind, std::string_view prefix,
                                       const ConvDims& dims);

// x: P x N x in signal, stack: K Chebyshev terms (N x N, stack[0] == I),
// embedding: N x d. Returns P x N x out with
//   out[t,n] = sum_k (stack[k] x[t])[n] Theta[n,k] + beta[n].
// All P slices share the same graph and embedding.
Var apgcn(Var x, std::span<const Var> stack, Var embedding, const NodeAdaptiveWeights& w);

}  // namespace msstrn::conv
