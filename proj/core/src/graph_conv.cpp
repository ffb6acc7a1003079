#include "msstrn/graph_conv.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"

namespace msstrn::conv {

std::size_t parameter_count(const ConvDims& dims) {
  return dims.embed_dim * dims.depth * dims.in * dims.out + dims.embed_dim * dims.out;
}

void declare_node_adaptive(ParameterStore& store, std::string_view prefix, const ConvDims& dims,
                           std::mt19937_64& rng) {
  if (dims.embed_dim == 0 || dims.in == 0 || dims.out == 0) throw ConfigError("graph conv dimensions must be positive");
  if (dims.depth < 2) throw ConfigError("chebyshev depth must be at least 2");
  // Glorot range for the effective per-node weight; the pool is contracted
  // with d unit-scale embedding coordinates.
  const double bound = std::sqrt(6.0 / static_cast<double>(dims.depth * dims.in + dims.out)) /
                       std::sqrt(static_cast<double>(dims.embed_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseArray weight({dims.embed_dim, dims.depth, dims.in, dims.out});
  for (double& v : weight.data()) v = dist(rng);
  store.add(join_name(prefix, "weight"), std::move(weight), ParamRole::Weight);
  store.add(join_name(prefix, "bias"), DenseArray({dims.embed_dim, dims.out}), ParamRole::Bias);
}

NodeAdaptiveWeights bind_node_adaptive(const ParameterBinder& bind, std::string_view prefix,
                                       const ConvDims& dims) {
  NodeAdaptiveWeights w{dims, bind(join_name(prefix, "weight")), bind(join_name(prefix, "bias"))};
  if (w.weight.shape() != Shape{dims.embed_dim, dims.depth, dims.in, dims.out} ||
      w.bias.shape() != Shape{dims.embed_dim, dims.out}) {
    throw ShapeError("graph conv '" + std::string(prefix) + "' parameters do not match declared dimensions");
  }
  return w;
}

namespace {

void require_identity(const DenseArray& m) {
  const std::size_t n = m.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (m[i * n + j] != (i == j ? 1.0 : 0.0)) {
        throw ContractError("apgcn: first Chebyshev term must be the identity");
      }
    }
  }
}

}  // namespace

Var apgcn(Var x, std::span<const Var> stack, Var embedding, const NodeAdaptiveWeights& w) {
  const ConvDims& dims = w.dims;
  const Shape& sx = x.shape();
  if (sx.size() != 3 || sx[2] != dims.in) {
    throw ShapeError("apgcn: input must be P x N x " + std::to_string(dims.in) + ", got " + to_string(sx));
  }
  const std::size_t nodes = sx[1];
  if (stack.size() != dims.depth) {
    throw ShapeError("apgcn: expected " + std::to_string(dims.depth) + " Chebyshev terms, got " +
                     std::to_string(stack.size()));
  }
  for (const Var& term : stack) {
    if (term.shape() != Shape{nodes, nodes}) throw ShapeError("apgcn: graph term has shape " + to_string(term.shape()));
  }
  if (embedding.shape() != Shape{nodes, dims.embed_dim}) {
    throw ShapeError("apgcn: embedding must be " + std::to_string(nodes) + " x " +
                     std::to_string(dims.embed_dim) + ", got " + to_string(embedding.shape()));
  }
  require_identity(stack[0].value());

  const std::size_t fan = dims.depth * dims.in;
  Var theta = ops::reshape(
      ops::matmul(embedding, ops::reshape(w.weight, {dims.embed_dim, fan * dims.out})),
      {nodes, fan, dims.out});
  Var beta = ops::matmul(embedding, w.bias);

  std::vector<Var> diffused;
  diffused.reserve(dims.depth);
  diffused.push_back(x);
  for (std::size_t k = 1; k < dims.depth; ++k) diffused.push_back(ops::graph_mix(stack[k], x));
  Var z = dims.depth == 1 ? x : ops::concat_last(diffused);
  return ops::add_trailing(ops::node_matmul(z, theta), beta);
}

}  // namespace msstrn::conv
