#include "msstrn/attention.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"

namespace msstrn::attention {

void AttentionDims::validate() const {
  if (in == 0 || out == 0 || heads == 0) throw ConfigError("attention dimensions must be positive");
  if (out % heads != 0) {
    throw ConfigError("attention width " + std::to_string(out) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

std::size_t parameter_count(const AttentionDims& dims) {
  return 2 * dims.in * dims.out + dims.out * dims.out + (dims.value_projection ? dims.in * dims.out : 0);
}

namespace {

DenseArray glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseArray out({rows, cols});
  for (double& v : out.data()) v = dist(rng);
  return out;
}

}  // namespace

void declare_attention(ParameterStore& store, std::string_view prefix, const AttentionDims& dims,
                       std::mt19937_64& rng) {
  dims.validate();
  store.add(join_name(prefix, "query"), glorot(dims.in, dims.out, rng), ParamRole::Weight);
  store.add(join_name(prefix, "key"), glorot(dims.in, dims.out, rng), ParamRole::Weight);
  store.add(join_name(prefix, "output"), glorot(dims.out, dims.out, rng), ParamRole::Weight);
  if (dims.value_projection) {
    store.add(join_name(prefix, "value"), glorot(dims.in, dims.out, rng), ParamRole::Weight);
  }
}

AttentionParams bind_attention(const ParameterBinder& bind, std::string_view prefix,
                               const AttentionDims& dims) {
  dims.validate();
  AttentionParams p;
  p.dims = dims;
  p.query = bind(join_name(prefix, "query"));
  p.key = bind(join_name(prefix, "key"));
  p.output = bind(join_name(prefix, "output"));
  if (dims.value_projection) p.value = bind(join_name(prefix, "value"));
  const Shape proj{dims.in, dims.out};
  if (p.query.shape() != proj || p.key.shape() != proj || p.output.shape() != Shape{dims.out, dims.out} ||
      (p.value && p.value->shape() != proj)) {
    throw ShapeError("attention '" + std::string(prefix) + "' parameters do not match declared dimensions");
  }
  return p;
}

Var temporal_attention(Var q, Var k, Var v) {
  if (q.shape().size() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("temporal_attention: q, k, v must share an R x s x d shape, got " + to_string(q.shape()) +
                     ", " + to_string(k.shape()) + ", " + to_string(v.shape()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.shape()[2]));
  Var scores = ops::softmax_rows(ops::scale(ops::batched_matmul(q, ops::transpose_last(k)), scale));
  return ops::batched_matmul(scores, v);
}

Var stsatt(Var x, std::span<const Var> stack, Var embedding, const conv::NodeAdaptiveWeights* gcn,
           const AttentionParams& att) {
  const AttentionDims& dims = att.dims;
  const Shape& sx = x.shape();
  if (sx.size() != 4 || sx[3] != dims.in) {
    throw ShapeError("stsatt: input must be B x s x N x " + std::to_string(dims.in) + ", got " + to_string(sx));
  }
  const std::size_t batch = sx[0], steps = sx[1], nodes = sx[2];

  Var values;
  if (att.value) {
    values = ops::linear(x, *att.value);
  } else {
    if (gcn == nullptr) throw ContractError("stsatt: no graph convolution supplied for the value path");
    if (gcn->dims.in != dims.in || gcn->dims.out != dims.out) {
      throw ShapeError("stsatt: graph convolution widths do not match the attention widths");
    }
    values = ops::reshape(conv::apgcn(ops::reshape(x, {batch * steps, nodes, dims.in}), stack, embedding, *gcn),
                          {batch, steps, nodes, dims.out});
  }

  constexpr std::array<std::size_t, 4> to_node_major{0, 2, 1, 3};
  const Shape rows{batch * nodes, steps, dims.out};
  Var xn = ops::permute(x, to_node_major);
  Var q = ops::reshape(ops::linear(xn, att.query), rows);
  Var k = ops::reshape(ops::linear(xn, att.key), rows);
  Var v = ops::reshape(ops::permute(values, to_node_major), rows);

  Var mixed;
  if (dims.heads == 1) {
    mixed = temporal_attention(q, k, v);
  } else {
    const std::size_t hd = dims.head_dim();
    std::vector<Var> heads;
    heads.reserve(dims.heads);
    for (std::size_t j = 0; j < dims.heads; ++j) {
      heads.push_back(temporal_attention(ops::slice_last(q, j * hd, hd), ops::slice_last(k, j * hd, hd),
                                         ops::slice_last(v, j * hd, hd)));
    }
    mixed = ops::concat_last(heads);
  }
  Var projected = ops::reshape(ops::linear(mixed, att.output), {batch, nodes, steps, dims.out});
  return ops::permute(projected, to_node_major);
}

}  // namespace msstrn::attention
