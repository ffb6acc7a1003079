#include "msstrn/adaptive_graph.hpp"

#include <cmath>
#include <string>

#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"

namespace msstrn::graph {

void BankDims::validate() const {
  if (nodes == 0 || steps == 0 || window == 0 || embed_dim == 0) {
    throw ConfigError("embedding bank dimensions must be positive");
  }
  if (steps % window != 0) {
    throw ConfigError("input length " + std::to_string(steps) + " is not divisible by window size " +
                      std::to_string(window));
  }
}

std::size_t embedding_parameter_count(const BankDims& dims) {
  return dims.nodes * dims.embed_dim + dims.steps * dims.embed_dim + dims.windows() * dims.embed_dim;
}

namespace {

DenseArray uniform_array(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseArray out(std::move(shape));
  for (double& v : out.data()) v = dist(rng);
  return out;
}

Var normalized_embedding(const EmbeddingBank& bank, const std::optional<Var>& offsets,
                         std::size_t index, Var gain, Var bias) {
  Var base = bank.node;
  if (offsets) {
    Var row = ops::reshape(ops::select(*offsets, 0, index), {bank.dims.embed_dim});
    base = ops::add_trailing(bank.node, row);
  }
  return ops::layer_norm(base, gain, bias, bank.norm_eps);
}

}  // namespace

void declare_embedding_bank(ParameterStore& store, std::string_view prefix, const BankDims& dims,
                            const BankOptions& options, std::mt19937_64& rng) {
  dims.validate();
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.embed_dim));
  const std::size_t d = dims.embed_dim;
  store.add(join_name(prefix, "node"), uniform_array({dims.nodes, d}, bound, rng), ParamRole::Embedding);
  if (options.time_positions) {
    store.add(join_name(prefix, "step"), uniform_array({dims.steps, 1, d}, bound, rng), ParamRole::Embedding);
    store.add(join_name(prefix, "window"), uniform_array({dims.windows(), 1, d}, bound, rng),
              ParamRole::Embedding);
  }
  store.add(join_name(prefix, "step_norm.gain"), DenseArray({d}, 1.0), ParamRole::Norm, options.norm_trainable);
  store.add(join_name(prefix, "step_norm.bias"), DenseArray({d}, 0.0), ParamRole::Norm, options.norm_trainable);
  store.add(join_name(prefix, "window_norm.gain"), DenseArray({d}, 1.0), ParamRole::Norm, options.norm_trainable);
  store.add(join_name(prefix, "window_norm.bias"), DenseArray({d}, 0.0), ParamRole::Norm, options.norm_trainable);
}

EmbeddingBank bind_embedding_bank(const ParameterBinder& bind, std::string_view prefix,
                                  const BankDims& dims) {
  dims.validate();
  EmbeddingBank bank;
  bank.dims = dims;
  bank.node = bind(join_name(prefix, "node"));
  if (bank.node.shape() != Shape{dims.nodes, dims.embed_dim}) {
    throw ShapeError("node embedding has shape " + to_string(bank.node.shape()));
  }
  if (bind.contains(join_name(prefix, "step"))) {
    bank.step = bind(join_name(prefix, "step"));
    bank.window = bind(join_name(prefix, "window"));
    if (bank.step->shape() != Shape{dims.steps, 1, dims.embed_dim} ||
        bank.window->shape() != Shape{dims.windows(), 1, dims.embed_dim}) {
      throw ShapeError("time-position embeddings do not match the bank dimensions");
    }
  }
  bank.step_gain = bind(join_name(prefix, "step_norm.gain"));
  bank.step_bias = bind(join_name(prefix, "step_norm.bias"));
  bank.window_gain = bind(join_name(prefix, "window_norm.gain"));
  bank.window_bias = bind(join_name(prefix, "window_norm.bias"));
  return bank;
}

Var step_embedding(const EmbeddingBank& bank, std::size_t i) {
  if (i >= bank.dims.steps) {
    throw ShapeError("step index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(bank.dims.steps) + ")");
  }
  return normalized_embedding(bank, bank.step, i, bank.step_gain, bank.step_bias);
}

Var window_embedding(const EmbeddingBank& bank, std::size_t j) {
  if (j >= bank.dims.windows()) {
    throw ShapeError("window index " + std::to_string(j) + " out of range [0, " +
                     std::to_string(bank.dims.windows()) + ")");
  }
  return normalized_embedding(bank, bank.window, j, bank.window_gain, bank.window_bias);
}

Var similarity_graph(Var embedding) {
  return ops::softmax_rows(ops::matmul(embedding, ops::transpose_last(embedding)));
}

Var single_step_laplacian(const EmbeddingBank& bank, std::size_t i) {
  return similarity_graph(step_embedding(bank, i));
}

Var multi_step_laplacian(const EmbeddingBank& bank, std::size_t j) {
  return similarity_graph(window_embedding(bank, j));
}

std::vector<Var> chebyshev_stack(Var lhat, std::size_t depth) {
  const Shape& s = lhat.shape();
  if (s.size() != 2 || s[0] != s[1]) throw ShapeError("chebyshev_stack: matrix must be square, got " + to_string(s));
  if (depth < 2) throw ConfigError("chebyshev depth must be at least 2, got " + std::to_string(depth));
  std::vector<Var> terms;
  terms.reserve(depth);
  terms.push_back(lhat.tape().constant(DenseArray::identity(s[0])));
  terms.push_back(lhat);
  for (std::size_t k = 2; k < depth; ++k) {
    terms.push_back(ops::sub(ops::scale(ops::matmul(lhat, terms[k - 1]), 2.0), terms[k - 2]));
  }
  return terms;
}

std::span<const Var> ChebStack::at(std::size_t position) const {
  if (position >= terms_.size()) {
    throw ShapeError("graph position " + std::to_string(position) + " out of range [0, " +
                     std::to_string(terms_.size()) + ")");
  }
  return terms_[position];
}

DenseArray ChebStack::tensor() const {
  if (terms_.empty()) throw ShapeError("empty Chebyshev stack");
  const std::size_t n = terms_[0][0].shape()[0];
  const std::size_t positions = terms_.size();
  const std::size_t depth = terms_[0].size();
  DenseArray out({depth, positions, n, n});
  auto dst = out.data();
  for (std::size_t k = 0; k < depth; ++k) {
    for (std::size_t p = 0; p < positions; ++p) {
      auto src = terms_[p][k].value().data();
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>((k * positions + p) * n * n));
    }
  }
  return out;
}

GraphBanks build_graph_banks(const EmbeddingBank& bank, std::size_t depth, std::optional<Var> fixed_graph) {
  GraphBanks out;
  std::vector<Var> fixed_terms;
  if (fixed_graph) {
    if (fixed_graph->shape() != Shape{bank.dims.nodes, bank.dims.nodes}) {
      throw ShapeError("fixed graph must be " + std::to_string(bank.dims.nodes) + "x" +
                       std::to_string(bank.dims.nodes) + ", got " + to_string(fixed_graph->shape()));
    }
    fixed_terms = chebyshev_stack(*fixed_graph, depth);
  }

  std::vector<std::vector<Var>> step_terms;
  for (std::size_t i = 0; i < bank.dims.steps; ++i) {
    Var e = step_embedding(bank, i);
    out.step_embeddings.push_back(e);
    step_terms.push_back(fixed_graph ? fixed_terms : chebyshev_stack(similarity_graph(e), depth));
  }
  std::vector<std::vector<Var>> window_terms;
  for (std::size_t j = 0; j < bank.dims.windows(); ++j) {
    Var e = window_embedding(bank, j);
    out.window_embeddings.push_back(e);
    window_terms.push_back(fixed_graph ? fixed_terms : chebyshev_stack(similarity_graph(e), depth));
  }
  out.single_step = ChebStack(std::move(step_terms));
  out.multi_step = ChebStack(std::move(window_terms));
  return out;
}

}  // namespace msstrn::graph
