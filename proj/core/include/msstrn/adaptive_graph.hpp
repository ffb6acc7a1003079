#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "msstrn/binder.hpp"
#include "msstrn/dense_array.hpp"
#include "msstrn/tape.hpp"

// Adaptive position graphs: learnable node and time-position embeddings
// produce one row-stochastic graph per input step and per window, each
// expanded into a Chebyshev stack.
namespace msstrn::graph {

struct BankDims {
  std::size_t nodes = 0;
  std::size_t steps = 0;      // T
  std::size_t window = 1;     // s
  std::size_t embed_dim = 0;  // d

  std::size_t windows() const { return steps / window; }
  // Rejects zero sizes and T not divisible by s.
  void validate() const;
};

// N*d + T*d + (T/s)*d; layer-norm gain/bias are not included.
std::size_t embedding_parameter_count(const BankDims& dims);

struct BankOptions {
  // Without time positions every graph comes from the node embedding alone.
  bool time_positions = true;
  bool norm_trainable = true;
};

// Registers <prefix>.node (N x d), <prefix>.step (T x 1 x d),
// <prefix>.window (T/s x 1 x d) and one layer-norm gain/bias pair per family.
// Embeddings are drawn uniformly from (-1/sqrt(d), 1/sqrt(d)).
void declare_embedding_bank(ParameterStore& store, std::string_view prefix, const BankDims& dims,
                            const BankOptions& options, std::mt19937_64& rng);

struct EmbeddingBank {
  BankDims dims;
  Var node;
  std::optional<Var> step;
  std::optional<Var> window;
  Var step_gain;
  Var step_bias;
  Var window_gain;
  Var window_bias;
  double norm_eps = 1e-5;
};

EmbeddingBank bind_embedding_bank(const ParameterBinder& bind, std::string_view prefix,
                                  const BankDims& dims);

// layer_norm(E_phi + E1[i]) row-wise: the per-step node embedding, N x d.
Var step_embedding(const EmbeddingBank& bank, std::size_t i);
// layer_norm(E_phi + E2[j]) row-wise: the per-window node embedding, N x d.
Var window_embedding(const EmbeddingBank& bank, std::size_t j);

// softmax_rows(e * e^T)
Var similarity_graph(Var embedding);

Var single_step_laplacian(const EmbeddingBank& bank, std::size_t i);
Var multi_step_laplacian(const EmbeddingBank& bank, std::size_t j);

// [I, L, 2L*T1 - T0, ...] with `depth` terms; depth must be at least 2.
std::vector<Var> chebyshev_stack(Var lhat, std::size_t depth);

// Chebyshev terms for each position p (step or window).
class ChebStack {
 public:
  ChebStack() = default;
  explicit ChebStack(std::vector<std::vector<Var>> terms) : terms_(std::move(terms)) {}

  std::size_t positions() const { return terms_.size(); }
  std::size_t depth() const { return terms_.empty() ? 0 : terms_.front().size(); }
  std::span<const Var> at(std::size_t position) const;

  // K x P x N x N snapshot of the current values.
  DenseArray tensor() const;

 private:
  std::vector<std::vector<Var>> terms_;
};

struct GraphBanks {
  ChebStack single_step;  // over T steps
  ChebStack multi_step;   // over T/s windows
  std::vector<Var> step_embeddings;
  std::vector<Var> window_embeddings;
};

// Builds every per-position graph and its Chebyshev expansion. When
// `fixed_graph` is given it replaces all generated graphs; the embeddings are
// still produced for node-adaptive weights.
GraphBanks build_graph_banks(const EmbeddingBank& bank, std::size_t depth,
                             std::optional<Var> fixed_graph = std::nullopt);

}  // namespace msstrn::graph
