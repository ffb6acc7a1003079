#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "msstrn/adaptive_graph.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/grad_check.hpp"
#include "msstrn/ops.hpp"
#include "oracles.hpp"

using namespace msstrn;
using namespace msstrn::graph;

namespace {

ParameterStore make_bank(const BankDims& dims, std::uint64_t seed, BankOptions options = {}) {
  ParameterStore store;
  std::mt19937_64 rng(seed);
  declare_embedding_bank(store, "bank", dims, options, rng);
  return store;
}

void expect_matrix_near(const DenseArray& got, const oracle::Matrix& want, double tol) {
  const std::size_t n = want.size();
  ASSERT_EQ(got.shape(), (Shape{n, want[0].size()}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < want[i].size(); ++j) EXPECT_NEAR(got[i * want[i].size() + j], want[i][j], tol);
}

oracle::Matrix oracle_step_graph(const ParameterStore& s, std::size_t i, const char* family) {
  const std::string f(family);
  const DenseArray& pos = s.at("bank." + f).value;
  const std::size_t d = s.at("bank.node").value.dim(1);
  const auto gain = oracle::values(s.at("bank." + f + "_norm.gain").value);
  const auto bias = oracle::values(s.at("bank." + f + "_norm.bias").value);
  return oracle::similarity(oracle::position_embedding(s.at("bank.node").value, pos.data().data() + i * d, gain, bias, 1e-5));
}

}  // namespace

TEST(Laplacian, ZeroBankIsUniform) {
  const BankDims dims{5, 4, 2, 3};
  ParameterStore s = make_bank(dims, 1);
  fixture::zero_all(s);
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  for (std::size_t i = 0; i < 4; ++i)
    for (double v : single_step_laplacian(bank, i).value().data()) EXPECT_DOUBLE_EQ(v, 0.2);
  for (std::size_t j = 0; j < 2; ++j)
    for (double v : multi_step_laplacian(bank, j).value().data()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Laplacian, SingleNodeIsOne) {
  const BankDims dims{1, 2, 1, 3};
  ParameterStore s = make_bank(dims, 2);
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  EXPECT_EQ(single_step_laplacian(bank, 1).value(), DenseArray({1, 1}, 1.0));
}

TEST(Laplacian, SingleStepMatchesCompositionOracle) {
  const BankDims dims{4, 6, 2, 3};
  ParameterStore s = make_bank(dims, 3);
  std::mt19937_64 rng(30);
  fixture::randomize(s, rng, 1.0, "bank.step_norm");
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  for (std::size_t i = 0; i < dims.steps; ++i)
    expect_matrix_near(single_step_laplacian(bank, i).value(), oracle_step_graph(s, i, "step"), 1e-10);
}

TEST(Laplacian, MultiStepMatchesCompositionOracle) {
  const BankDims dims{5, 8, 2, 4};
  ParameterStore s = make_bank(dims, 4);
  std::mt19937_64 rng(40);
  fixture::randomize(s, rng, 1.0, "bank.window_norm");
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  for (std::size_t j = 0; j < dims.windows(); ++j)
    expect_matrix_near(multi_step_laplacian(bank, j).value(), oracle_step_graph(s, j, "window"), 1e-10);
}

TEST(Laplacian, WindowEqualsStepForIdenticalInputs) {
  const BankDims dims{4, 4, 2, 3};
  ParameterStore s = make_bank(dims, 5);
  const DenseArray step = s.at("bank.step").value;
  DenseArray window = s.at("bank.window").value;
  for (std::size_t e = 0; e < 3; ++e) window[1 * 3 + e] = step[2 * 3 + e];
  s.set_value("bank.window", window);
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  EXPECT_EQ(multi_step_laplacian(bank, 1).value(), single_step_laplacian(bank, 2).value());
}

TEST(Laplacian, IndexOutOfRangeThrows) {
  const BankDims dims{3, 4, 2, 2};
  ParameterStore s = make_bank(dims, 6);
  Tape t;
  const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, s), "bank", dims);
  EXPECT_THROW(single_step_laplacian(bank, 4), ShapeError);
  EXPECT_THROW(multi_step_laplacian(bank, 2), ShapeError);
}

TEST(Chebyshev, DepthTwoIsIdentityThenInput) {
  std::mt19937_64 rng(7);
  Tape t;
  Var l = t.constant(fixture::random_array({3, 3}, rng));
  const auto terms = chebyshev_stack(l, 2);
  ASSERT_EQ(terms.size(), 2U);
  EXPECT_EQ(terms[0].value(), DenseArray::identity(3));
  EXPECT_EQ(terms[1].value(), l.value());
}

TEST(Chebyshev, IdentityStaysIdentity) {
  Tape t;
  for (const Var& term : chebyshev_stack(t.constant(DenseArray::identity(4)), 4))
    EXPECT_EQ(term.value(), DenseArray::identity(4));
}

TEST(Chebyshev, SymmetricDepthThreeMatchesPolynomial) {
  std::mt19937_64 rng(8);
  DenseArray a = fixture::random_array({4, 4}, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < i; ++j) a[i * 4 + j] = a[j * 4 + i];
  Tape t;
  const auto terms = chebyshev_stack(t.constant(a), 3);
  expect_matrix_near(terms[2].value(), oracle::chebyshev_explicit(oracle::to_matrix(a), 3)[2], 1e-10);
}

TEST(Chebyshev, DepthBelowTwoIsConfigError) {
  Tape t;
  EXPECT_THROW(chebyshev_stack(t.constant(DenseArray::identity(2)), 1), ConfigError);
  EXPECT_THROW(chebyshev_stack(t.constant(DenseArray({2, 3})), 2), ShapeError);
}

TEST(GraphBanks, ZeroBankShapes) {
  const BankDims dims{3, 4, 2, 2};
  ParameterStore s = make_bank(dims, 9);
  fixture::zero_all(s);
  Tape t;
  const GraphBanks banks = build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 2);
  EXPECT_EQ(banks.single_step.tensor().shape(), (Shape{2, 4, 3, 3}));
  EXPECT_EQ(banks.multi_step.tensor().shape(), (Shape{2, 2, 3, 3}));
  for (const ChebStack* stack : {&banks.single_step, &banks.multi_step}) {
    for (std::size_t p = 0; p < stack->positions(); ++p) {
      EXPECT_EQ(stack->at(p)[0].value(), DenseArray::identity(3));
      for (double v : stack->at(p)[1].value().data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
    }
  }
}

TEST(GraphBanks, EmbeddingParameterCount) {
  const BankDims dims{10, 12, 3, 4};
  EXPECT_EQ(embedding_parameter_count(dims), 104U);
  ParameterStore s = make_bank(dims, 10);
  EXPECT_EQ(s.at("bank.node").value.size() + s.at("bank.step").value.size() + s.at("bank.window").value.size(), 104U);
}

TEST(GraphBanks, PositionwiseOracle) {
  const BankDims dims{4, 6, 3, 3};
  ParameterStore s = make_bank(dims, 11);
  Tape t;
  const GraphBanks banks = build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 3);
  for (std::size_t i = 0; i < dims.steps; ++i) {
    const auto want = oracle::chebyshev_explicit(oracle_step_graph(s, i, "step"), 3);
    for (std::size_t k = 0; k < 3; ++k) expect_matrix_near(banks.single_step.at(i)[k].value(), want[k], 1e-10);
  }
  for (std::size_t j = 0; j < dims.windows(); ++j) {
    const auto want = oracle::chebyshev_explicit(oracle_step_graph(s, j, "window"), 3);
    for (std::size_t k = 0; k < 3; ++k) expect_matrix_near(banks.multi_step.at(j)[k].value(), want[k], 1e-10);
  }
}

TEST(GraphBanks, RowStochasticEverywhere) {
  const BankDims dims{6, 12, 4, 5};
  ParameterStore s = make_bank(dims, 12);
  std::mt19937_64 rng(120);
  fixture::randomize(s, rng, 3.0);
  Tape t;
  const GraphBanks banks = build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 2);
  for (const ChebStack* stack : {&banks.single_step, &banks.multi_step}) {
    for (std::size_t p = 0; p < stack->positions(); ++p) {
      const DenseArray& g = stack->at(p)[1].value();
      for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 6; ++j) row += g[i * 6 + j];
        EXPECT_NEAR(row, 1.0, 1e-6);
      }
    }
  }
}

TEST(GraphBanks, NodePermutationConjugatesGraphs) {
  const BankDims dims{5, 4, 2, 3};
  ParameterStore s = make_bank(dims, 13);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  ParameterStore p = s;
  DenseArray node = s.at("bank.node").value;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t e = 0; e < 3; ++e) node[i * 3 + e] = s.at("bank.node").value[perm[i] * 3 + e];
  p.set_value("bank.node", node);

  Tape t;
  const GraphBanks a = build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 2);
  const GraphBanks b = build_graph_banks(bind_embedding_bank(ParameterBinder(t, p), "bank", dims), 2);
  for (std::size_t pos = 0; pos < 4; ++pos) {
    const DenseArray& ga = a.single_step.at(pos)[1].value();
    const DenseArray& gb = b.single_step.at(pos)[1].value();
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(gb[i * 5 + j], ga[perm[i] * 5 + perm[j]], 1e-6);
  }
}

TEST(GraphBanks, FixedGraphReplacesGenerated) {
  const BankDims dims{3, 4, 2, 2};
  ParameterStore s = make_bank(dims, 14);
  Tape t;
  DenseArray fixed({3, 3}, 1.0 / 3.0);
  const GraphBanks banks =
      build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 2, t.constant(fixed));
  for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(banks.single_step.at(p)[1].value(), fixed);
  EXPECT_EQ(banks.step_embeddings.size(), 4U);
}

TEST(GraphBanks, NodeOnlyBankHasNoTimePositions) {
  const BankDims dims{3, 4, 2, 2};
  ParameterStore s = make_bank(dims, 15, {.time_positions = false});
  EXPECT_FALSE(s.contains("bank.step"));
  Tape t;
  const GraphBanks banks = build_graph_banks(bind_embedding_bank(ParameterBinder(t, s), "bank", dims), 2);
  EXPECT_EQ(banks.single_step.at(0)[1].value(), banks.single_step.at(3)[1].value());
}

TEST(BankDims, RejectsIndivisibleWindow) {
  EXPECT_THROW((BankDims{3, 12, 5, 2}.validate()), ConfigError);
  EXPECT_THROW((BankDims{0, 12, 3, 2}.validate()), ConfigError);
}

TEST(GraphBanks, GradientsFlowThroughLaplacian) {
  const BankDims dims{4, 4, 2, 3};
  ParameterStore s = make_bank(dims, 16);
  std::mt19937_64 rng(160);
  fixture::randomize(s, rng, 1.0);
  const DenseArray weights = fixture::random_array({4, 4}, rng);
  ScalarProgram f = [&](Tape& t, ParameterStore& st) {
    const EmbeddingBank bank = bind_embedding_bank(ParameterBinder(t, st), "bank", dims);
    return ops::sum(ops::mul(single_step_laplacian(bank, 1), t.constant(weights)));
  };
  EXPECT_LT(grad_check(f, s).max_rel_error, 1e-4);
}

TEST(GraphBanks, FrozenNormIsNotTrainable) {
  ParameterStore s = make_bank({3, 4, 2, 2}, 17, {.time_positions = true, .norm_trainable = false});
  EXPECT_FALSE(s.at("bank.step_norm.gain").trainable);
  EXPECT_TRUE(s.at("bank.node").trainable);
}
