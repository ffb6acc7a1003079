#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "msstrn/adaptive_graph.hpp"
#include "msstrn/attention.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/grad_check.hpp"
#include "msstrn/ops.hpp"
#include "oracles.hpp"

using namespace msstrn;
using namespace msstrn::attention;

namespace {

struct Instance {
  AttentionDims att;
  conv::ConvDims gc;
  std::size_t batch, steps, nodes;
  ParameterStore store;
};

Instance make_instance(std::size_t batch, std::size_t steps, std::size_t nodes, std::size_t in, std::size_t out,
                       std::size_t heads, std::uint64_t seed, std::size_t embed = 2, std::size_t depth = 2) {
  Instance inst{{in, out, heads, false}, {embed, depth, in, out}, batch, steps, nodes, {}};
  std::mt19937_64 rng(seed);
  declare_attention(inst.store, "att", inst.att, rng);
  conv::declare_node_adaptive(inst.store, "gc", inst.gc, rng);
  fixture::randomize(inst.store, rng, 0.9);
  inst.store.add("x", fixture::random_array({batch, steps, nodes, in}, rng), ParamRole::Weight);
  inst.store.add("emb", fixture::random_array({nodes, embed}, rng), ParamRole::Weight);
  DenseArray g = fixture::random_array({nodes, nodes}, rng, 0.0, 1.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) row += g[i * nodes + j];
    for (std::size_t j = 0; j < nodes; ++j) g[i * nodes + j] /= row;
  }
  inst.store.add("graph", g, ParamRole::Weight);
  return inst;
}

Var run(Tape& t, ParameterStore& s, const Instance& inst) {
  ParameterBinder bind(t, s);
  const auto terms = graph::chebyshev_stack(bind("graph"), inst.gc.depth);
  const conv::NodeAdaptiveWeights w = conv::bind_node_adaptive(bind, "gc", inst.gc);
  return stsatt(bind("x"), terms, bind("emb"), &w, bind_attention(bind, "att", inst.att));
}

DenseArray oracle_stsatt(const Instance& inst) {
  const ParameterStore& s = inst.store;
  const DenseArray values =
      oracle::window_apgcn(s.at("x").value, oracle::chebyshev_explicit(oracle::to_matrix(s.at("graph").value), inst.gc.depth),
                           oracle::to_matrix(s.at("emb").value), s.at("gc.weight").value, s.at("gc.bias").value);
  return oracle::attention_mix(s.at("x").value, values, s.at("att.query").value, s.at("att.key").value,
                               s.at("att.output").value, inst.att.heads);
}

}  // namespace

TEST(TemporalAttention, ZeroQueryKeyAveragesValues) {
  std::mt19937_64 rng(1);
  const DenseArray v = fixture::random_array({2, 3, 2}, rng);
  Tape t;
  const DenseArray out = temporal_attention(t.constant(DenseArray({2, 3, 2})), t.constant(DenseArray({2, 3, 2})),
                                            t.constant(v))
                             .value();
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      const double mean = (v[(r * 3 + 0) * 2 + c] + v[(r * 3 + 1) * 2 + c] + v[(r * 3 + 2) * 2 + c]) / 3.0;
      for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(out[(r * 3 + s) * 2 + c], mean, 1e-15);
    }
}

TEST(TemporalAttention, SingleKeyReturnsValue) {
  std::mt19937_64 rng(2);
  Tape t;
  const DenseArray v = fixture::random_array({3, 1, 2}, rng);
  const DenseArray out = temporal_attention(t.constant(fixture::random_array({3, 1, 2}, rng)),
                                            t.constant(fixture::random_array({3, 1, 2}, rng)), t.constant(v))
                             .value();
  EXPECT_EQ(out, v);
}

TEST(TemporalAttention, MatchesLoopOracle) {
  std::mt19937_64 rng(3);
  const DenseArray q = fixture::random_array({1, 3, 2}, rng, -2, 2);
  const DenseArray k = fixture::random_array({1, 3, 2}, rng, -2, 2);
  const DenseArray v = fixture::random_array({1, 3, 2}, rng, -2, 2);
  Tape t;
  const DenseArray got = temporal_attention(t.constant(q), t.constant(k), t.constant(v)).value();
  EXPECT_LT(max_abs_difference(got, oracle::temporal_attention(q, k, v)), 1e-10);
}

TEST(TemporalAttention, ScoreRowsSumToOne) {
  // With v = ones the output equals the row sums of the score matrix.
  std::mt19937_64 rng(4);
  Tape t;
  const DenseArray out = temporal_attention(t.constant(fixture::random_array({4, 3, 2}, rng, -50, 50)),
                                            t.constant(fixture::random_array({4, 3, 2}, rng, -50, 50)),
                                            t.constant(DenseArray({4, 3, 2}, 1.0)))
                             .value();
  for (double v : out.data()) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Stsatt, ZeroGraphConvGivesZeroOutput) {
  Instance inst = make_instance(1, 2, 3, 2, 2, 1, 5);
  inst.store.at("gc.weight").value.fill(0.0);
  inst.store.at("gc.bias").value.fill(0.0);
  Tape t;
  for (double v : run(t, inst.store, inst).value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Stsatt, SingleHeadReduction) {
  Instance inst = make_instance(1, 3, 2, 2, 2, 1, 6);
  inst.store.set_value("att.output", DenseArray::identity(2));
  Tape t;
  const DenseArray got = run(t, inst.store, inst).value();

  ParameterBinder bind(t, inst.store);
  const auto terms = graph::chebyshev_stack(bind("graph"), 2);
  Var x = bind("x");
  Var values = conv::apgcn(ops::reshape(x, {3, 2, 2}), terms, bind("emb"), conv::bind_node_adaptive(bind, "gc", inst.gc));
  const std::array<std::size_t, 4> node_major{0, 2, 1, 3};
  auto rows = [&](Var a) { return ops::reshape(ops::permute(ops::reshape(a, {1, 3, 2, 2}), node_major), {2, 3, 2}); };
  Var q = rows(ops::linear(x, bind("att.query")));
  Var k = rows(ops::linear(x, bind("att.key")));
  Var head = temporal_attention(q, k, rows(values));
  const DenseArray want = ops::permute(ops::reshape(head, {1, 2, 3, 2}), node_major).value();
  EXPECT_LT(max_abs_difference(got, want), 1e-14);
}

TEST(Stsatt, MatchesCompositionOracle) {
  Instance inst = make_instance(1, 2, 2, 2, 2, 1, 7);
  Tape t;
  EXPECT_LT(max_abs_difference(run(t, inst.store, inst).value(), oracle_stsatt(inst)), 1e-9);
}

TEST(Stsatt, MultiHeadBatchedMatchesOracle) {
  Instance inst = make_instance(2, 3, 3, 3, 4, 2, 8, 3, 3);
  Tape t;
  EXPECT_LT(max_abs_difference(run(t, inst.store, inst).value(), oracle_stsatt(inst)), 1e-9);
}

TEST(Stsatt, IdentityGraphConvGivesPlainAttention) {
  // With the identity graph-conv configuration V == x, so stsatt reduces to
  // multi-head temporal self-attention with values x.
  Instance inst = make_instance(1, 3, 2, 2, 2, 2, 9, 1, 2);
  DenseArray w({1, 2, 2, 2});
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 2; ++i) w[(k * 2 + i) * 2 + i] = 0.5;
  inst.store.set_value("gc.weight", w);
  inst.store.at("gc.bias").value.fill(0.0);
  inst.store.set_value("emb", DenseArray({2, 1}, 1.0));
  inst.store.set_value("graph", DenseArray::identity(2));
  Tape t;
  const DenseArray got = run(t, inst.store, inst).value();
  const ParameterStore& s = inst.store;
  const DenseArray want = oracle::attention_mix(s.at("x").value, s.at("x").value, s.at("att.query").value,
                                                s.at("att.key").value, s.at("att.output").value, 2);
  EXPECT_LT(max_abs_difference(got, want), 1e-10);
}

TEST(Stsatt, PlainValueProjectionVariant) {
  AttentionDims dims{2, 2, 1, true};
  ParameterStore s;
  std::mt19937_64 rng(10);
  declare_attention(s, "att", dims, rng);
  const DenseArray x = fixture::random_array({1, 2, 3, 2}, rng);
  Tape t;
  ParameterBinder bind(t, s);
  const DenseArray got = stsatt(t.constant(x), {}, t.constant(DenseArray({3, 1})), nullptr,
                                bind_attention(bind, "att", dims))
                             .value();
  DenseArray values({1, 2, 3, 2});
  const DenseArray& wv = s.at("att.value").value;
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 2; ++i) values[r * 2 + c] += x[r * 2 + i] * wv[i * 2 + c];
  const DenseArray want =
      oracle::attention_mix(x, values, s.at("att.query").value, s.at("att.key").value, s.at("att.output").value, 1);
  EXPECT_LT(max_abs_difference(got, want), 1e-12);
}

TEST(Stsatt, GradientCheck) {
  Instance inst = make_instance(2, 2, 3, 2, 4, 2, 11);
  ScalarProgram f = [&](Tape& t, ParameterStore& s) {
    Var out = run(t, s, inst);
    std::mt19937_64 rng(110);
    return ops::sum(ops::mul(out, t.constant(fixture::random_array(out.shape(), rng))));
  };
  const GradCheckReport r = grad_check(f, inst.store);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst()->name;
}

TEST(AttentionDims, Validation) {
  EXPECT_THROW((AttentionDims{3, 6, 4, false}.validate()), ConfigError);
  EXPECT_THROW((AttentionDims{3, 6, 0, false}.validate()), ConfigError);
  EXPECT_NO_THROW((AttentionDims{3, 6, 3, false}.validate()));
  EXPECT_EQ(parameter_count({3, 4, 2, false}), 2U * 12 + 16);
  EXPECT_EQ(parameter_count({3, 4, 2, true}), 3U * 12 + 16);
}
