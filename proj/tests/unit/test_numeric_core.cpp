#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/grad_check.hpp"
#include "msstrn/ops.hpp"
#include "msstrn/tape.hpp"
#include "oracles.hpp"

using namespace msstrn;
namespace o = msstrn::ops;

namespace {

// Contracts an op output against fixed random weights so the check sees
// every output entry.
Var weighted_sum(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return o::sum(o::mul(out, out.tape().constant(fixture::random_array(out.shape(), rng))));
}

double rel_error_for(const std::function<Var(Tape&, ParameterStore&)>& op, ParameterStore& store) {
  ScalarProgram program = [&](Tape& t, ParameterStore& s) { return weighted_sum(op(t, s), 99); };
  return grad_check(program, store, 1e-5).max_rel_error;
}

}  // namespace

TEST(DenseArray, RejectsZeroDimsAndSizeMismatch) {
  EXPECT_THROW(DenseArray(Shape{2, 0}), ShapeError);
  EXPECT_THROW(DenseArray(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  DenseArray a({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(a.at({1, 2}), 6.0);
  EXPECT_THROW(a.at({2, 0}), ShapeError);
  EXPECT_EQ(a.reshaped({3, 2}).at({2, 1}), 6.0);
  EXPECT_THROW(a.reshaped({4, 2}), ShapeError);
}

TEST(Softmax, SpecExamples) {
  Tape t;
  Var a = o::softmax_rows(t.constant(DenseArray({2, 2})));
  for (double v : a.value().data()) EXPECT_EQ(v, 0.5);
  Var b = o::softmax_rows(t.constant(DenseArray({1, 2}, std::vector<double>{0.0, std::log(3.0)})));
  EXPECT_NEAR(b.value()[0], 0.25, 1e-15);
  EXPECT_NEAR(b.value()[1], 0.75, 1e-15);
}

TEST(Softmax, MatchesDirectExpOracle) {
  std::mt19937_64 rng(3);
  Tape t;
  const DenseArray m = fixture::random_array({3, 3}, rng, -3, 3);
  const DenseArray got = o::softmax_rows(t.constant(m)).value();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto want = oracle::softmax(fixture::column(m, i * 3, 3));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[i * 3 + j], want[j], 1e-10);
  }
}

TEST(Softmax, RowsSumToOneAtLargeMagnitudes) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const DenseArray m = fixture::random_array({4, 7}, rng, -1e4, 1e4);
    const DenseArray s = o::softmax_rows(t.constant(m)).value();
    for (std::size_t i = 0; i < 4; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(s[i * 7 + j], 0.0);
        row += s[i * 7 + j];
      }
      EXPECT_NEAR(row, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, NonFiniteInputIsNumericError) {
  Tape t;
  DenseArray m({1, 2});
  m[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ops::softmax_rows(t.constant(m)), NumericError);
}

TEST(LayerNorm, SpecExamples) {
  Tape t;
  Var ones = t.constant(DenseArray({3}, 1.0));
  Var zeros = t.constant(DenseArray({3}));
  Var c = o::layer_norm(t.constant(DenseArray({3}, 5.0)), ones, zeros);
  for (double v : c.value().data()) EXPECT_EQ(v, 0.0);

  Var g2 = t.constant(DenseArray({2}, 1.0));
  Var b2 = t.constant(DenseArray({2}));
  Var two = o::layer_norm(t.constant(DenseArray({2}, std::vector<double>{1, 3})), g2, b2, 1e-300);
  EXPECT_NEAR(two.value()[0], -1.0, 1e-12);
  EXPECT_NEAR(two.value()[1], 1.0, 1e-12);

  const std::vector<double> v{1, 2, 3};
  Var three = o::layer_norm(t.constant(DenseArray({3}, v)), ones, zeros, 1e-5);
  const auto want = oracle::layer_norm(v, {1, 1, 1}, {0, 0, 0}, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(three.value()[i], want[i], 1e-10);
}

TEST(Activations, RangeAndFixedPoints) {
  Tape t;
  EXPECT_EQ(o::sigmoid(t.constant(DenseArray::scalar(0.0))).value().item(), 0.5);
  EXPECT_EQ(o::tanh(t.constant(DenseArray::scalar(0.0))).value().item(), 0.0);
  std::mt19937_64 rng(5);
  const DenseArray x = fixture::random_array({200}, rng, -30, 30);
  const DenseArray s = o::sigmoid(t.constant(x)).value();
  const DenseArray h = o::tanh(t.constant(x)).value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GE(s[i], 0.0);
    EXPECT_LE(s[i], 1.0);
    EXPECT_GE(h[i], -1.0);
    EXPECT_LE(h[i], 1.0);
  }
  const DenseArray mid = o::sigmoid(t.constant(DenseArray({1}, std::vector<double>{3.0}))).value();
  EXPECT_GT(mid[0], 0.0);
  EXPECT_LT(mid[0], 1.0);
}

TEST(Matmul, IdentityIsExact) {
  std::mt19937_64 rng(6);
  Tape t;
  DenseArray a({3, 4});
  for (double& v : a.data()) v = static_cast<double>(static_cast<int>(rng() % 17) - 8) / 4.0;
  EXPECT_EQ(o::matmul(t.constant(DenseArray::identity(3)), t.constant(a)).value(), a);
  EXPECT_EQ(o::matmul(t.constant(a), t.constant(DenseArray::identity(4))).value(), a);
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape t;
  Var a = t.constant(DenseArray({2, 3}));
  Var b = t.constant(DenseArray({3, 2}));
  EXPECT_THROW(o::add(a, b), ShapeError);
  EXPECT_THROW(o::matmul(a, a), ShapeError);
  EXPECT_THROW(o::reshape(a, {4}), ShapeError);
  EXPECT_THROW(o::slice_last(a, 2, 2), ShapeError);
}

TEST(GradCheck, QuadraticExample) {
  ParameterStore store;
  store.add("x", DenseArray::scalar(3.0), ParamRole::Weight);
  ScalarProgram f = [](Tape& t, ParameterStore& s) {
    Var x = t.parameter(s, "x");
    return o::mul(x, x);
  };
  const GradCheckReport r = grad_check(f, store, 1e-5);
  EXPECT_NEAR(store.at("x").grad[0], 6.0, 1e-12);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, LinearLayerWithL1Loss) {
  std::mt19937_64 rng(7);
  ParameterStore store;
  store.add("w", fixture::random_array({4, 3}, rng), ParamRole::Weight);
  const DenseArray x = fixture::random_array({5, 4}, rng);
  Tape probe;
  DenseArray truth = o::matmul(probe.constant(x), probe.constant(store.at("w").value)).value();
  for (double& v : truth.data()) v += (rng() & 1U) ? 0.7 : -0.7;
  ScalarProgram f = [&](Tape& t, ParameterStore& s) {
    Var pred = o::matmul(t.constant(x), t.parameter(s, "w"));
    return o::mean(o::abs(o::sub(pred, t.constant(truth))));
  };
  EXPECT_LT(grad_check(f, store).max_rel_error, 1e-4);
}

TEST(GradCheck, UnusedParameterGradientIsExactlyZero) {
  ParameterStore store;
  store.add("used", DenseArray({2}, 1.5), ParamRole::Weight);
  store.add("unused", DenseArray({3}, 2.0), ParamRole::Weight);
  ScalarProgram f = [](Tape& t, ParameterStore& s) {
    Var u = t.parameter(s, "used");
    return o::sum(o::mul(u, u));
  };
  grad_check(f, store);
  for (double g : store.at("unused").grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, NonFiniteProgramThrows) {
  ParameterStore store;
  store.add("x", DenseArray::scalar(1e10), ParamRole::Weight);
  ScalarProgram f = [](Tape& t, ParameterStore& s) { return o::scale(t.parameter(s, "x"), 1e300); };
  EXPECT_THROW(grad_check(f, store), NumericError);
}

TEST(Tape, BackwardVisitsEachNodeOnce) {
  ParameterStore store;
  store.add("x", DenseArray::scalar(2.0), ParamRole::Weight);
  Tape t;
  Var x = t.parameter(store, "x");
  Var y = o::mul(x, x);       // shared parent used twice
  Var z = o::add(y, o::scale(y, 3.0));
  const std::size_t ran = t.backward(z);
  EXPECT_EQ(ran, 3U);  // mul, scale, add
  EXPECT_DOUBLE_EQ(store.at("x").grad[0], 16.0);
}

TEST(Tape, FrozenParameterIsConstant) {
  ParameterStore store;
  store.add("x", DenseArray::scalar(2.0), ParamRole::Norm, /*trainable=*/false);
  Tape t;
  Var x = t.parameter(store, "x");
  EXPECT_FALSE(x.requires_grad());
}

// Property: every primitive matches central differences over random shapes.
class PrimitiveGrad : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(GetParam()));
  auto dim = [&] { return static_cast<std::size_t>(1 + rng() % 3); };
  const std::size_t a = dim(), b = dim(), c = dim(), k = dim();

  ParameterStore s;
  s.add("x", fixture::random_array({a, b, c}, rng), ParamRole::Weight);
  s.add("y", fixture::random_array({a, b, c}, rng), ParamRole::Weight);
  s.add("m", fixture::random_array({c, k}, rng), ParamRole::Weight);
  s.add("g", fixture::random_array({b, b}, rng), ParamRole::Weight);
  s.add("theta", fixture::random_array({b, c, k}, rng), ParamRole::Weight);
  s.add("bm", fixture::random_array({a, c, k}, rng), ParamRole::Weight);
  s.add("gain", fixture::random_array({c}, rng, 0.5, 1.5), ParamRole::Norm);
  s.add("bias", fixture::random_array({c}, rng), ParamRole::Bias);
  s.add("row", fixture::random_array({c}, rng), ParamRole::Bias);
  DenseArray away = fixture::random_array({a, b, c}, rng, 0.2, 1.0);
  for (double& v : away.data()) v = (rng() & 1U) ? v : -v;
  s.add("away", away, ParamRole::Weight);

  using Op = std::function<Var(Tape&, ParameterStore&)>;
  auto P = [](Tape& t, ParameterStore& st, const char* n) { return t.parameter(st, n); };
  const std::vector<std::pair<const char*, Op>> cases{
      {"add", [&](Tape& t, ParameterStore& st) { return o::add(P(t, st, "x"), P(t, st, "y")); }},
      {"sub", [&](Tape& t, ParameterStore& st) { return o::sub(P(t, st, "x"), P(t, st, "y")); }},
      {"mul", [&](Tape& t, ParameterStore& st) { return o::mul(P(t, st, "x"), P(t, st, "y")); }},
      {"scale", [&](Tape& t, ParameterStore& st) { return o::scale(P(t, st, "x"), -1.7); }},
      {"add_scalar", [&](Tape& t, ParameterStore& st) { return o::add_scalar(P(t, st, "x"), 0.3); }},
      {"sigmoid", [&](Tape& t, ParameterStore& st) { return o::sigmoid(P(t, st, "x")); }},
      {"tanh", [&](Tape& t, ParameterStore& st) { return o::tanh(P(t, st, "x")); }},
      {"abs", [&](Tape& t, ParameterStore& st) { return o::abs(P(t, st, "away")); }},
      {"linear", [&](Tape& t, ParameterStore& st) { return o::linear(P(t, st, "x"), P(t, st, "m")); }},
      {"matmul",
       [&](Tape& t, ParameterStore& st) { return o::matmul(o::reshape(P(t, st, "x"), {a * b, c}), P(t, st, "m")); }},
      {"batched_matmul",
       [&](Tape& t, ParameterStore& st) { return o::batched_matmul(o::reshape(P(t, st, "x"), {a, b, c}), P(t, st, "bm")); }},
      {"graph_mix",
       [&](Tape& t, ParameterStore& st) { return o::graph_mix(P(t, st, "g"), P(t, st, "x")); }},
      {"node_matmul",
       [&](Tape& t, ParameterStore& st) { return o::node_matmul(P(t, st, "x"), P(t, st, "theta")); }},
      {"transpose_last", [&](Tape& t, ParameterStore& st) { return o::transpose_last(P(t, st, "x")); }},
      {"permute",
       [&](Tape& t, ParameterStore& st) {
         const std::array<std::size_t, 3> axes{2, 0, 1};
         return o::permute(P(t, st, "x"), axes);
       }},
      {"concat_last",
       [&](Tape& t, ParameterStore& st) {
         const std::array<Var, 2> parts{P(t, st, "x"), P(t, st, "y")};
         return o::concat_last(parts);
       }},
      {"slice_last", [&](Tape& t, ParameterStore& st) { return o::slice_last(P(t, st, "x"), c - 1, 1); }},
      {"stack",
       [&](Tape& t, ParameterStore& st) {
         const std::array<Var, 2> parts{P(t, st, "x"), P(t, st, "y")};
         return o::stack(parts, 1);
       }},
      {"select", [&](Tape& t, ParameterStore& st) { return o::select(P(t, st, "x"), 1, b - 1); }},
      {"add_trailing", [&](Tape& t, ParameterStore& st) { return o::add_trailing(P(t, st, "x"), P(t, st, "row")); }},
      {"softmax_rows", [&](Tape& t, ParameterStore& st) { return o::softmax_rows(P(t, st, "x")); }},
      {"layer_norm",
       [&](Tape& t, ParameterStore& st) {
         return o::layer_norm(P(t, st, "x"), P(t, st, "gain"), P(t, st, "bias"));
       }},
      {"mean", [&](Tape& t, ParameterStore& st) { return o::mean(P(t, st, "x")); }},
  };
  for (const auto& [name, op] : cases) {
    // layer_norm over a single entry has a zero gradient everywhere
    if (std::string_view(name) == "layer_norm" && c == 1) continue;
    EXPECT_LT(rel_error_for(op, s), 1e-4) << name << " on " << a << "x" << b << "x" << c << "x" << k;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, PrimitiveGrad, ::testing::Range(0, 12));
