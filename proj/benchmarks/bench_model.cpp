#include <benchmark/benchmark.h>

#include <random>

#include "msstrn/adaptive_graph.hpp"
#include "msstrn/graph_conv.hpp"
#include "msstrn/model.hpp"
#include "msstrn/ops.hpp"

using namespace msstrn;

namespace {

DenseArray random_array(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseArray a(std::move(shape));
  for (double& v : a.data()) v = normal(rng);
  return a;
}

ModelConfig bench_config(std::size_t nodes) {
  ModelConfig c;
  c.nodes = nodes;
  return c;
}

void BM_ChebyshevStack(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const DenseArray logits = random_array({n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    const Var lhat = ops::softmax_rows(tape.constant(logits));
    benchmark::DoNotOptimize(graph::chebyshev_stack(lhat, 4).back().value().data().data());
  }
}
BENCHMARK(BM_ChebyshevStack)->Arg(8)->Arg(32)->Arg(170);

void BM_Apgcn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const conv::ConvDims dims{9, 2, 17, 16};
  std::mt19937_64 rng(2);
  ParameterStore store;
  conv::declare_node_adaptive(store, "conv", dims, rng);
  const DenseArray x = random_array({3, n, dims.in}, rng);
  const DenseArray emb = random_array({n, dims.embed_dim}, rng);
  const DenseArray logits = random_array({n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    const ParameterBinder bind(tape, store);
    const auto w = conv::bind_node_adaptive(bind, "conv", dims);
    const auto stack = graph::chebyshev_stack(ops::softmax_rows(tape.constant(logits)), dims.depth);
    const Var out = conv::apgcn(tape.constant(x), stack, tape.constant(emb), w);
    benchmark::DoNotOptimize(out.value().data().data());
  }
}
BENCHMARK(BM_Apgcn)->Arg(8)->Arg(32)->Arg(170);

void BM_ModelPredict(benchmark::State& state) {
  const ModelConfig c = bench_config(static_cast<std::size_t>(state.range(0)));
  const Model model(c);
  std::mt19937_64 rng(3);
  const DenseArray x = random_array({8, c.input_steps, c.nodes, c.features}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x).data().data());
}
BENCHMARK(BM_ModelPredict)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const ModelConfig c = bench_config(static_cast<std::size_t>(state.range(0)));
  Model model(c);
  std::mt19937_64 rng(4);
  const DenseArray x = random_array({8, c.input_steps, c.nodes, c.features}, rng);
  const DenseArray y = random_array({8, c.horizon, c.nodes, c.features}, rng);
  for (auto _ : state) {
    Tape tape;
    const Var loss = l1_loss(model.forward(tape, tape.constant(x)), tape.constant(y));
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_ModelForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
