#include "msstrn/recurrent.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"

namespace msstrn::recurrent {

conv::ConvDims GateDims::conv_dims() const { return {embed_dim, depth, cell_in(), hidden}; }

attention::AttentionDims GateDims::attention_dims() const {
  return {cell_in(), hidden, heads, flavor == GateFlavor::PlainAttention};
}

namespace {

constexpr std::array<std::string_view, 3> kGateNames{"update", "reset", "candidate"};

bool uses_conv(GateFlavor f) { return f != GateFlavor::PlainAttention; }
bool uses_attention(GateFlavor f) { return f != GateFlavor::GraphConv; }

Var apply_transform(const GateTransform& t, Var x, std::span<const Var> stack, Var embedding) {
  if (t.attention) {
    return attention::stsatt(x, stack, embedding, t.conv ? &*t.conv : nullptr, *t.attention);
  }
  const Shape& s = x.shape();
  if (s.size() == 3) return conv::apgcn(x, stack, embedding, *t.conv);
  // Windowed input: every step of the window shares one graph and embedding.
  Var flat = ops::reshape(x, {s[0] * s[1], s[2], s[3]});
  Var out = conv::apgcn(flat, stack, embedding, *t.conv);
  return ops::reshape(out, {s[0], s[1], s[2], t.conv->dims.out});
}

Var gru_update(Var x, Var h_prev, std::span<const Var> stack, Var embedding, const GruGateParams& p) {
  const std::array<Var, 2> xh{x, h_prev};
  Var joined = ops::concat_last(xh);
  Var z = ops::sigmoid(apply_transform(p.update, joined, stack, embedding));
  Var r = ops::sigmoid(apply_transform(p.reset, joined, stack, embedding));
  const std::array<Var, 2> xrh{x, ops::mul(r, h_prev)};
  Var candidate = ops::tanh(apply_transform(p.candidate, ops::concat_last(xrh), stack, embedding));
  Var keep = ops::mul(z, h_prev);
  Var fresh = ops::mul(ops::add_scalar(ops::scale(z, -1.0), 1.0), candidate);
  return ops::add(keep, fresh);
}

void require_widths(const char* cell, Var x, Var h_prev, const GateDims& dims, std::size_t rank) {
  const Shape& sx = x.shape();
  const Shape& sh = h_prev.shape();
  if (sx.size() != rank || sh.size() != rank || sx.back() != dims.features || sh.back() != dims.hidden ||
      !std::equal(sx.begin(), sx.end() - 1, sh.begin())) {
    throw ShapeError(std::string(cell) + ": input " + to_string(sx) + " and state " + to_string(sh) +
                     " do not match widths " + std::to_string(dims.features) + "/" + std::to_string(dims.hidden));
  }
}

}  // namespace

std::size_t parameter_count(const GateDims& dims) {
  std::size_t per_gate = 0;
  if (uses_conv(dims.flavor)) per_gate += conv::parameter_count(dims.conv_dims());
  if (uses_attention(dims.flavor)) per_gate += attention::parameter_count(dims.attention_dims());
  return 3 * per_gate;
}

void declare_gru(ParameterStore& store, std::string_view prefix, const GateDims& dims, std::mt19937_64& rng) {
  if (dims.features == 0 || dims.hidden == 0) throw ConfigError("GRU widths must be positive");
  for (std::string_view gate : kGateNames) {
    const std::string base = join_name(prefix, gate);
    if (uses_conv(dims.flavor)) conv::declare_node_adaptive(store, join_name(base, "conv"), dims.conv_dims(), rng);
    if (uses_attention(dims.flavor)) {
      attention::declare_attention(store, join_name(base, "attention"), dims.attention_dims(), rng);
    }
  }
}

GruGateParams bind_gru(const ParameterBinder& bind, std::string_view prefix, const GateDims& dims) {
  GruGateParams p;
  p.dims = dims;
  std::array<GateTransform*, 3> slots{&p.update, &p.reset, &p.candidate};
  for (std::size_t g = 0; g < 3; ++g) {
    const std::string base = join_name(prefix, kGateNames[g]);
    if (uses_conv(dims.flavor)) slots[g]->conv = conv::bind_node_adaptive(bind, join_name(base, "conv"), dims.conv_dims());
    if (uses_attention(dims.flavor)) {
      slots[g]->attention = attention::bind_attention(bind, join_name(base, "attention"), dims.attention_dims());
    }
  }
  return p;
}

Var ss_gru_cell(Var x, Var h_prev, std::span<const Var> stack, Var embedding, const GruGateParams& params) {
  require_widths("ss_gru_cell", x, h_prev, params.dims, 3);
  return gru_update(x, h_prev, stack, embedding, params);
}

Var ms_gru_cell(Var x_win, Var h_prev, std::span<const Var> stack, Var embedding, const GruGateParams& params) {
  require_widths("ms_gru_cell", x_win, h_prev, params.dims, 4);
  return gru_update(x_win, h_prev, stack, embedding, params);
}

std::vector<Var> run_layer(std::span<const Var> seq, LayerKind kind, std::size_t stride,
                           const graph::GraphBanks& banks, const GruGateParams& params) {
  if (seq.empty()) throw ShapeError("run_layer: empty sequence");
  const Shape& step_shape = seq[0].shape();
  if (step_shape.size() != 3) throw ShapeError("run_layer: steps must be B x N x F, got " + to_string(step_shape));
  const std::size_t batch = step_shape[0], nodes = step_shape[1];
  Tape& tape = seq[0].tape();
  std::vector<Var> out;
  out.reserve(seq.size());

  if (kind == LayerKind::SingleStep) {
    if (stride != 1) throw ConfigError("single-step layers use stride 1, got " + std::to_string(stride));
    if (banks.single_step.positions() != seq.size()) {
      throw ShapeError("run_layer: " + std::to_string(seq.size()) + " steps but " +
                       std::to_string(banks.single_step.positions()) + " step graphs");
    }
    Var h = tape.constant(DenseArray({batch, nodes, params.dims.hidden}));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      h = ss_gru_cell(seq[i], h, banks.single_step.at(i), banks.step_embeddings[i], params);
      out.push_back(h);
    }
    return out;
  }

  if (stride == 0 || seq.size() % stride != 0) {
    throw ConfigError("sequence length " + std::to_string(seq.size()) + " is not divisible by window size " +
                      std::to_string(stride));
  }
  const std::size_t windows = seq.size() / stride;
  if (banks.multi_step.positions() != windows) {
    throw ShapeError("run_layer: " + std::to_string(windows) + " windows but " +
                     std::to_string(banks.multi_step.positions()) + " window graphs");
  }
  Var h = tape.constant(DenseArray({batch, stride, nodes, params.dims.hidden}));
  for (std::size_t j = 0; j < windows; ++j) {
    Var x_win = ops::stack(seq.subspan(j * stride, stride), 1);
    h = ms_gru_cell(x_win, h, banks.multi_step.at(j), banks.window_embeddings[j], params);
    for (std::size_t t = 0; t < stride; ++t) out.push_back(ops::select(h, 1, t));
  }
  return out;
}

}  // namespace msstrn::recurrent
