#include "msstrn/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "msstrn/binder.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"

namespace msstrn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Static: return "static";
    case Variant::Only: return "only";
    case Variant::Att: return "att";
    case Variant::Apgcn: return "apgcn";
  }
  return "full";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : {Variant::Full, Variant::Static, Variant::Only, Variant::Att, Variant::Apgcn}) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(text) + "' (expected full, static, only, att or apgcn)");
}

std::vector<LayerKind> parse_stack(std::string_view text) {
  std::vector<LayerKind> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t dash = text.find('-', start);
    const std::string_view token = text.substr(start, dash == std::string_view::npos ? dash : dash - start);
    if (token == "SS") {
      out.push_back(LayerKind::SingleStep);
    } else if (token == "MS") {
      out.push_back(LayerKind::MultiStep);
    } else {
      throw ConfigError("invalid stack token '" + std::string(token) + "' in '" + std::string(text) +
                        "' (expected SS or MS)");
    }
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  return out;
}

std::string format_stack(const std::vector<LayerKind>& stack) {
  std::string out;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (i != 0) out += '-';
    out += stack[i] == LayerKind::SingleStep ? "SS" : "MS";
  }
  return out;
}

void ModelConfig::validate() const {
  if (nodes == 0) throw ConfigError("nodes must be positive");
  if (features != 1) throw ConfigError("only a single input feature is supported, got " + std::to_string(features));
  if (input_steps == 0 || horizon == 0) throw ConfigError("input_steps and horizon must be positive");
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (cheb_depth < 2) throw ConfigError("cheb_depth must be at least 2, got " + std::to_string(cheb_depth));
  if (heads == 0) throw ConfigError("heads must be positive");
  if (hidden_dim % heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (window == 0 || input_steps % window != 0) {
    throw ConfigError("input_steps " + std::to_string(input_steps) + " is not divisible by window " +
                      std::to_string(window));
  }
  if (stack.empty()) throw ConfigError("stack must contain at least one layer");
  const bool has_ms = std::find(stack.begin(), stack.end(), LayerKind::MultiStep) != stack.end();
  if ((variant == Variant::Att || variant == Variant::Apgcn) && !has_ms) {
    throw ConfigError("variant '" + std::string(to_string(variant)) + "' changes MS layers but stack '" +
                      format_stack(stack) + "' has none");
  }
  if (variant == Variant::Static) {
    if (!static_adjacency) throw ConfigError("variant 'static' needs a static_adjacency matrix");
    if (static_adjacency->shape() != Shape{nodes, nodes}) {
      throw ConfigError("static_adjacency must be " + std::to_string(nodes) + "x" + std::to_string(nodes));
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < nodes; ++j) {
        const double v = (*static_adjacency)[i * nodes + j];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("static_adjacency entries must be finite and >= 0");
        row += v;
      }
      if (row <= 0.0) throw ConfigError("static_adjacency row " + std::to_string(i) + " is all zero");
    }
  } else if (static_adjacency) {
    throw ConfigError("static_adjacency is only valid with variant 'static'");
  }
}

Var output_projection(Var h_last, const OutputHead& head, double eps) {
  const Shape& s = h_last.shape();
  if (s.size() != 3 || head.weight.shape().size() != 2 || s[2] != head.weight.shape()[0]) {
    throw ShapeError("output_projection: state " + to_string(s) + " does not fit head " + to_string(head.weight.shape()));
  }
  const std::size_t batch = s[0], nodes = s[1], horizon = head.weight.shape()[1];
  Var y = ops::add_trailing(ops::linear(ops::layer_norm(h_last, head.gain, head.bias, eps), head.weight),
                            head.weight_bias);
  constexpr std::array<std::size_t, 3> horizon_major{0, 2, 1};
  return ops::reshape(ops::permute(y, horizon_major), {batch, horizon, nodes, 1});
}

Var l1_loss(Var pred, Var truth) { return ops::mean(ops::abs(ops::sub(pred, truth))); }

namespace {

constexpr std::string_view kBank = "embedding";

std::string layer_prefix(std::size_t i) { return "layers." + std::to_string(i); }

DenseArray row_normalized(const DenseArray& a) {
  DenseArray out = a;
  const std::size_t n = a.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += a[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] / row;
  }
  return out;
}

graph::BankDims bank_dims(const ModelConfig& c) { return {c.nodes, c.input_steps, c.window, c.embed_dim}; }

void declare_all(const ModelConfig& c, ParameterStore& store, const std::vector<recurrent::GateDims>& layers) {
  std::mt19937_64 rng(c.seed);
  graph::BankOptions bank_options;
  bank_options.time_positions = c.variant != Variant::Only;
  bank_options.norm_trainable = c.norm_trainable;
  graph::declare_embedding_bank(store, kBank, bank_dims(c), bank_options, rng);
  for (std::size_t i = 0; i < layers.size(); ++i) recurrent::declare_gru(store, layer_prefix(i), layers[i], rng);

  store.add("head.norm.gain", DenseArray({c.hidden_dim}, 1.0), ParamRole::Norm, c.norm_trainable);
  store.add("head.norm.bias", DenseArray({c.hidden_dim}, 0.0), ParamRole::Norm, c.norm_trainable);
  const double bound = std::sqrt(6.0 / static_cast<double>(c.hidden_dim + c.horizon));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseArray w({c.hidden_dim, c.horizon});
  for (double& v : w.data()) v = dist(rng);
  store.add("head.weight", std::move(w), ParamRole::Weight);
  store.add("head.bias", DenseArray({c.horizon}), ParamRole::Bias);
}

}  // namespace

recurrent::GateDims Model::layer_dims(std::size_t layer) const {
  recurrent::GateDims dims;
  const LayerKind kind = config_.stack[layer];
  if (kind == LayerKind::SingleStep || config_.variant == Variant::Apgcn) {
    dims.flavor = recurrent::GateFlavor::GraphConv;
  } else if (config_.variant == Variant::Att) {
    dims.flavor = recurrent::GateFlavor::PlainAttention;
  } else {
    dims.flavor = recurrent::GateFlavor::SyncAttention;
  }
  dims.features = layer == 0 ? config_.features : config_.hidden_dim;
  dims.hidden = config_.hidden_dim;
  dims.embed_dim = config_.embed_dim;
  dims.depth = config_.cheb_depth;
  dims.heads = config_.heads;
  return dims;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.static_adjacency) fixed_graph_ = row_normalized(*config_.static_adjacency);
  std::vector<recurrent::GateDims> layers;
  for (std::size_t i = 0; i < config_.stack.size(); ++i) layers.push_back(layer_dims(i));
  declare_all(config_, params_, layers);
}

Model::Model(ModelConfig config, const ParameterStore& values) : Model(std::move(config)) {
  if (values.size() != params_.size()) {
    throw ConfigError("parameter set has " + std::to_string(values.size()) + " entries, model declares " +
                      std::to_string(params_.size()));
  }
  for (const Parameter& p : values.entries()) params_.set_value(p.name, p.value);
}

Var Model::forward(Tape& tape, Var inputs) { return run(ParameterBinder(tape, params_), inputs); }

Var Model::forward(Tape& tape, Var inputs) const { return run(ParameterBinder(tape, params_), inputs); }

DenseArray Model::predict(const DenseArray& inputs) const {
  Tape tape;
  return forward(tape, tape.constant(inputs)).value();
}

Var Model::run(const ParameterBinder& bind, Var inputs) const {
  const ModelConfig& c = config_;
  const Shape& s = inputs.shape();
  if (s.size() != 4 || s[1] != c.input_steps || s[2] != c.nodes || s[3] != c.features) {
    throw ShapeError("model input must be B x " + std::to_string(c.input_steps) + " x " + std::to_string(c.nodes) +
                     " x " + std::to_string(c.features) + ", got " + to_string(s));
  }
  Tape& tape = bind.tape();

  graph::GraphBanks banks;
  try {
    graph::EmbeddingBank bank = graph::bind_embedding_bank(bind, kBank, bank_dims(c));
    std::optional<Var> fixed;
    if (fixed_graph_) fixed = tape.constant(*fixed_graph_);
    banks = graph::build_graph_banks(bank, c.cheb_depth, fixed);
  } catch (const NumericError& e) {
    throw NumericError(std::string("in graph generation: ") + e.what());
  }

  std::vector<Var> seq;
  seq.reserve(c.input_steps);
  for (std::size_t t = 0; t < c.input_steps; ++t) seq.push_back(ops::select(inputs, 1, t));

  for (std::size_t i = 0; i < c.stack.size(); ++i) {
    const std::string prefix = layer_prefix(i);
    try {
      const recurrent::GruGateParams params = recurrent::bind_gru(bind, prefix, layer_dims(i));
      const bool single = c.stack[i] == LayerKind::SingleStep;
      seq = recurrent::run_layer(seq, c.stack[i], single ? 1 : c.window, banks, params);
    } catch (const NumericError& e) {
      throw NumericError("in layer '" + prefix + "' (" + format_stack({c.stack[i]}) + "): " + e.what());
    }
  }

  try {
    OutputHead head{bind("head.norm.gain"), bind("head.norm.bias"), bind("head.weight"), bind("head.bias")};
    return output_projection(seq.back(), head);
  } catch (const NumericError& e) {
    throw NumericError(std::string("in output head: ") + e.what());
  }
}

}  // namespace msstrn
