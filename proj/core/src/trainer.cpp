#include "msstrn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json_config.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/ops.hpp"
#include "msstrn/tape.hpp"

namespace msstrn::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(weight_decay >= 0.0 && weight_decay <= 0.001)) throw ConfigError("weight_decay must lie in [0, 0.001]");
  if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip)) throw ConfigError("grad_clip must be >= 0");
  if (device != "cpu") throw ConfigError("device must be 'cpu'");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::EarlyStop ? "early-stop" : "max-epochs";
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(double metric) {
  ++epoch_;
  if (best_epoch_ == 0 || metric < best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

Adam::Adam(AdamOptions options) : opt_(options) {}

void Adam::step(ParameterStore& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.size(), 0.0);
      v_[i].assign(params[i].value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("optimizer bound to a different parameter set");
  ++t_;
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(opt_.beta1, t);
  const double c2 = 1.0 - std::pow(opt_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    const bool decay = opt_.weight_decay > 0.0 && p.role != ParamRole::Bias && p.role != ParamRole::Norm;
    auto w = p.value.data();
    auto g = p.grad.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      if (decay) w[k] -= opt_.learning_rate * opt_.weight_decay * w[k];
      w[k] -= opt_.learning_rate * mhat / (std::sqrt(vhat) + opt_.eps);
    }
  }
}

double clip_grad_norm(ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter& p : params.entries()) {
    if (!p.trainable) continue;
    for (double g : p.grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter& p : params.entries()) {
      if (!p.trainable) continue;
      for (double& g : p.grad.data()) g *= scale;
    }
  }
  return norm;
}

namespace {

DenseArray normalized(const DenseArray& a, const data::ZScore& stats) { return stats.normalize(a); }

}  // namespace

TrainResult train(const ModelConfig& model_config, const data::DataSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.size() == 0) throw ShapeError("training set is empty");
  if (split.val.size() == 0) throw ShapeError("validation set is empty");

  Model model(model_config);
  ParameterStore& params = model.parameters();
  Adam adam({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  EarlyStopping stopper(config.patience);
  std::mt19937_64 rng(config.seed);

  const std::size_t n = split.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  std::vector<DenseArray> best_values;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      params.zero_grad();
      double loss_value = 0.0;
      try {
        Tape tape;
        Var x = tape.constant(split.train.input_batch(idx));
        Var y = tape.constant(normalized(split.train.target_batch(idx), split.train.stats));
        Var loss = l1_loss(model.forward(tape, x), y);
        loss_value = loss.value().item();
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batches + 1) + ": " +
                           e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batches + 1) +
                           ": non-finite loss");
      }
      if (config.grad_clip > 0.0) clip_grad_norm(params, config.grad_clip);
      adam.step(params);
      loss_sum += loss_value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val = evaluate(model, split.val).overall;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);
    if (stopper.update(rec.val.mae)) {
      best_values.clear();
      for (const Parameter& p : params.entries()) best_values.push_back(p.value);
    }
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      history.stop = StopReason::EarlyStop;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch();
  history.best_val_mae = stopper.best();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best_values[i];
  params.zero_grad();
  return {std::move(model), std::move(history)};
}

Forecaster model_forecaster(const Model& model) {
  return [&model](const DenseArray& inputs) { return model.predict(inputs); };
}

Forecaster last_value_forecaster(std::size_t horizon) {
  return [horizon](const DenseArray& inputs) {
    const Shape& s = inputs.shape();
    if (s.size() != 4) throw ShapeError("last-value forecaster expects B x T x N x C inputs");
    const std::size_t b = s[0], t = s[1], nodes = s[2], c = s[3];
    DenseArray out({b, horizon, nodes, 1});
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t k = 0; k < nodes; ++k) {
          out[(i * horizon + h) * nodes + k] = inputs[((i * t + (t - 1)) * nodes + k) * c];
        }
      }
    }
    return out;
  };
}

namespace {

struct Collected {
  std::vector<double> pred;   // original units, sample-major M x T' x N
  std::vector<double> truth;
};

Collected collect(const Forecaster& forecaster, const data::SampleSet& samples, std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  Collected c;
  const std::size_t m = samples.size();
  const Shape expect_tail{samples.horizon, samples.nodes, 1};
  for (std::size_t begin = 0; begin < m; begin += batch_size) {
    const std::size_t end = std::min(m, begin + batch_size);
    DenseArray pred = forecaster(samples.input_batch(begin, end));
    const Shape& s = pred.shape();
    if (s.size() != 4 || s[0] != end - begin || Shape(s.begin() + 1, s.end()) != expect_tail) {
      throw ShapeError("forecaster returned " + msstrn::to_string(s) + " for a batch of " + std::to_string(end - begin));
    }
    DenseArray truth = samples.target_batch(begin, end);
    for (double v : pred.data()) c.pred.push_back(samples.stats.denormalize(v));
    c.truth.insert(c.truth.end(), truth.data().begin(), truth.data().end());
  }
  return c;
}

}  // namespace

Evaluation evaluate(const Forecaster& forecaster, const data::SampleSet& samples, std::size_t batch_size) {
  if (samples.size() == 0) throw ShapeError("cannot evaluate an empty sample set");
  const Collected c = collect(forecaster, samples, batch_size);
  Evaluation ev;
  ev.overall = data::compute_metrics(c.pred, c.truth);
  const std::size_t per_sample = samples.horizon * samples.nodes;
  for (std::size_t h = 0; h < samples.horizon; ++h) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::size_t base = i * per_sample + h * samples.nodes;
      p.insert(p.end(), c.pred.begin() + static_cast<std::ptrdiff_t>(base),
               c.pred.begin() + static_cast<std::ptrdiff_t>(base + samples.nodes));
      t.insert(t.end(), c.truth.begin() + static_cast<std::ptrdiff_t>(base),
               c.truth.begin() + static_cast<std::ptrdiff_t>(base + samples.nodes));
    }
    ev.per_step.push_back(data::compute_metrics(p, t));
  }
  return ev;
}

Evaluation evaluate(const Model& model, const data::SampleSet& samples, std::size_t batch_size) {
  const ModelConfig& cfg = model.config();
  if (samples.nodes != cfg.nodes || samples.input_steps != cfg.input_steps || samples.horizon != cfg.horizon) {
    throw ShapeError("model expects N=" + std::to_string(cfg.nodes) + " T=" + std::to_string(cfg.input_steps) +
                     " T'=" + std::to_string(cfg.horizon) + ", data has N=" + std::to_string(samples.nodes) +
                     " T=" + std::to_string(samples.input_steps) + " T'=" + std::to_string(samples.horizon));
  }
  return evaluate(model_forecaster(model), samples, batch_size);
}

void export_predictions(const std::filesystem::path& path, const Forecaster& forecaster,
                        const data::SampleSet& samples, const std::vector<std::string>& node_ids) {
  if (!node_ids.empty() && node_ids.size() != samples.nodes) {
    throw ShapeError("node_ids has " + std::to_string(node_ids.size()) + " entries for " +
                     std::to_string(samples.nodes) + " nodes");
  }
  const Collected c = collect(forecaster, samples, 32);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions '" + path.string() + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "sample_index,horizon_step,node_id,truth,prediction\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t h = 0; h < samples.horizon; ++h) {
      for (std::size_t node = 0; node < samples.nodes; ++node, ++k) {
        out << i << ',' << h + 1 << ',' << (node_ids.empty() ? std::to_string(node) : node_ids[node]) << ','
            << c.truth[k] << ',' << c.pred[k] << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing predictions '" + path.string() + "'");
}

namespace {

using detail::Json;

TrainConfig train_config_from_json(const Json& obj) {
  constexpr std::string_view where = "train config";
  detail::reject_unknown_keys(obj, where, {"learning_rate", "batch_size", "max_epochs", "patience", "weight_decay",
                                           "grad_clip", "seed", "device"});
  TrainConfig c;
  detail::read_if_present(obj, "learning_rate", c.learning_rate, where);
  c.batch_size = detail::read_size(obj, "batch_size", c.batch_size, where);
  c.max_epochs = detail::read_size(obj, "max_epochs", c.max_epochs, where);
  c.patience = detail::read_size(obj, "patience", c.patience, where);
  detail::read_if_present(obj, "weight_decay", c.weight_decay, where);
  detail::read_if_present(obj, "grad_clip", c.grad_clip, where);
  c.seed = detail::read_size(obj, "seed", c.seed, where);
  detail::read_if_present(obj, "device", c.device, where);
  return c;
}

data::SynthOptions synth_from_json(const Json& obj) {
  constexpr std::string_view where = "synth config";
  detail::reject_unknown_keys(obj, where, {"nodes", "length", "coupling", "noise_std", "seed"});
  data::SynthOptions s;
  s.nodes = detail::read_size(obj, "nodes", s.nodes, where);
  s.length = detail::read_size(obj, "length", s.length, where);
  detail::read_if_present(obj, "coupling", s.coupling, where);
  detail::read_if_present(obj, "noise_std", s.noise_std, where);
  s.seed = detail::read_size(obj, "seed", s.seed, where);
  return s;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  const Json doc = detail::parse_json(json_text, "run config");
  detail::reject_unknown_keys(doc, "run config", {"model", "train", "synth"});
  RunConfig rc;
  if (auto it = doc.find("model"); it != doc.end()) rc.model = detail::model_config_from_json(*it);
  if (auto it = doc.find("train"); it != doc.end()) rc.train = train_config_from_json(*it);
  if (auto it = doc.find("synth"); it != doc.end()) rc.synth = synth_from_json(*it);
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace msstrn::train
