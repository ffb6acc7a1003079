#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msstrn/data.hpp"
#include "msstrn/model.hpp"

namespace msstrn::train {

struct TrainConfig {
  double learning_rate = 0.003;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 200;
  std::size_t patience = 30;
  double weight_decay = 0.0;  // in [0, 0.001]
  double grad_clip = 0.0;     // global L2 norm; 0 disables clipping
  std::uint64_t seed = 0;
  std::string device = "cpu";

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  data::Metrics val;
  double seconds = 0.0;
};

enum class StopReason { EarlyStop, MaxEpochs };
std::string_view to_string(StopReason reason);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 before any epoch
  double best_val_mae = 0.0;
  StopReason stop = StopReason::MaxEpochs;
};

// Tracks the best (lowest) metric. Only a strict improvement resets the
// counter; should_stop() once `patience` epochs passed without one.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  // Returns true when the metric improved on the best so far.
  bool update(double metric);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
};

struct AdamOptions {
  double learning_rate = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay. Decay skips Bias and Norm parameters;
// frozen parameters are left untouched.
class Adam {
 public:
  explicit Adam(AdamOptions options);

  void step(ParameterStore& params);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamOptions opt_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& params, double max_norm);

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const ModelConfig& model_config, const data::DataSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Normalized inputs B x T x N x 1 -> predictions in normalized units B x T' x N x 1.
using Forecaster = std::function<DenseArray(const DenseArray& inputs)>;

Forecaster model_forecaster(const Model& model);
// Repeats the last observed value over the horizon.
Forecaster last_value_forecaster(std::size_t horizon);

struct Evaluation {
  data::Metrics overall;
  std::vector<data::Metrics> per_step;  // one entry per horizon step
};

// Predictions are denormalized with the set's statistics before scoring.
Evaluation evaluate(const Forecaster& forecaster, const data::SampleSet& samples, std::size_t batch_size = 32);
Evaluation evaluate(const Model& model, const data::SampleSet& samples, std::size_t batch_size = 32);

// CSV with columns sample_index, horizon_step, node_id, truth, prediction.
void export_predictions(const std::filesystem::path& path, const Forecaster& forecaster,
                        const data::SampleSet& samples, const std::vector<std::string>& node_ids = {});

// One JSON document {"model": {...}, "train": {...}, "synth": {...}}. Every
// section is optional; unknown keys are rejected at every level.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  data::SynthOptions synth;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace msstrn::train
