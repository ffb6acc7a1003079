// msstrn command-line tool: train, eval, predict, gradcheck, synth.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "msstrn/checkpoint.hpp"
#include "msstrn/data.hpp"
#include "msstrn/diagnostics.hpp"
#include "msstrn/errors.hpp"
#include "msstrn/trainer.hpp"

namespace fs = std::filesystem;
using namespace msstrn;

namespace {

using Json = nlohmann::ordered_json;

void emit(const Json& line) { std::cout << line.dump() << std::endl; }

Json metrics_json(const data::Metrics& m) {
  Json j{{"mae", m.mae}, {"rmse", m.rmse}};
  j["mape"] = m.mape_defined ? Json(m.mape) : Json(nullptr);
  return j;
}

// "synth" or a CSV path.
data::TrafficSeries load_data(const std::string& spec, const data::SynthOptions& synth) {
  if (spec == "synth") return data::synth_generate(synth);
  return data::load_series(spec);
}

data::SampleSet select_split(const data::SampleSet& all, const std::string& split) {
  if (split == "all") return all;
  const data::DataSplit parts = data::chrono_split(all);
  if (split == "train") return parts.train;
  if (split == "val") return parts.val;
  if (split == "test") return parts.test;
  throw ConfigError("split must be one of train, val, test, all");
}

data::SampleSet checkpoint_samples(const Checkpoint& ckpt, const std::string& data_spec, const std::string& split,
                                   data::TrafficSeries* series_out = nullptr) {
  data::TrafficSeries series = load_data(data_spec, {});
  if (series.nodes() != ckpt.config.nodes) {
    throw ShapeError("checkpoint expects " + std::to_string(ckpt.config.nodes) + " nodes, data has " +
                     std::to_string(series.nodes()));
  }
  if (!ckpt.normalization) throw ConfigError("checkpoint carries no normalization statistics");
  data::SampleSet all =
      data::window_split(series, ckpt.config.input_steps, ckpt.config.horizon, *ckpt.normalization);
  if (series_out) *series_out = std::move(series);
  return select_split(all, split);
}

int run_train(const std::string& config_path, const std::string& data_spec, const std::string& out_dir, bool quiet) {
  train::RunConfig rc = train::load_run_config(config_path);
  data::TrafficSeries series = load_data(data_spec, rc.synth);
  if (rc.model.nodes == 0) rc.model.nodes = series.nodes();
  if (rc.model.nodes != series.nodes()) {
    throw ShapeError("config declares " + std::to_string(rc.model.nodes) + " nodes, data has " +
                     std::to_string(series.nodes()));
  }
  rc.model.validate();
  const data::DataSplit split = data::prepare_dataset(series, rc.model.input_steps, rc.model.horizon);

  fs::create_directories(out_dir);
  std::ofstream history_csv(fs::path(out_dir) / "history.csv");
  if (!history_csv) throw IoError("cannot write history in '" + out_dir + "'");
  history_csv << std::setprecision(std::numeric_limits<double>::max_digits10);
  history_csv << "epoch,train_loss,val_mae,val_rmse,val_mape,seconds\n";

  const auto start = std::chrono::steady_clock::now();
  train::TrainResult result = train::train(rc.model, split, rc.train, [&](const train::EpochRecord& r) {
    history_csv << r.epoch << ',' << r.train_loss << ',' << r.val.mae << ',' << r.val.rmse << ',' << r.val.mape << ','
                << r.seconds << std::endl;
    if (!quiet) {
      emit({{"event", "epoch"}, {"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val", metrics_json(r.val)},
            {"seconds", r.seconds}});
    }
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path ckpt_path = fs::path(out_dir) / "checkpoint.json";
  save_checkpoint(ckpt_path, result.model, split.train.stats, series.node_ids);

  const train::Evaluation test = train::evaluate(result.model, split.test);
  const train::Evaluation baseline = train::evaluate(train::last_value_forecaster(rc.model.horizon), split.test);
  emit({{"event", "done"},
        {"checkpoint", ckpt_path.string()},
        {"epochs", result.history.epochs.size()},
        {"best_epoch", result.history.best_epoch},
        {"stop", std::string(train::to_string(result.history.stop))},
        {"best_val_mae", result.history.best_val_mae},
        {"test", metrics_json(test.overall)},
        {"last_value_test", metrics_json(baseline.overall)},
        {"seconds", seconds}});
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_spec, const std::string& split) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model model = ckpt.model();
  const data::SampleSet samples = checkpoint_samples(ckpt, data_spec, split);
  const train::Evaluation ev = train::evaluate(model, samples);
  Json steps = Json::array();
  for (const auto& m : ev.per_step) steps.push_back(metrics_json(m));
  emit({{"event", "eval"}, {"split", split}, {"samples", samples.size()}, {"overall", metrics_json(ev.overall)},
        {"per_step", steps}});
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data_spec, const std::string& out,
                const std::string& split) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model model = ckpt.model();
  data::TrafficSeries series;
  const data::SampleSet samples = checkpoint_samples(ckpt, data_spec, split, &series);
  std::vector<std::string> ids = ckpt.node_ids.size() == samples.nodes ? ckpt.node_ids : series.node_ids;
  train::export_predictions(out, train::model_forecaster(model), samples, ids);
  emit({{"event", "predict"}, {"out", out}, {"rows", samples.size() * samples.horizon * samples.nodes}});
  return 0;
}

int run_gradcheck(const std::string& config_path, double eps, double threshold) {
  ModelConfig cfg = tiny_model_config();
  if (!config_path.empty()) cfg = train::load_run_config(config_path).model;
  if (cfg.nodes == 0) throw ConfigError("gradcheck config must set model.nodes");
  const auto start = std::chrono::steady_clock::now();
  const GradCheckReport report = model_grad_check(cfg, 1, 1, eps);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const ParamCheck* worst = report.worst();
  emit({{"event", "gradcheck"},
        {"max_rel_error", report.max_rel_error},
        {"entries", report.entries_checked},
        {"worst_parameter", worst ? worst->name : std::string()},
        {"seconds", seconds},
        {"pass", report.max_rel_error < threshold}});
  return report.max_rel_error < threshold ? 0 : 3;
}

int run_synth(const data::SynthOptions& opt, const std::string& out) {
  data::write_series(out, data::synth_generate(opt));
  emit({{"event", "synth"}, {"out", out}, {"nodes", opt.nodes}, {"length", opt.length}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-step spatio-temporal recurrent network for traffic forecasting"};
  app.require_subcommand(1);

  std::string config_path, data_spec, out, ckpt_path, split = "test";
  bool quiet = false;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint.json and history.csv");
  train_cmd->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data_spec, "CSV path or 'synth'")->required();
  train_cmd->add_option("--out", out, "Output directory")->required();
  train_cmd->add_flag("--quiet", quiet, "Only print the final summary line");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a data split");
  eval_cmd->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_spec, "CSV path or 'synth'")->required();
  eval_cmd->add_option("--split", split, "train, val, test or all")->capture_default_str();

  auto* predict_cmd = app.add_subcommand("predict", "Write per-sample predictions as CSV");
  predict_cmd->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", data_spec, "CSV path or 'synth'")->required();
  predict_cmd->add_option("--out", out, "Output CSV")->required();
  predict_cmd->add_option("--split", split, "train, val, test or all")->capture_default_str();

  double eps = 1e-5, threshold = 1e-4;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  grad_cmd->add_option("--config", config_path, "Run config JSON (defaults to the tiny model)")
      ->check(CLI::ExistingFile);
  grad_cmd->add_option("--eps", eps)->capture_default_str();
  grad_cmd->add_option("--threshold", threshold)->capture_default_str();

  data::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ring-coupled series");
  synth_cmd->add_option("--nodes", synth.nodes)->capture_default_str();
  synth_cmd->add_option("--length", synth.length)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--coupling", synth.coupling)->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_std)->capture_default_str();
  synth_cmd->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << Json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*train_cmd) return run_train(config_path, data_spec, out, quiet);
    if (*eval_cmd) return run_eval(ckpt_path, data_spec, split);
    if (*predict_cmd) return run_predict(ckpt_path, data_spec, out, split);
    if (*grad_cmd) return run_gradcheck(config_path, eps, threshold);
    if (*synth_cmd) return run_synth(synth, out);
  } catch (const Error& e) {
    std::cerr << Json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 1;
}
