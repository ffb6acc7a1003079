#include "msstrn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_config.hpp"

namespace msstrn {

namespace detail {

namespace {

constexpr std::string_view kModelSection = "model config";

}  // namespace

ModelConfig model_config_from_json(const Json& obj) {
  reject_unknown_keys(obj, kModelSection,
                      {"nodes", "features", "input_steps", "horizon", "embed_dim", "hidden_dim", "cheb_depth",
                       "heads", "window", "stack", "variant", "seed", "static_adjacency", "norm_trainable"});
  ModelConfig c;
  c.nodes = read_size(obj, "nodes", c.nodes, kModelSection);
  c.features = read_size(obj, "features", c.features, kModelSection);
  c.input_steps = read_size(obj, "input_steps", c.input_steps, kModelSection);
  c.horizon = read_size(obj, "horizon", c.horizon, kModelSection);
  c.embed_dim = read_size(obj, "embed_dim", c.embed_dim, kModelSection);
  c.hidden_dim = read_size(obj, "hidden_dim", c.hidden_dim, kModelSection);
  c.cheb_depth = read_size(obj, "cheb_depth", c.cheb_depth, kModelSection);
  c.heads = read_size(obj, "heads", c.heads, kModelSection);
  c.window = read_size(obj, "window", c.window, kModelSection);
  c.seed = read_size(obj, "seed", c.seed, kModelSection);
  std::string stack = format_stack(c.stack);
  read_if_present(obj, "stack", stack, kModelSection);
  c.stack = parse_stack(stack);
  std::string variant(to_string(c.variant));
  read_if_present(obj, "variant", variant, kModelSection);
  c.variant = parse_variant(variant);
  read_if_present(obj, "norm_trainable", c.norm_trainable, kModelSection);
  if (auto it = obj.find("static_adjacency"); it != obj.end() && !it->is_null()) {
    std::vector<std::vector<double>> rows;
    read_if_present(obj, "static_adjacency", rows, kModelSection);
    if (rows.empty()) throw ConfigError("static_adjacency must be a non-empty square matrix");
    const std::size_t n = rows.size();
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != n) throw ConfigError("static_adjacency must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    c.static_adjacency = DenseArray({n, n}, std::move(flat));
  }
  return c;
}

Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["nodes"] = c.nodes;
  j["features"] = c.features;
  j["input_steps"] = c.input_steps;
  j["horizon"] = c.horizon;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["cheb_depth"] = c.cheb_depth;
  j["heads"] = c.heads;
  j["window"] = c.window;
  j["stack"] = format_stack(c.stack);
  j["variant"] = std::string(to_string(c.variant));
  j["seed"] = c.seed;
  j["norm_trainable"] = c.norm_trainable;
  if (c.static_adjacency) {
    const std::size_t n = c.static_adjacency->dim(0);
    Json rows = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < n; ++k) row.push_back((*c.static_adjacency)[i * n + k]);
      rows.push_back(std::move(row));
    }
    j["static_adjacency"] = std::move(rows);
  }
  return j;
}

}  // namespace detail

using detail::Json;

ModelConfig parse_model_config(std::string_view json_text) {
  return detail::model_config_from_json(detail::parse_json(json_text, "model config"));
}

std::string dump_model_config(const ModelConfig& config) { return detail::model_config_to_json(config).dump(2); }

namespace {

constexpr std::string_view kFormat = "msstrn-checkpoint";
constexpr int kVersion = 1;

}  // namespace

std::string serialize_checkpoint(const Model& model, const std::optional<data::ZScore>& normalization,
                                 const std::vector<std::string>& node_ids) {
  Json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["config"] = detail::model_config_to_json(model.config());
  if (normalization) doc["normalization"] = {{"mean", normalization->mean}, {"std", normalization->std}};
  if (!node_ids.empty()) doc["node_ids"] = node_ids;
  Json params = Json::object();
  for (const Parameter& p : model.parameters().entries()) {
    Json entry;
    entry["shape"] = p.value.shape();
    entry["values"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
    params[p.name] = std::move(entry);
  }
  doc["parameters"] = std::move(params);
  return doc.dump();
}

Checkpoint deserialize_checkpoint(std::string_view text) {
  const Json doc = detail::parse_json(text, "checkpoint");
  detail::reject_unknown_keys(doc, "checkpoint", {"format", "version", "config", "normalization", "node_ids", "parameters"});
  if (doc.value("format", std::string()) != kFormat) throw ConfigError("not an msstrn checkpoint");
  if (doc.value("version", 0) != kVersion) throw ConfigError("unsupported checkpoint version");
  if (!doc.contains("config") || !doc.contains("parameters")) throw ConfigError("checkpoint lacks config or parameters");

  Checkpoint ckpt;
  ckpt.config = detail::model_config_from_json(doc.at("config"));
  if (auto it = doc.find("normalization"); it != doc.end()) {
    detail::reject_unknown_keys(*it, "checkpoint normalization", {"mean", "std"});
    data::ZScore z;
    detail::read_if_present(*it, "mean", z.mean, "checkpoint normalization");
    detail::read_if_present(*it, "std", z.std, "checkpoint normalization");
    ckpt.normalization = z;
  }
  detail::read_if_present(doc, "node_ids", ckpt.node_ids, "checkpoint");
  const Json& params = doc.at("parameters");
  if (!params.is_object()) throw ConfigError("checkpoint parameters must be an object");
  for (const auto& [name, entry] : params.items()) {
    detail::reject_unknown_keys(entry, "checkpoint parameter '" + name + "'", {"shape", "values"});
    Shape shape;
    std::vector<double> values;
    detail::read_if_present(entry, "shape", shape, "checkpoint parameter");
    detail::read_if_present(entry, "values", values, "checkpoint parameter");
    ckpt.parameters.add(name, DenseArray(std::move(shape), std::move(values)), ParamRole::Weight);
  }
  // Validates names and shapes against a freshly declared model.
  (void)ckpt.model();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::optional<data::ZScore>& normalization, const std::vector<std::string>& node_ids) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << serialize_checkpoint(model, normalization, node_ids);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace msstrn
