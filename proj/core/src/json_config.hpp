#pragma once

// Private helpers shared by the JSON readers. Not installed.

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "msstrn/errors.hpp"

namespace msstrn::detail {

using Json = nlohmann::ordered_json;

inline void reject_unknown_keys(const Json& obj, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (std::string_view k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
void read_if_present(const Json& obj, std::string_view key, T& out, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + std::string(where) + " has the wrong type");
  }
}

inline std::size_t read_size(const Json& obj, std::string_view key, std::size_t fallback, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return fallback;
  if (!it->is_number_unsigned()) {
    throw ConfigError("key '" + std::string(key) + "' in " + std::string(where) + " must be a non-negative integer");
  }
  return it->template get<std::size_t>();
}

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed " + std::string(what) + ": " + e.what());
  }
}

}  // namespace msstrn::detail

namespace msstrn {
struct ModelConfig;
namespace detail {
ModelConfig model_config_from_json(const Json& obj);
Json model_config_to_json(const ModelConfig& config);
}  // namespace detail
}  // namespace msstrn
