#pragma once

#include "fedtheory/errors.hpp"
#include "fedtheory/objectives.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace fedtheory::detail {

using Json = nlohmann::json;

Json read_json_file(const std::filesystem::path& path, const std::string& field);

template <typename T>
T get_or(const Json& obj, const std::string& key, const T& fallback, const std::string& prefix) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + key, e.what());
  }
}

template <typename T>
T require(const Json& obj, const std::string& key, const std::string& prefix) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(prefix + key, "missing field");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(prefix + key, e.what());
  }
}

ModelVector vector_from_json(const Json& value, const std::string& field);
Json vector_to_json(const ModelVector& v);

/// Accepts the explicit population file layout or a generator section
/// ({"generator": "paraboloid" | "logistic_dirichlet", ...}).
ClientPopulation population_from_json(const Json& spec, const std::filesystem::path& base_dir,
                                      const std::string& prefix, std::uint64_t default_seed);

}  // namespace fedtheory::detail
