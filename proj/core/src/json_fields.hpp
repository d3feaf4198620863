// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

// Strict readers for JSON configuration documents. Every error names the
// dotted path of the offending field.

#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "thermocal/errors.hpp"

namespace thermocal::detail {

inline std::string join_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError((where.empty() ? "document" : where) + ": expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(join_path(where, item.key()) + ": unknown field");
  }
}

template <typename T>
T field(const nlohmann::json& obj, const std::string& where, const char* key) {
  const std::string name = join_path(where, key);
  if (!obj.contains(key)) throw ConfigError(name + ": missing field");
  const auto& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + ": expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
        throw ConfigError(name + ": must be non-negative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(name + ": expected a number");
  } else {
    if (!v.is_string()) throw ConfigError(name + ": expected a string");
  }
  return v.get<T>();
}

template <typename T>
T field_or(const nlohmann::json& obj, const std::string& where, const char* key, T fallback) {
  return obj.contains(key) ? field<T>(obj, where, key) : fallback;
}

}  // namespace thermocal::detail
