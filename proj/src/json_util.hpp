#pragma once

// Internal helpers for strict JSON parsing: unknown keys are rejected and
// missing/mistyped fields produce errors naming the offending key.

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "nrdr/errors.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

using Json = nlohmann::json;

inline void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
}

inline void check_keys(const Json& j, const std::string& what,
                       std::initializer_list<const char*> allowed) {
  require_object(j, what);
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(what + ": unknown key '" + item.key() + "'");
  }
}

inline const Json& require_key(const Json& j, const std::string& what,
                               const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(what + ": missing key '" + key + "'");
  return *it;
}

inline double get_number(const Json& j, const std::string& what,
                         const char* key) {
  const Json& v = require_key(j, what, key);
  if (!v.is_number()) throw ConfigError(what + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline double get_number_or(const Json& j, const std::string& what,
                            const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number())
    throw ConfigError(what + ": '" + key + "' must be a number");
  return it->get<double>();
}

inline std::int64_t get_int(const Json& j, const std::string& what,
                            const char* key) {
  const Json& v = require_key(j, what, key);
  if (!v.is_number_integer())
    throw ConfigError(what + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::int64_t get_int_or(const Json& j, const std::string& what,
                               const char* key, std::int64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer())
    throw ConfigError(what + ": '" + key + "' must be an integer");
  return it->get<std::int64_t>();
}

inline std::uint64_t get_u64_or(const Json& j, const std::string& what,
                                const char* key, std::uint64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned() && !it->is_number_integer())
    throw ConfigError(what + ": '" + key + "' must be an integer");
  return it->get<std::uint64_t>();
}

inline bool get_bool_or(const Json& j, const std::string& what, const char* key,
                        bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean())
    throw ConfigError(what + ": '" + key + "' must be a boolean");
  return it->get<bool>();
}

inline std::string get_string(const Json& j, const std::string& what,
                              const char* key) {
  const Json& v = require_key(j, what, key);
  if (!v.is_string()) throw ConfigError(what + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string get_string_or(const Json& j, const std::string& what,
                                 const char* key, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string())
    throw ConfigError(what + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

inline Vec3 get_vec3(const Json& j, const std::string& what, const char* key) {
  const Json& v = require_key(j, what, key);
  if (!v.is_array() || v.size() != 3)
    throw ConfigError(what + ": '" + key + "' must be an array of 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number())
      throw ConfigError(what + ": '" + key + "' must be an array of 3 numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

inline Vec3 get_vec3_or(const Json& j, const std::string& what, const char* key,
                        const Vec3& fallback) {
  if (j.find(key) == j.end()) return fallback;
  return get_vec3(j, what, key);
}

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace nrdr
