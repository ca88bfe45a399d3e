#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dnnchip/error.hpp"

namespace dnnchip::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline json parse_json(std::string_view document, std::string_view what) {
  try {
    return json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::Parse, fmt::format("{}: malformed document: {}", what, e.what()));
  }
}

inline void require_object(const json& value, std::string_view context) {
  if (!value.is_object()) {
    fail(ErrorCategory::Parse, fmt::format("{}: expected an object", context));
  }
}

// Strict schemas: any key outside `allowed` is an error naming that key.
inline void reject_unknown_fields(const json& object, std::initializer_list<std::string_view> allowed,
                                  std::string_view context) {
  for (const auto& [key, _] : object.items()) {
    bool known = false;
    for (auto name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      fail(ErrorCategory::Parse, fmt::format("{}: unknown field '{}'", context, key));
    }
  }
}

inline const json& require_field(const json& object, std::string_view key, std::string_view context) {
  auto it = object.find(std::string(key));
  if (it == object.end()) {
    fail(ErrorCategory::Parse, fmt::format("{}: missing field '{}'", context, key));
  }
  return *it;
}

inline std::string get_string(const json& object, std::string_view key, std::string_view context) {
  const auto& value = require_field(object, key, context);
  if (!value.is_string()) {
    fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must be a string", context, key));
  }
  return value.get<std::string>();
}

inline std::int64_t as_int(const json& value, std::string_view key, std::string_view context) {
  if (!value.is_number_integer()) {
    fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must be an integer", context, key));
  }
  return value.get<std::int64_t>();
}

inline std::int64_t get_int(const json& object, std::string_view key, std::string_view context) {
  return as_int(require_field(object, key, context), key, context);
}

inline double as_number(const json& value, std::string_view key, std::string_view context) {
  if (!value.is_number()) {
    fail(ErrorCategory::Parse, fmt::format("{}: field '{}' must be a number", context, key));
  }
  return value.get<double>();
}

inline double get_number(const json& object, std::string_view key, std::string_view context) {
  return as_number(require_field(object, key, context), key, context);
}

inline void require_version(const json& object, std::int64_t supported, std::string_view context) {
  auto version = get_int(object, "version", context);
  if (version != supported) {
    fail(ErrorCategory::Parse,
         fmt::format("{}: unsupported version {} (expected {})", context, version, supported));
  }
}

}  // namespace dnnchip::detail
