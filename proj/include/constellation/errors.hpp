#pragma once

#include <stdexcept>
#include <string>

namespace constellation {

// Bad or inconsistent configuration (files, field ranges, dimension mismatches).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Asked for a statistic that does not exist (e.g. mean of an empty sample).
class UndefinedMetricError : public std::runtime_error {
 public:
  explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace constellation
