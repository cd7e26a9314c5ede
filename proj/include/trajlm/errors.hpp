#pragma once

#include <stdexcept>
#include <string>

namespace trajlm {

/// Bad or inconsistent configuration (unknown keys, shape mismatches between
/// configured modules). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or missing data (scene files, schema violations, modality
/// requirements not met by the data). CLI exit code 3.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values during optimization. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kNumerical = 4;
}  // namespace exit_code

}  // namespace trajlm
