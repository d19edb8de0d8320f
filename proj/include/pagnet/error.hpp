#pragma once

#include <stdexcept>
#include <string>

namespace pagnet {

// Every failure surfaced by the library carries a machine-readable category so
// the CLI can print a single "error: <category>: <message>" line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error("usage", m) {}
};

struct InputError : Error {
  explicit InputError(const std::string& m) : Error("input", m) {}
};

struct LoadError : Error {
  explicit LoadError(const std::string& m) : Error("load", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct TrainingFault : Error {
  explicit TrainingFault(const std::string& m) : Error("training", m) {}
};

}  // namespace pagnet
