#pragma once

#include <stdexcept>
#include <string>

namespace cropgan {

// Error taxonomy mirrored by the CLI exit codes: usage errors exit 1,
// format errors exit 2, numeric divergence exits 3.

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors fed to an operation.
class DimensionError : public UsageError {
 public:
  explicit DimensionError(const std::string& msg) : UsageError(msg) {}
};

// Operation parameters that cannot produce a valid result (e.g. a
// convolution whose output would be empty).
class ConfigError : public UsageError {
 public:
  explicit ConfigError(const std::string& msg) : UsageError(msg) {}
};

// Malformed or truncated file. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, long long offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cropgan
