#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splitstream {

/// Invalid dimensions, parameters or flag combinations.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared while stepping a system.
class IntegrationBlowup : public std::runtime_error {
 public:
  IntegrationBlowup(std::int64_t step_index, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"), step_index_(step_index) {}

  std::int64_t step_index() const noexcept { return step_index_; }

 private:
  std::int64_t step_index_;
};

/// A numerical procedure hit a degenerate configuration (zero separation, zero mean path, ...).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generator weights could not be loaded. layer_index is -1 for file-level problems.
class LoadError : public std::runtime_error {
 public:
  LoadError(int layer_index, const std::string& what)
      : std::runtime_error(layer_index < 0 ? what : "layer " + std::to_string(layer_index) + ": " + what),
        layer_index_(layer_index) {}

  int layer_index() const noexcept { return layer_index_; }

 private:
  int layer_index_;
};

/// Shape mismatch while running a generator forward pass.
class InferenceError : public std::runtime_error {
 public:
  InferenceError(int layer_index, const std::string& what)
      : std::runtime_error("layer " + std::to_string(layer_index) + ": " + what), layer_index_(layer_index) {}

  int layer_index() const noexcept { return layer_index_; }

 private:
  int layer_index_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splitstream
