#pragma once

#include <stdexcept>
#include <string>

namespace apgx {

// Non-finite value encountered during rollout, loss, or gradient evaluation.
// Carries the lane/step (or sample index) where the value first went bad.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int lane, int step)
      : std::runtime_error(what), lane_(lane), step_(step) {}
  int lane() const { return lane_; }
  int step() const { return step_; }

 private:
  int lane_;
  int step_;
};

// Malformed config file or override. Message includes "<source>:<line>".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace apgx
