#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pac2 {

// Raised when an evaluation produces a non-finite value or gradient.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, const std::string& node_kind = "")
      : std::runtime_error(node_kind.empty() ? what : what + " (node: " + node_kind + ")"),
        node_kind_(node_kind) {}

  const std::string& node_kind() const { return node_kind_; }

 private:
  std::string node_kind_;
};

// Parameter vector does not match the expected layout.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation asked of a posterior family that does not support it.
class UnsupportedFamilyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training aborted mid-run; carries the failing step and the last finite snapshot.
class TrainError : public NumericError {
 public:
  TrainError(const std::string& what, int step, std::vector<double> last_params)
      : NumericError(what + " at step " + std::to_string(step)),
        step_(step),
        last_params_(std::move(last_params)) {}

  int step() const { return step_; }
  const std::vector<double>& last_params() const { return last_params_; }

 private:
  int step_;
  std::vector<double> last_params_;
};

}  // namespace pac2
