#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace optstop {

/// Invalid arguments or inconsistent shapes passed to an engine routine.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky factorisation hit a non-positive pivot.
class DecompositionError : public std::runtime_error {
 public:
  DecompositionError(std::size_t pivot, double value);
  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

/// A model produced a non-finite state.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::size_t step, std::size_t path, const std::string& what);
  std::size_t step() const noexcept { return step_; }
  std::size_t path() const noexcept { return path_; }

 private:
  std::size_t step_;
  std::size_t path_;
};

/// Training produced a non-finite or exploding objective/gradient.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& quantity, double value);
  std::size_t step() const noexcept { return step_; }
  const std::string& quantity() const noexcept { return quantity_; }

 private:
  std::size_t step_;
  std::string quantity_;
};

/// Stopping time is not adapted to the path filtration.
class AdaptednessError : public std::runtime_error {
 public:
  AdaptednessError(std::size_t step, std::size_t first_path, std::size_t second_path);
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optstop
