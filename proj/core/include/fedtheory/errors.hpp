#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedtheory {

// Bad argument shape or domain (dimension mismatch, empty list, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment / population configuration.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Operation requires a capability the objective does not provide
// (e.g. an exact curvature bound for a logistic client).
class UnsupportedObjective : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A local run left the basin: ||delta_k|| grew past the divergence limit.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, double ratio)
      : std::runtime_error("local solver diverged at iteration " +
                           std::to_string(iteration) + " (growth ratio " +
                           std::to_string(ratio) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

// Quantity is undefined for the given input (e.g. region radius with a
// single optimum, pairwise cosine with one client).
class UndefinedQuantity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace fedtheory
