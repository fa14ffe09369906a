#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace plaque {

// Invalid user input: dimensions, parameters, config documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A query outside the domain of a geometric or functional evaluation.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-positive deformation gradient determinant; the mesh has tangled.
class InvertedElementError : public std::runtime_error {
 public:
  InvertedElementError(int cell, double jacobian)
      : std::runtime_error("inverted element in cell " + std::to_string(cell) +
                           " (det F = " + std::to_string(jacobian) + ")"),
        cell_(cell),
        jacobian_(jacobian) {}

  int cell() const { return cell_; }
  double jacobian() const { return jacobian_; }

 private:
  int cell_;
  double jacobian_;
};

class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

// The heartbeat loop did not reach the periodicity tolerance.
class PeriodicityError : public std::runtime_error {
 public:
  PeriodicityError(const std::string& what, std::vector<double> gamma_history)
      : std::runtime_error(what), history_(std::move(gamma_history)) {}

  const std::vector<double>& gamma_history() const { return history_; }

 private:
  std::vector<double> history_;
};

// A NaN or infinite value reached an output.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace plaque
