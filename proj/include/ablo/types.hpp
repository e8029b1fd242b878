#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ablo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Invalid user input: bad dimensions, out-of-range probabilities, unknown keys.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An inner rollout produced a non-finite loss, gradient or iterate.
class DivergentRollout : public std::runtime_error {
 public:
  DivergentRollout(std::size_t iteration, const std::string& what)
      : std::runtime_error(what + " (inner iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Outer SGD produced a non-finite iterate, or an estimator failed mid-run.
class DivergentRun : public std::runtime_error {
 public:
  DivergentRun(std::size_t iteration, const std::string& what)
      : std::runtime_error(what + " (outer iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// A closed-form expression was requested outside the region where it holds.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ablo
