#ifndef MIRFS_ERROR_HPP
#define MIRFS_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mirfs {

/// Invalid configuration or usage: bad dimensions, unknown fields, orders
/// out of range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model or parameter violates its domain: θ outside the admissible box,
/// non-stochastic kernel, reducible chain, observation outside the support.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical failure during a pass over the data. Carries the index of
/// the observation at which it happened.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (at step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// The unscaled product left the representable range of double.
class UnderflowError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mirfs

#endif  // MIRFS_ERROR_HPP
