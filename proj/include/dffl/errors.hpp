#pragma once

#include <stdexcept>
#include <string>

namespace dffl {

/// Invalid configuration or argument values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value reached an interface that requires finite input.
class NonFiniteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bisection hit the iteration cap before reaching the residual tolerance.
class BisectionError : public std::runtime_error {
 public:
  BisectionError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Shape distance requested for a set pair with no family rule.
/// Carries a crude Hausdorff upper bound so callers can still report something.
class UnsupportedPairError : public std::runtime_error {
 public:
  UnsupportedPairError(const std::string& what, double hausdorff_upper_bound)
      : std::runtime_error(what), upper_bound_(hausdorff_upper_bound) {}

  double hausdorff_upper_bound() const { return upper_bound_; }

 private:
  double upper_bound_;
};

/// CSV header or cell content does not match the expected schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A client file parsed to zero usable rows.
class EmptyClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A client's local update failed (solver error mid-round).
class ClientUpdateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dffl
