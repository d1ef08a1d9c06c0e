#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

// Argument outside the mathematical domain of an operation (negative time, bad coordinate).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed data: a pmf that does not sum to one, a file with the wrong shape.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent experiment or schedule configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Dense state space larger than the configured cap.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Score ratio with a zero denominator.
struct SingularScoreError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operation not defined for this alphabet (shift on a masked alphabet).
struct UnsupportedOperation : std::logic_error {
  using std::logic_error::logic_error;
};

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ddlab
