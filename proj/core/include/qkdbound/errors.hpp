#ifndef QKDBOUND_ERRORS_HPP
#define QKDBOUND_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qkdbound {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not match the operation's requirements.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A matrix function hit a (numerically) zero eigenvalue where strict
/// positivity is required. Callers should switch to the depolarized path.
class SingularOperand : public Error {
public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// A protocol or run description is structurally invalid.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Input data failed validation (schema, positivity, normalization).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Mutually contradictory constraints (same direction, different value).
class ConsistencyError : public Error {
public:
  using Error::Error;
};

/// A numeric operand is outside the operation's domain.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Certificate construction or verification failed.
class CertificateError : public Error {
public:
  using Error::Error;
};

/// The observed statistics admit no density operator.
class InfeasibleProtocol : public Error {
public:
  using Error::Error;
};

} // namespace qkdbound

#endif
