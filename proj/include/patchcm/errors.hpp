#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace patchcm {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed expression or document source. `offset` is a byte position
/// into the offending text.
struct ParseError : Error {
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse error at offset " + std::to_string(offset) + ": " + what),
        offset(offset) {}
  std::size_t offset;
};

/// Well-formed input that violates a structural contract (dimension
/// mismatch, unknown name, bad schema version, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// Numerical method failed to converge or hit a singular configuration.
struct SolverError : Error {
  using Error::Error;
};

/// Evaluation requested outside the validated domain (theta-rate floor,
/// radius beyond the outermost annulus, non-periodic orbit, ...).
struct DomainError : Error {
  using Error::Error;
};

struct HyperbolicityError : ValidationError {
  HyperbolicityError(std::complex<double> lambda, const std::string& what)
      : ValidationError(what), eigenvalue(lambda) {}
  std::complex<double> eigenvalue;
};

}  // namespace patchcm
