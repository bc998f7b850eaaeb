#pragma once

#include <stdexcept>
#include <string>

namespace fsn {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data or configuration violates a documented constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file or stream could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A size guard refused to start an operation (lattice too large, context too large).
class RefusalError : public ValidationError {
 public:
  RefusalError(const std::string& what, double measured)
      : ValidationError(what), measured_(measured) {}
  double measured() const noexcept { return measured_; }

 private:
  double measured_;
};

/// A numerical procedure did not converge.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace fsn
