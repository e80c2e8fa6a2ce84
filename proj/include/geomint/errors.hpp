#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace geomint {

/// Base for all library errors. The CLI maps UsageError to exit code 1 and
/// every other geomint::Error to exit code 2.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, unsupported options, malformed configuration.
class UsageError : public Error
{
public:
  using Error::Error;
};

/// A quantity left its mathematical domain (non-finite derivative,
/// non-positive density, ...).
class NumericalDomainError : public Error
{
public:
  using Error::Error;
};

/// Density lost positivity during a step.
class PositivityError : public NumericalDomainError
{
public:
  PositivityError(const std::string& what, long index)
    : NumericalDomainError(what + " (grid index " + std::to_string(index) + ")"), index_(index)
  {}
  long index() const { return index_; }

private:
  long index_;
};

/// An iterative solve failed to reach its tolerance.
class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string& where, double residual, int iterations)
    : Error(message(where, residual, iterations)), residual_(residual), iterations_(iterations)
  {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

private:
  static std::string message(const std::string& where, double residual, int iterations)
  {
    std::ostringstream os;
    os << where << ": no convergence after " << iterations << " iterations (residual " << residual << ")";
    return os.str();
  }

  double residual_;
  int iterations_;
};

/// A file could not be read or written.
class IoError : public Error
{
public:
  IoError(const std::string& what, const std::string& path) : Error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

} // namespace geomint
