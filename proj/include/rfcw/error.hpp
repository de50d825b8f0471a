#pragma once

#include <stdexcept>
#include <string>

namespace rfcw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// bad user input: config files, field laws, parameter ranges
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// heat-bath probabilities exceed the configured cap
class AlphaBoundError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "alpha_bound"; }
};

class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contract"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

class ConnectivityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
  const char* kind() const noexcept override { return "connectivity"; }
};

class CapacityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "capacity"; }
};

// residual coin probabilities left [0,1]: nu too small for the realized rates
class NuViolationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "nu_violation"; }
};

class LandscapeOrderError : public DomainError {
 public:
  using DomainError::DomainError;
  const char* kind() const noexcept override { return "landscape_order"; }
};

}  // namespace rfcw
