#pragma once

#include <stdexcept>
#include <string>

namespace rls {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Kernel evaluated at a coincident pair of points.
class SingularPoint : public Error {
 public:
  SingularPoint() : Error("kernel evaluated at zero separation") {}
};

// Real energy where the outgoing branch of kappa is undefined.
class BranchError : public Error {
 public:
  using Error::Error;
};

// Resolvent evaluated on the mass shell |q|^2 = mu^2 - m^2.
class SingularShell : public Error {
 public:
  using Error::Error;
};

// Scattering requested at |lambda| <= m.
class GapEnergy : public Error {
 public:
  using Error::Error;
};

// Channel index inconsistent with the sign of the energy.
class ChannelMismatch : public Error {
 public:
  using Error::Error;
};

// I + K numerically singular at the requested energy.
class ExceptionalValue : public Error {
 public:
  ExceptionalValue(double energy, double smallest_singular, double threshold)
      : Error("exceptional value near energy " + std::to_string(energy) +
              ": smallest singular value " + std::to_string(smallest_singular) +
              " below threshold " + std::to_string(threshold)),
        energy_(energy),
        smallest_singular_(smallest_singular) {}

  double energy() const { return energy_; }
  double smallest_singular() const { return smallest_singular_; }

 private:
  double energy_;
  double smallest_singular_;
};

class NoRootInBracket : public Error {
 public:
  using Error::Error;
};

class NonRadialPotential : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class SolverDidNotConverge : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace rls
