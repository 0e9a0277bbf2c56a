#pragma once

#include <stdexcept>
#include <string>

namespace chstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A grid function that must be mean-zero is not.
class NonZeroMean : public Error {
 public:
  using Error::Error;
};

class NonPositiveStep : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of a ratio function or constant.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// A mesh step ratio exceeds the user ratio cap of a certification.
class RatioExceedsUser : public Error {
 public:
  RatioExceedsUser(const std::string& what, int level, double ratio)
      : Error(what), level_(level), ratio_(ratio) {}
  int level() const noexcept { return level_; }
  double ratio() const noexcept { return ratio_; }

 private:
  int level_;
  double ratio_;
};

/// The nonlinear fixed-point iteration hit its iteration limit. Drivers
/// treat this as a rejected step.
class FixedPointDiverged : public Error {
 public:
  FixedPointDiverged(const std::string& what, int iterations, double last_increment)
      : Error(what), iterations_(iterations), last_increment_(last_increment) {}
  int iterations() const noexcept { return iterations_; }
  double last_increment() const noexcept { return last_increment_; }

 private:
  int iterations_;
  double last_increment_;
};

class DegenerateRefinement : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

}  // namespace chstep
