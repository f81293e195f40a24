#pragma once

#include <stdexcept>
#include <string>

namespace drcurve {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The 2x2 kernel-weighted design matrix is numerically singular at the
/// requested center (usually: bandwidth too small there).
class SingularDesign : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Input value outside the domain a model is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateScale : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (CSV, JSON config, flags). Maps to CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Too many failed replications in a simulation study.
class StudyFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace drcurve
