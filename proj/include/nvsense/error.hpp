#pragma once

#include <stdexcept>
#include <string>

namespace nvsense {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (input errors -> 2, computation errors -> 3).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A parameter block violates its invariants.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class ComputationError : public Error {
  public:
    using Error::Error;
};

/// p0 < 0: the microwave drive is too strong for the linearized oscillator model.
class WeakDriveViolation : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class ControlOffResonance : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class NegativeFrequency : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class SingularSystem : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class FitDiverged : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class InsufficientResolution : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class DegenerateSweep : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class ZeroSlope : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class NoOptimum : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class StepTooLarge : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

class TraceDrift : public ComputationError {
  public:
    using ComputationError::ComputationError;
};

} // namespace nvsense
