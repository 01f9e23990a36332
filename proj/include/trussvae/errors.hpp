#pragma once

#include <stdexcept>
#include <string>

namespace trussvae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value outside its permitted interval (offsets, densities, indices).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Zero-length beams, empty structures and similar degenerate geometry.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// The periodic stiffness system is singular: the network has a zero-energy mode.
class MechanismError : public Error {
 public:
  using Error::Error;
};

/// Homogenized stiffness shows couplings that orthotropic symmetry forbids.
class SymmetryViolation : public Error {
 public:
  using Error::Error;
};

/// Stiffness (or a block of it) is not symmetric positive definite.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during a numerical computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Tensor/vector shapes do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration (unknown keys, layout mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset generation could not reach the requested number of unique structures.
class GenerationExhausted : public Error {
 public:
  using Error::Error;
};

/// Inverse design produced no decodable candidate.
class OptimizationFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace trussvae
