#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wandcal {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Error types. Every failure mode has its own exception class so callers can
// map failures to exit codes or recovery paths without string matching.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: non-finite values, inconsistent sizes, invalid config.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// A point projected with nonpositive depth. Carries the (marker, camera)
/// indices when the call site knows them; -1 otherwise.
class BehindCameraError : public Error {
 public:
  BehindCameraError(double depth, int marker = -1, int camera = -1)
      : Error("point behind camera (depth=" + std::to_string(depth) +
              ", marker=" + std::to_string(marker) +
              ", camera=" + std::to_string(camera) + ")"),
        depth(depth),
        marker(marker),
        camera(camera) {}

  double depth;
  int marker;
  int camera;
};

/// Scene configuration that admits no valid solution: collinear references,
/// zero-visibility cameras, zero mean wand length, uncovered markers.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// A camera observes too few markers for its subproblem to be determined.
class InsufficientObservationsError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: non-finite residuals, singular systems, violated
/// post-solve checks.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (JSON schema violation, unknown key, bad index).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Internal invariant breach; indicates a bug, not bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

/// Neumaier compensated accumulator. Masked reductions over observations use
/// this with a fixed traversal order so totals are reproducible.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Wraps an angle into the canonical range (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace wandcal
