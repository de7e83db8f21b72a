#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

// Shared error taxonomy and a few numeric helpers. Units: hbar^2/2m = 1,
// particle charge = 1, the cycle coordinate s is dimensionless.

namespace pumpline {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

using cplx = std::complex<double>;

// Bad user input: schema violations, out-of-range parameters.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Physics precondition failed: the Fermi energy is not inside an open
// spectral gap (or left it somewhere along the cycle).
struct GapClosureError : std::runtime_error {
  explicit GapClosureError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: integration failure, ill-conditioning, refinement
// limits, degenerate root tracking.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double sqr(double x) { return x * x; }

// Principal-branch phase increment from a to b on the unit circle, in (-pi, pi].
inline double phase_step(cplx a, cplx b) { return std::arg(b / a); }

}  // namespace pumpline
