#pragma once

#include <complex>
#include <numbers>

namespace bicavity {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

namespace constants {
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_B = 1.380649e-23;      // J / K
inline constexpr double c = 299792458.0;         // m / s
}  // namespace constants

// Internal lengths are in units of the design wavelength lambda0 and
// frequencies in f0 = c / lambda0.  SI values only appear at the
// optomechanics and CLI boundaries, where these tagged wrappers keep
// cycle and angular rates apart.

/// Cyclic frequency or rate in Hz.
struct Hertz {
  double value = 0.0;
};

/// Angular frequency or rate in rad/s.
struct RadPerSec {
  double value = 0.0;
};

constexpr RadPerSec to_angular(Hertz f) { return {2.0 * pi * f.value}; }
constexpr Hertz to_hertz(RadPerSec w) { return {w.value / (2.0 * pi)}; }

/// Length in metres.
struct Metres {
  double value = 0.0;
};

/// Normalization of the dimensionless solver units.
struct Scale {
  double lambda0 = 1550e-9;  // m

  constexpr double f0() const { return constants::c / lambda0; }
  constexpr double to_metres(double length_in_lambda0) const { return length_in_lambda0 * lambda0; }
  constexpr double to_lambda0(double metres) const { return metres / lambda0; }
};

}  // namespace bicavity
