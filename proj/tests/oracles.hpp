#pragma once

// Independent reference formulas used by the tests.  Nothing here calls
// into the library except for plain data types.

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "bicavity/units.hpp"

namespace oracle {

using bicavity::cplx;
using bicavity::pi;
inline const cplx I{0.0, 1.0};

struct RT {
  cplx r, t;
};

/// Airy formulas for a single layer (index n, thickness d) in vacuum at
/// normal incidence, exp(-i w t) convention.  r is referred to the front
/// face and t to the back face.
inline RT airy_slab(cplx n, double d, cplx f) {
  const cplx r12 = (1.0 - n) / (1.0 + n);
  const cplx r23 = (n - 1.0) / (n + 1.0);
  const cplx t12 = 2.0 / (1.0 + n);
  const cplx t23 = 2.0 * n / (n + 1.0);
  const cplx delta = 2.0 * pi * f * n * d;
  const cplx e2 = std::exp(2.0 * I * delta);
  const cplx den = 1.0 + r12 * r23 * e2;
  return {(r12 + r23 * e2) / den, t12 * t23 * std::exp(I * delta) / den};
}

/// Two identical symmetric, zero-thickness scatterers (r, t) separated by a
/// vacuum gap q, composed by summing the multiple-reflection series.
inline RT two_port_composition(cplx r, cplx t, double q, double f) {
  const cplx p = std::exp(I * 2.0 * pi * f * q);
  const cplx den = 1.0 - r * r * p * p;
  return {r + t * t * r * p * p / den, t * t * p / den};
}

/// Fourier coefficient of a centred disc (value `in`) in a square cell of
/// side `period` (value `out`) by midpoint quadrature on an n x n grid.
inline cplx disc_coefficient_quadrature(double period, double radius, cplx in, cplx out, int m, int nn,
                                        int n) {
  cplx acc{0.0, 0.0};
  const double h = period / n;
  for (int i = 0; i < n; ++i) {
    const double x = -0.5 * period + (i + 0.5) * h;
    for (int j = 0; j < n; ++j) {
      const double y = -0.5 * period + (j + 0.5) * h;
      const cplx v = (x * x + y * y < radius * radius) ? in : out;
      acc += v * std::exp(-I * 2.0 * pi * (m * x + nn * y) / period);
    }
  }
  return acc / double(n) / double(n);
}

/// Eigenvalues of a complex 2x2 matrix, sorted by real part.
inline std::pair<cplx, cplx> eig2(const Eigen::Matrix2cd& h) {
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(h, false);
  cplx a = es.eigenvalues()(0), b = es.eigenvalues()(1);
  if (b.real() < a.real()) std::swap(a, b);
  return {a, b};
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
