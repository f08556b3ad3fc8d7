#pragma once

#include <stdexcept>

#include "bicavity/units.hpp"

namespace bicavity {

/// Isotropic, dispersionless medium.  Time dependence is exp(-i w t), so an
/// absorbing medium has a positive extinction `n_im`.
struct Medium {
  double n_re = 1.0;
  double n_im = 0.0;

  static Medium vacuum() { return {}; }

  cplx index() const { return {n_re, n_im}; }
  cplx permittivity() const { return index() * index(); }
  bool lossless() const { return n_im == 0.0; }

  void validate() const {
    if (!(n_re > 0.0)) throw std::invalid_argument("Medium: real index must be positive");
    if (!(n_im >= 0.0)) throw std::invalid_argument("Medium: extinction must be non-negative");
  }

  friend bool operator==(const Medium&, const Medium&) = default;
};

inline constexpr double kGaAsIndex = 3.374;

/// One slab patterned with a square lattice of circular holes.
/// All lengths in lambda0 units.
struct PhcSlabSpec {
  double thickness = 100.0 / 1550.0;
  double period = 0.6;
  double hole_radius = 0.1525;
  Medium slab{kGaAsIndex, 0.0};
  Medium hole{};

  /// Area fraction of the unit cell occupied by the hole.
  double fill_factor() const { return pi * hole_radius * hole_radius / (period * period); }
  bool patterned() const { return hole_radius > 0.0 && hole != slab; }

  void validate() const {
    if (!(thickness > 0.0)) throw std::invalid_argument("PhcSlabSpec: thickness must be positive");
    if (!(period > 0.0)) throw std::invalid_argument("PhcSlabSpec: period must be positive");
    if (!(hole_radius >= 0.0 && hole_radius < 0.5 * period))
      throw std::invalid_argument("PhcSlabSpec: hole radius must satisfy 0 <= a < period/2");
    slab.validate();
    hole.validate();
  }

  friend bool operator==(const PhcSlabSpec&, const PhcSlabSpec&) = default;
};

/// Two slabs facing each other across a vacuum gap, lattices aligned.
struct CavitySpec {
  PhcSlabSpec slab1;
  PhcSlabSpec slab2;
  double gap = 0.5;

  static CavitySpec symmetric(const PhcSlabSpec& slab, double gap) { return {slab, slab, gap}; }
  bool is_symmetric() const { return slab1 == slab2; }
  double length() const { return slab1.thickness + gap + slab2.thickness; }
  /// Axial coordinate of the gap midplane, measured from the outer face of slab 1.
  double midplane() const { return slab1.thickness + 0.5 * gap; }

  void validate() const {
    slab1.validate();
    slab2.validate();
    if (slab1.period != slab2.period)
      throw std::invalid_argument("CavitySpec: slabs must share the lattice period");
    if (!(gap >= 0.0)) throw std::invalid_argument("CavitySpec: gap must be non-negative");
  }
};

/// GaAs membranes, 100 nm thick at lambda0 = 1550 nm, used throughout the
/// reference calculations.
namespace designs {

inline PhcSlabSpec gaas_slab(double period, double hole_radius, double extinction = 0.0) {
  PhcSlabSpec s;
  s.thickness = 100.0 / 1550.0;
  s.period = period;
  s.hole_radius = hole_radius;
  s.slab = Medium{kGaAsIndex, extinction};
  return s;
}

/// Single-slab Fano mirror with its reflectance peak near lambda0.
inline PhcSlabSpec fano_mirror(double extinction = 0.0) { return gaas_slab(0.6, 0.1525, extinction); }
/// Large-hole design whose lowest BIC gives strong dispersive coupling.
inline PhcSlabSpec dispersive_bic(double extinction = 0.0) { return gaas_slab(0.7, 0.27, extinction); }
/// Small-hole design placing the BIC where the linear coupling vanishes.
inline PhcSlabSpec quadratic_bic(double extinction = 0.0) { return gaas_slab(0.5575, 0.092, extinction); }

}  // namespace designs

}  // namespace bicavity
