#pragma once

#include <span>
#include <vector>

#include "bicavity/structure.hpp"
#include "bicavity/units.hpp"

namespace bicavity {

struct Layer {
  Medium medium;
  double thickness = 0.0;  // lambda0 units
};

/// Homogeneous layers between two semi-infinite media, normal incidence
/// from the ambient side.
struct LayerStack {
  std::vector<Layer> layers;
  Medium ambient{};
  Medium substrate{};

  double total_thickness() const;
  bool lossless() const;
  /// Same stack seen from the substrate side.
  LayerStack reversed() const;
  void validate() const;
};

/// Zero-order scattering amplitudes.  r is referenced to the first interface
/// and t to the last one.  R and T are power fractions.
struct ScatteringAmplitudes {
  cplx r{0.0, 0.0};
  cplx t{1.0, 0.0};
  double R = 0.0;
  double T = 1.0;

  double A() const { return 1.0 - R - T; }
};

/// Transverse electric field sampled along the stack axis (incident amplitude 1).
struct FieldProfile {
  std::vector<double> z;
  std::vector<cplx> e;
};

/// Area-weighted index of a patterned slab, (1 - eta) n + eta with eta the
/// hole fill factor.  Holes are assumed to be vacuum.
double effective_index(const PhcSlabSpec& phc);

/// Homogeneous stand-in for a patterned slab (real index only, vacuum outside).
LayerStack effective_stack(const PhcSlabSpec& phc);
LayerStack effective_stack(const CavitySpec& cavity);

/// Characteristic-matrix solution at normal incidence.  `freq` is in f0
/// units and may be complex for analytic continuation.
ScatteringAmplitudes tmm_scatter(const LayerStack& stack, cplx freq);

/// Field amplitudes reconstructed at `grid` (lambda0 units, z = 0 at the
/// first interface).
FieldProfile tmm_field_profile(const LayerStack& stack, cplx freq, std::span<const double> grid);

}  // namespace bicavity
