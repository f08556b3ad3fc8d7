#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bicavity/stack_optics.hpp"
#include "bicavity/structure.hpp"
#include "bicavity/units.hpp"

namespace bicavity {

// Coupled-mode models of a guided resonance in one slab and of two such
// slabs across a gap.  Frequencies and rates in f0 units, gaps in lambda0.
//
// Background convention: r_d is the direct reflection amplitude and t_d is
// defined so that the direct *physical* transmission amplitude is i t_d.
// For a homogeneous slab with amplitudes (r_h, tau_h): r_d = r_h,
// t_d = -i tau_h.  Lossless backgrounds then have r_d / t_d real.

struct DirectPath {
  cplx r_d{0.0, 0.0};
  cplx t_d{0.0, -1.0};  // transparent
};

/// Background amplitudes as a function of frequency.
using Background = std::function<DirectPath(double omega)>;

Background constant_background(DirectPath p);
/// Homogeneous effective-index slab evaluated by transfer matrices.
Background slab_background(const PhcSlabSpec& slab);

struct FanoParams {
  double omega_f = 1.0;
  double kappa_e = 1e-3;
  double kappa_i = 0.0;
  cplx r_d{0.0, 0.0};
  cplx t_d{0.0, -1.0};

  DirectPath direct() const { return {r_d, t_d}; }
  void validate() const;
};

/// Single-slab two-port response.  `background`, when given, overrides the
/// constant r_d, t_d stored in `p`.
ScatteringAmplitudes fano_rt(const FanoParams& p, double omega, const Background& background = {});

/// Two identical resonant slabs separated by a vacuum gap.
struct DoubleSlabCmt {
  FanoParams fano;
  Background background;  // empty: constant r_d, t_d from `fano`
  double zeta_c = 0.0;        // f0 units
  double zeta_delta = 0.1;    // lambda0 units
  bool flat_background = false;

  /// Evanescent coupling at gap q.
  double zeta(double q) const;
  DirectPath direct(double omega) const;
};

/// Driven response of the double slab at real frequency `omega`, gap `q`.
ScatteringAmplitudes double_slab_response(const DoubleSlabCmt& m, double omega, double q);

/// Per-slab variant used for limiting cases: each slab carries its own
/// resonance and background; `zeta` is the evanescent coupling.
ScatteringAmplitudes double_slab_response(const FanoParams& slab1, const FanoParams& slab2, double zeta,
                                          double omega, double q);

enum class Parity { Even, Odd, Unknown };
std::string to_string(Parity p);

struct Supermode {
  Parity parity = Parity::Unknown;
  double omega = 0.0;
  double gamma = 0.0;
};

/// Closed-form flat-background supermodes, right-hand side evaluated at
/// k0 = 2 pi omega_F.  Returns {even, odd}.
std::pair<Supermode, Supermode> supermodes(const DoubleSlabCmt& m, double q);

/// Self-consistent eigenfrequencies (omega - i gamma) of the flat-background
/// two-resonator matrix with the propagation phase evaluated at the
/// eigenfrequency itself.  Returns {even, odd}.
std::pair<cplx, cplx> supermode_eigenvalues(const DoubleSlabCmt& m, double q);

/// Gaps q <= q_max where cos(k0 q) = -+1, i.e. multiples of lambda_F / 2.
std::vector<double> bic_locations(const DoubleSlabCmt& m, double q_max);

// ---------------------------------------------------------------- fitting

struct SpectrumSample {
  double omega = 0.0;
  double R = 0.0;
  double T = 0.0;
};

struct SliceSample {
  double q = 0.0;
  double T = 0.0;
};

enum class FitStatus { Converged, MaxIterations, Degenerate };
std::string to_string(FitStatus s);

struct ZetaParams {
  double zeta_c = 0.0;
  double zeta_delta = 0.1;
};

struct FitReport {
  FanoParams fano;
  std::optional<ZetaParams> zeta;
  double residual_rms = 0.0;
  double initial_rms = 0.0;
  int iterations = 0;
  FitStatus status = FitStatus::MaxIterations;
  std::string message;

  bool converged() const { return status == FitStatus::Converged; }
};

struct FitOptions {
  bool fit_kappa_i = false;
  /// fit_zeta only: after the frozen (C, delta) fit, release omega_F and
  /// kappa_e as well, starting from the single-slab values.
  bool refine_fano = false;
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

/// Least-squares fit of (omega_F, kappa_e[, kappa_i]) to reflectance and
/// transmittance jointly.  The background is held fixed.
FitReport fit_fano(std::span<const SpectrumSample> spectrum, const Background& background,
                   const FitOptions& opt = {});

/// Fit of the evanescent coupling (C, delta) to a transmittance slice at
/// fixed `omega`.  The single-slab parameters in `model` stay frozen unless
/// `opt.refine_fano` is set; the returned report carries the final values.
FitReport fit_zeta(const DoubleSlabCmt& model, double omega, std::span<const SliceSample> slice,
                   const FitOptions& opt = {});

}  // namespace bicavity
