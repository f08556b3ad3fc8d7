#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bicavity/resonance.hpp"
#include "bicavity/units.hpp"

namespace bicavity {

// Rates are stored angular (rad/s) throughout; the /2pi values shown in
// tables are derived on output.

struct MechanicalSpec {
  RadPerSec omega_m{2.0 * pi * 150e3};
  double m_eff = 1e-12;  // kg
  double q_m = 1e8;
  double temperature = 4.0;  // K

  void validate() const;
};

/// sqrt(hbar / (2 m_eff Omega_m)).
Metres zero_point_motion(const MechanicalSpec& mech);

/// Thermal occupation in the high-temperature limit, k_B T / (hbar Omega_m).
double bath_occupation(const MechanicalSpec& mech);

/// Derivatives of the complex cavity frequency with respect to the gap.
/// `g_norm` and `g2_norm` are dimensionless (f0 per lambda0 and per
/// lambda0^2); SI accessors return cyclic rates.  Signs follow df_c/dq
/// with f_c carrying a positive imaginary decay rate.
struct CouplingReport {
  double q = 0.0;  // lambda0
  Scale scale{};
  cplx g_norm{0.0, 0.0};
  cplx g2_norm{0.0, 0.0};  // half the second derivative
  double h_step = 0.0;     // lambda0
  double g_error = 0.0;    // Richardson error estimate of g_norm
  double g2_error = 0.0;
  bool converged = false;
  std::string message;

  /// G / 2pi in Hz/m.
  cplx g_hz_per_m() const { return g_norm * scale.f0() / scale.lambda0; }
  /// G2 / 2pi in Hz/m^2.
  cplx g2_hz_per_m2() const { return g2_norm * scale.f0() / (scale.lambda0 * scale.lambda0); }
  /// -dw/dx, the sign used when writing g0 = -(dw/dx) x0.
  cplx g_hz_per_m_flipped() const { return -g_hz_per_m(); }
};

struct DerivativeOptions {
  double h = 1e-3;           // lambda0
  double h_near_bic = 1e-4;  // used when Q at q exceeds q_threshold
  double q_threshold = 1e5;
  double rel_tolerance = 1e-2;
  double abs_tolerance = 1e-8;  // f0 / lambda0
};

/// Complex frequency f_c(q) in f0 units.
using BranchFunction = std::function<cplx(double q)>;

/// Five-point central differences at steps h and h/2 combined by one
/// Richardson step.  Not converged when the two estimates disagree by more
/// than the tolerances.
CouplingReport coupling_derivatives(const BranchFunction& f_c, double q, const DerivativeOptions& opt = {},
                                    Scale scale = {});

/// Same, evaluating the branch through `solve` seeded by interpolating the
/// tracked branch.  The branch must cover [q - 2h, q + 2h] and carry no
/// truncation; otherwise the report is flagged and left at zero.
CouplingReport coupling_derivatives(const ModeBranch& branch, const GapSolver& solve, double q,
                                    const DerivativeOptions& opt = {}, Scale scale = {});

struct FigureOfMerit {
  Metres x0{};
  cplx g0{0.0, 0.0};  // rad/s
  cplx g2{0.0, 0.0};  // rad/s
  RadPerSec kappa{};
  RadPerSec omega_m{};
  double g0_over_kappa = 0.0;
  double g0_over_omega_m = 0.0;
  double kappa_over_omega_m = 0.0;
  double n_bath = 0.0;
  double cooperativity = 0.0;
  double quantum_cooperativity = 0.0;
};

/// Ratios and cooperativities use the dispersive (real) part of g0.
FigureOfMerit figure_of_merit(const CouplingReport& coupling, Hertz kappa, const MechanicalSpec& mech);
/// Direct form: G/2pi in Hz/m and G2/2pi in Hz/m^2.
FigureOfMerit figure_of_merit(cplx g_hz_per_m, cplx g2_hz_per_m2, Hertz kappa, const MechanicalSpec& mech);

/// Amplitude decay rate kappa/2pi of a mode, f0 Im[f_c].
Hertz mode_linewidth(const Eigenmode& mode, Scale scale = {});

struct FpBaselineSpec {
  Metres length{17e-6};
  double finesse = 5e5;
  Metres wavelength{1550e-9};
  MechanicalSpec mech{};
  std::optional<double> mim_reflectivity;

  void validate() const;
};

struct FpBaseline {
  RadPerSec kappa{};
  double g_hz_per_m = 0.0;  // G / 2pi
  FigureOfMerit fom;
};

/// End-mirror cavity with kappa = pi c / (2 L F) and G = omega_c / L.  A
/// membrane in the middle multiplies the coupling by 2|r|.
FpBaseline fp_baseline(const FpBaselineSpec& spec);

struct InternalDecay {
  RadPerSec kappa_i{};
  double group_velocity = 1e8;  // m/s
};
struct AbsorptionCoefficient {
  double alpha = 0.0;  // 1/m
};
struct Extinction {
  double n_im = 0.0;
};
using LossInput = std::variant<InternalDecay, AbsorptionCoefficient, Extinction>;

struct LossModel {
  double alpha = 0.0;  // 1/m
  double n_im = 0.0;
  std::optional<RadPerSec> kappa_i;
  std::optional<double> group_velocity;
  double n_re = kGaAsIndex;
  /// n_re / (2 n_im); infinite for a lossless medium.
  double q_abs = 0.0;
  bool q_abs_unbounded = false;

  /// alpha d for a membrane of thickness d (thin-film limit).
  double single_pass_absorption(Metres thickness) const { return alpha * thickness.value; }
};

LossModel loss_conversions(const LossInput& input, Metres wavelength, double n_re = kGaAsIndex);

/// Far-field half angle of a Gaussian beam, lambda / (pi w0), in radians.
double beam_divergence(Metres waist, Metres wavelength);

// --------------------------------------------------------------- output

nlohmann::json to_json(const CouplingReport& c);
nlohmann::json to_json(const FigureOfMerit& f);
nlohmann::json to_json(const LossModel& l);

struct FpTableRow {
  Metres length{};
  FpBaseline result;
};

struct DphocTableRow {
  std::string label;
  double q_m = 0.0;
  double n_im = 0.0;
  std::optional<double> reflectance;
  FigureOfMerit fom;
};

/// Columns L, kappa/2pi, G/2pi, g0/2pi, g0/kappa, g0/Omega_m, kappa/Omega_m, C, C_q.
std::string fp_table_csv(std::span<const FpTableRow> rows);
/// Columns set, Q_m, Im[n], R, kappa/2pi, g0/kappa, C, C_q.
std::string dphoc_table_csv(std::span<const DphocTableRow> rows);

}  // namespace bicavity
