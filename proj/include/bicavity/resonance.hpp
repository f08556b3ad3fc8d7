#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bicavity/cmt.hpp"
#include "bicavity/rcwa.hpp"
#include "bicavity/structure.hpp"
#include "bicavity/units.hpp"

namespace bicavity {

// Complex frequencies follow exp(-i w t): a decaying field sits at
// Im[f] < 0.  Reported eigenmodes store f_c with a non-negative imaginary
// part equal to the decay rate, so Q = Re[f_c] / (2 Im[f_c]).

struct Eigenmode {
  cplx f_c{1.0, 0.0};
  double q = 0.0;
  Parity parity = Parity::Unknown;
  double Q = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool fit_derived = false;

  /// Root in the exp(-i w t) half plane.
  cplx raw() const { return std::conj(f_c); }
  static Eigenmode from_raw(cplx root, double q, Parity parity, double residual);
};

/// Scalar function whose zero marks a pole.
using PoleFunction = std::function<cplx(cplx f)>;

struct PoleOptions {
  double tolerance = 1e-11;  // |step| in f / f0
  int max_iterations = 80;
  double max_step = 0.02;
  /// Accept the root only inside |Re f - Re guess| <= window.
  double window = 0.1;
};

struct RootResult {
  cplx root{0.0, 0.0};
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool outside_window = false;
  std::vector<cplx> trace;
};

/// Damped secant iteration in the complex plane.
RootResult find_root(const PoleFunction& h, cplx guess, const PoleOptions& opt = {});

/// 1 / (largest-modulus eigenvalue of S(f)).
PoleFunction smatrix_pole_function(std::function<Eigen::MatrixXcd(cplx)> smatrix);

/// Pole condition of a two-slab cavity.  For mirror-symmetric cavities the
/// gap field is split by midplane parity: an eigenvalue of Xh R Xh equals
/// +1 (even) or -1 (odd), with R the slab reflection seen from the gap and
/// Xh the half-gap propagator.  Unequal slabs use the round-trip condition
/// eig(R1 X R2 X) = 1.
class CavityPoleProblem {
 public:
  CavityPoleProblem(CavitySpec cavity, RcwaConfig cfg);

  const CavitySpec& cavity() const { return cavity_; }
  const RcwaSolver& solver() const { return solver_; }
  CavityPoleProblem with_gap(double gap) const;

  /// Parity Unknown selects the eigenvalue closest to either +1 or -1.
  PoleFunction function(Parity parity) const;
  cplx evaluate(cplx f, Parity parity) const;

  /// Parity of the gap eigenvector at a (raw) root, read from the field.
  Parity parity_at(cplx raw_root) const;
  /// Axial field in the gap built from the mode eigenvector at a raw root.
  FieldProfile gap_field(cplx raw_root, std::span<const double> grid) const;

 private:
  struct GapOperator {
    Eigen::MatrixXcd m;       // maps forward to backward amplitudes at the midplane
    Eigen::VectorXcd values;  // eigenvalues
    Eigen::MatrixXcd vectors;
  };
  GapOperator gap_operator(cplx f, bool want_vectors) const;

  CavitySpec cavity_;
  RcwaConfig cfg_;
  RcwaSolver solver_;
};

/// Generic pole search on an S-matrix function (f_c convention on both
/// guess and result).  Throws NumericalError on non-convergence.
Eigenmode find_pole(std::function<Eigen::MatrixXcd(cplx)> smatrix, cplx guess, const PoleOptions& opt = {});

/// Cavity pole near `guess`.  With parity Unknown both sectors are tried
/// and the converged root closest to the guess wins.  If the secant search
/// fails the real-frequency lineshape is fitted instead and the mode is
/// flagged fit_derived.
Eigenmode find_pole(const CavityPoleProblem& problem, cplx guess, Parity parity = Parity::Unknown,
                    const PoleOptions& opt = {});

/// Resonance estimate from the real-frequency transmittance lineshape
/// |a + b / (f - f0 + i g)|^2 around `guess`.
Eigenmode lineshape_pole(const CavityPoleProblem& problem, cplx guess);

/// Parity from the mirror correlation of an axial field about `midplane`.
/// |correlation| < 0.5 gives Unknown.
Parity classify_parity(const FieldProfile& field, double midplane);

struct ModeBranch {
  std::vector<Eigenmode> modes;
  std::vector<double> steps;  // |delta f_c| between neighbours
  bool truncated = false;
  std::string diagnostic;
};

struct TrackOptions {
  double jump_factor = 5.0;
  int max_halvings = 4;
  PoleOptions pole{};
};

/// Solver for one gap value: returns a converged mode or throws.
using GapSolver = std::function<Eigenmode(double q, cplx guess)>;

GapSolver cavity_gap_solver(const CavityPoleProblem& base, Parity parity, const PoleOptions& opt = {});

/// Continuation over a monotone q grid starting at `seed` (which must sit
/// at q_grid.front()).
ModeBranch track_mode(const GapSolver& solve, std::span<const double> q_grid, const Eigenmode& seed,
                      const TrackOptions& opt = {});

struct BicFit {
  double q0 = 0.0;
  double coeff = 0.0;  // Q(q) = coeff^2 / (q - q0)^2
  double q_min = 0.0, q_max = 0.0;
  double residual_rms = 0.0;
  double r_squared = 0.0;
  double q_peak = 0.0;  // location of the Q maximum
  double Q_peak = 0.0;
  int points = 0;
};

struct BicOptions {
  /// Half width of the regression window around q0.  The law is
  /// asymptotic; cubic terms in Im[f_c] skew wider windows.
  double window = 0.005;
  /// Points closer than this to q0 are excluded (numerical floor).
  double exclusion = 5e-4;
  double golden_tolerance = 1e-6;
};

/// Locates the Q maximum of a branch (golden-section search through
/// `refine` when given, else on the sampled branch) and fits
/// 1/sqrt(Q) = |q - q0| / coeff.
BicFit locate_bic(const ModeBranch& branch, const GapSolver* refine = nullptr, const BicOptions& opt = {});

struct BandPoint {
  std::array<double, 2> k{0.0, 0.0};
  Polarization sector = Polarization::X;
  std::optional<Eigenmode> mode;
  std::string error;
};

/// Poles near `guess` (f_c convention) at every k of the path, followed by
/// continuation in both mirror sectors of the Gamma-X line (x and y
/// incidence).  Failures are reported per point.
std::vector<BandPoint> band_structure(const CavitySpec& cavity, std::span<const std::array<double, 2>> k_path,
                                      RcwaConfig cfg, cplx guess, Parity parity = Parity::Even);

/// CSV with columns q/lambda0, Re[f_c]/f0, Im[f_c]/f0, Q, parity, residual.
std::string branch_csv(const ModeBranch& branch);

}  // namespace bicavity
