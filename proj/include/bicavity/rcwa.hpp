#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bicavity/stack_optics.hpp"
#include "bicavity/structure.hpp"
#include "bicavity/units.hpp"

namespace bicavity {

enum class Factorization { Laurent, InverseRule };
enum class Polarization { X, Y };

std::string to_string(Factorization f);
std::string to_string(Polarization p);

struct RcwaConfig {
  static constexpr int kMaxHalfOrder = 15;

  /// Plane waves per axis are 2M+1.
  int half_order = 4;
  Factorization factorization = Factorization::Laurent;
  Polarization polarization = Polarization::X;
  /// In-plane Bloch wavevector in units of 2 pi / period.
  std::array<double, 2> bloch_k{0.0, 0.0};
  /// Restrict to the mirror-symmetry sector that contains the incident
  /// zero order when the Bloch vector allows it.
  bool use_symmetry = true;

  void validate() const;
};

/// 2D Fourier coefficients of a piecewise-constant function on the unit cell
/// with one centred circular inclusion, indexed by (dm, dn) in [-2M, 2M].
struct FourierCoefficients {
  int max_order = 0;  // 2M
  Eigen::MatrixXcd values;

  cplx at(int dm, int dn) const { return values(dm + max_order, dn + max_order); }
};

/// Analytic circle transform of eps(x, y) up to difference order 2M.
FourierCoefficients permittivity_fourier(const PhcSlabSpec& slab, int half_order);
/// Same transform applied to 1/eps (used by the inverse-rule factorization).
FourierCoefficients inverse_permittivity_fourier(const PhcSlabSpec& slab, int half_order);

/// Scattering matrix between two vacuum reference planes, in the solver's
/// (possibly symmetry-reduced) electric-field basis.
struct SMatrix {
  Eigen::MatrixXcd s11, s12, s21, s22;

  static SMatrix identity(Eigen::Index n);
};

/// Redheffer star product: `a` on the left, `b` on the right.
SMatrix star(const SMatrix& a, const SMatrix& b);

/// Fourier modal solver for stacks of slabs sharing one square lattice.
/// Immutable after construction; all methods are safe to call concurrently.
class RcwaSolver {
 public:
  RcwaSolver(double period, RcwaConfig cfg);

  const RcwaConfig& config() const { return cfg_; }
  double period() const { return period_; }
  /// Number of Fourier orders N = (2M+1)^2.
  int orders() const { return static_cast<int>(m_.size()); }
  /// Dimension of the active basis (2N without symmetry reduction).
  int dimension() const { return static_cast<int>(e_basis_.size()); }
  bool reduced() const { return reduced_; }

  /// S-matrix of one slab.  Throws NumericalError if the layer
  /// eigenproblem fails.
  SMatrix slab_smatrix(const PhcSlabSpec& slab, cplx freq, int layer_index = 0) const;
  /// Diagonal propagation through a vacuum gap.
  SMatrix gap_smatrix(double gap, cplx freq) const;
  /// exp(i kz gap) of each basis vector in vacuum.
  Eigen::VectorXcd gap_phase(double gap, cplx freq) const;

  /// Full structure S-matrix (outer faces as reference planes).
  SMatrix structure_smatrix(const PhcSlabSpec& slab, cplx freq) const;
  SMatrix structure_smatrix(const CavitySpec& cavity, cplx freq) const;

  /// Zero-order amplitudes for the configured polarization, plus R and T
  /// summed over all propagating orders.
  ScatteringAmplitudes zero_order(const SMatrix& s, cplx freq) const;
  ScatteringAmplitudes zero_order_from_right(const SMatrix& s, cplx freq) const;

  ScatteringAmplitudes scatter(const PhcSlabSpec& slab, cplx freq) const;
  ScatteringAmplitudes scatter(const CavitySpec& cavity, cplx freq) const;

  /// Axial field of the configured polarization at the unit-cell centre.
  FieldProfile field_profile(const PhcSlabSpec& slab, cplx freq, std::span<const double> grid) const;
  FieldProfile field_profile(const CavitySpec& cavity, cplx freq, std::span<const double> grid) const;

  /// Incident zero-order vector in the active basis.
  Eigen::VectorXcd incident() const;
  /// Row vector summing the configured field component over all orders.
  Eigen::RowVectorXcd centre_probe() const;

 private:
  struct LayerModes {
    Eigen::MatrixXcd w, w_inv;
    Eigen::VectorXcd beta;
    Eigen::MatrixXcd a, b;  // interface matrices against vacuum
    double thickness = 0.0;
  };

  LayerModes slab_modes(const PhcSlabSpec& slab, cplx freq, int layer_index) const;
  SMatrix layer_smatrix(const LayerModes& modes, cplx freq) const;
  Eigen::VectorXcd vacuum_beta(cplx freq) const;  // active basis
  LayerModes vacuum_modes(double thickness, cplx freq) const;
  Eigen::MatrixXcd vacuum_admittance(cplx freq) const;  // full basis, e -> h
  Eigen::MatrixXcd project(const Eigen::MatrixXcd& full, bool rows_h, bool cols_h) const;
  Eigen::VectorXcd expand(const Eigen::VectorXcd& reduced) const;
  ScatteringAmplitudes power(const Eigen::VectorXcd& reflected, const Eigen::VectorXcd& transmitted,
                             cplx freq) const;
  FieldProfile layered_profile(const std::vector<LayerModes>& layers, cplx freq,
                               std::span<const double> grid) const;

  double period_;
  RcwaConfig cfg_;
  bool reduced_ = false;
  std::vector<int> m_, n_;
  std::vector<double> kx_, ky_;  // lambda0^-1
  int zero_ = 0;
  int incident_index_ = 0;
  // Sparse symmetry-adapted basis vectors for electric and magnetic fields.
  using Sparse = std::vector<std::pair<int, double>>;
  std::vector<Sparse> e_basis_, h_basis_;
};

ScatteringAmplitudes rcwa_scatter(const PhcSlabSpec& slab, cplx freq, const RcwaConfig& cfg);
ScatteringAmplitudes rcwa_scatter(const CavitySpec& cavity, cplx freq, const RcwaConfig& cfg);
FieldProfile rcwa_field_profile(const CavitySpec& cavity, cplx freq, const RcwaConfig& cfg,
                                std::span<const double> grid);

}  // namespace bicavity
