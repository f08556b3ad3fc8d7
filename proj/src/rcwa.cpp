#include "bicavity/rcwa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bicavity/error.hpp"
#include "linalg.hpp"

namespace bicavity {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

std::string to_string(Factorization f) { return f == Factorization::Laurent ? "laurent" : "inverse-rule"; }
std::string to_string(Polarization p) { return p == Polarization::X ? "x" : "y"; }

void RcwaConfig::validate() const {
  if (half_order < 0 || half_order > kMaxHalfOrder)
    throw std::invalid_argument("RcwaConfig: half_order must lie in [0, " + std::to_string(kMaxHalfOrder) + "]");
  for (double k : bloch_k)
    if (!(std::abs(k) <= 0.5)) throw std::invalid_argument("RcwaConfig: Bloch vector outside the first Brillouin zone");
}

namespace {

// Circle transform: 2 eta J1(|G| a) / (|G| a) per unit contrast.
FourierCoefficients circle_transform(const PhcSlabSpec& slab, int half_order, cplx inside, cplx outside) {
  slab.validate();
  const int mo = 2 * half_order;
  FourierCoefficients out;
  out.max_order = mo;
  out.values = MatrixXcd::Zero(2 * mo + 1, 2 * mo + 1);
  const double eta = slab.fill_factor();
  const double g0 = 2.0 * pi / slab.period;
  for (int dm = -mo; dm <= mo; ++dm) {
    for (int dn = -mo; dn <= mo; ++dn) {
      cplx v;
      if (dm == 0 && dn == 0) {
        v = outside + eta * (inside - outside);
      } else if (slab.hole_radius == 0.0) {
        v = 0.0;
      } else {
        const double x = g0 * std::hypot(double(dm), double(dn)) * slab.hole_radius;
        v = (inside - outside) * 2.0 * eta * std::cyl_bessel_j(1.0, x) / x;
      }
      out.values(dm + mo, dn + mo) = v;
    }
  }
  return out;
}

// exp(-i w t): forward waves carry exp(+i kz z); pick the root lying on the
// propagating/decaying side.  Vanishing roots are shifted to keep 1/beta finite.
cplx forward_root(cplx beta2) {
  cplx b = std::sqrt(beta2);
  if (b.real() + b.imag() < 0.0) b = -b;
  if (std::abs(b) < 1e-10) b = 1e-10;
  return b;
}

}  // namespace

FourierCoefficients permittivity_fourier(const PhcSlabSpec& slab, int half_order) {
  return circle_transform(slab, half_order, slab.hole.permittivity(), slab.slab.permittivity());
}

FourierCoefficients inverse_permittivity_fourier(const PhcSlabSpec& slab, int half_order) {
  return circle_transform(slab, half_order, 1.0 / slab.hole.permittivity(), 1.0 / slab.slab.permittivity());
}

SMatrix SMatrix::identity(Eigen::Index n) {
  return {MatrixXcd::Zero(n, n), MatrixXcd::Identity(n, n), MatrixXcd::Identity(n, n), MatrixXcd::Zero(n, n)};
}

SMatrix star(const SMatrix& a, const SMatrix& b) {
  const Eigen::Index n = a.s11.rows();
  const MatrixXcd id = MatrixXcd::Identity(n, n);
  const MatrixXcd d = (id - b.s11 * a.s22).transpose().partialPivLu().solve(a.s12.transpose()).transpose();
  const MatrixXcd f = (id - a.s22 * b.s11).transpose().partialPivLu().solve(b.s21.transpose()).transpose();
  SMatrix out;
  out.s11 = a.s11 + d * b.s11 * a.s21;
  out.s12 = d * b.s12;
  out.s21 = f * a.s21;
  out.s22 = b.s22 + f * a.s22 * b.s12;
  return out;
}

RcwaSolver::RcwaSolver(double period, RcwaConfig cfg) : period_(period), cfg_(cfg) {
  if (!(period > 0.0)) throw std::invalid_argument("RcwaSolver: period must be positive");
  cfg_.validate();

  const int mh = cfg_.half_order;
  const double g0 = 2.0 * pi / period_;
  for (int m = -mh; m <= mh; ++m) {
    for (int n = -mh; n <= mh; ++n) {
      if (m == 0 && n == 0) zero_ = static_cast<int>(m_.size());
      m_.push_back(m);
      n_.push_back(n);
      kx_.push_back(g0 * (cfg_.bloch_k[0] + m));
      ky_.push_back(g0 * (cfg_.bloch_k[1] + n));
    }
  }
  const int nord = orders();
  auto order_index = [&](int m, int n) { return (m + mh) * (2 * mh + 1) + (n + mh); };

  // Mirror group compatible with the Bloch vector.  A group element is
  // (flip_x, flip_y); the sector character follows from the incident
  // polarization: an x-polarized zero order is odd under x -> -x and even
  // under y -> -y, and the other way round for y.
  const bool sx = cfg_.use_symmetry && cfg_.bloch_k[0] == 0.0;
  const bool sy = cfg_.use_symmetry && cfg_.bloch_k[1] == 0.0;
  const bool xpol = cfg_.polarization == Polarization::X;
  struct Element {
    bool fx, fy;
  };
  std::vector<Element> group{{false, false}};
  if (sx) group.push_back({true, false});
  if (sy) group.push_back({false, true});
  if (sx && sy) group.push_back({true, true});
  reduced_ = group.size() > 1;

  auto character = [&](const Element& g) {
    double c = 1.0;
    if (g.fx) c *= xpol ? -1.0 : 1.0;
    if (g.fy) c *= xpol ? 1.0 : -1.0;
    return c;
  };
  // Sign picked up by component `comp` (0 = x, 1 = y) of a polar vector.
  auto polar_sign = [](const Element& g, int comp) {
    double s = 1.0;
    if (g.fx && comp == 0) s = -s;
    if (g.fy && comp == 1) s = -s;
    return s;
  };

  auto build = [&](bool axial) {
    std::vector<Sparse> basis;
    std::vector<char> seen(2 * nord, 0);
    for (int i = 0; i < 2 * nord; ++i) {
      if (seen[i]) continue;
      const int comp = i / nord;
      const int k = i % nord;
      std::vector<double> acc(2 * nord, 0.0);
      for (const auto& g : group) {
        const int mm = g.fx ? -m_[k] : m_[k];
        const int nn = g.fy ? -n_[k] : n_[k];
        const int j = comp * nord + order_index(mm, nn);
        double s = polar_sign(g, comp);
        if (axial && (g.fx != g.fy)) s = -s;  // pseudovector: extra det = -1
        acc[j] += character(g) * s;
        seen[j] = 1;
      }
      Sparse v;
      double norm = 0.0;
      for (int j = 0; j < 2 * nord; ++j)
        if (std::abs(acc[j]) > 1e-12) {
          v.emplace_back(j, acc[j]);
          norm += acc[j] * acc[j];
        }
      if (v.empty()) continue;
      norm = std::sqrt(norm);
      for (auto& [j, c] : v) c /= norm;
      basis.push_back(std::move(v));
    }
    return basis;
  };
  e_basis_ = build(false);
  h_basis_ = build(true);
  if (e_basis_.size() != h_basis_.size())
    throw NumericalError("RcwaSolver: inconsistent symmetry sectors");

  const int target = (xpol ? 0 : nord) + zero_;
  incident_index_ = -1;
  for (std::size_t a = 0; a < e_basis_.size(); ++a)
    for (const auto& [j, c] : e_basis_[a])
      if (j == target) incident_index_ = static_cast<int>(a);
  if (incident_index_ < 0) throw NumericalError("RcwaSolver: incident order missing from sector");
}

MatrixXcd RcwaSolver::project(const MatrixXcd& full, bool rows_h, bool cols_h) const {
  const auto& rb = rows_h ? h_basis_ : e_basis_;
  const auto& cb = cols_h ? h_basis_ : e_basis_;
  if (!reduced_) return full;
  MatrixXcd out(rb.size(), cb.size());
  for (std::size_t a = 0; a < rb.size(); ++a) {
    for (std::size_t b = 0; b < cb.size(); ++b) {
      cplx s = 0.0;
      for (const auto& [i, u] : rb[a])
        for (const auto& [j, v] : cb[b]) s += u * v * full(i, j);
      out(a, b) = s;
    }
  }
  return out;
}

VectorXcd RcwaSolver::expand(const VectorXcd& reduced) const {
  if (!reduced_) return reduced;
  VectorXcd full = VectorXcd::Zero(2 * orders());
  for (std::size_t a = 0; a < e_basis_.size(); ++a)
    for (const auto& [i, u] : e_basis_[a]) full(i) += u * reduced(a);
  return full;
}

VectorXcd RcwaSolver::vacuum_beta(cplx freq) const {
  const cplx k0 = 2.0 * pi * freq;
  VectorXcd beta(dimension());
  for (int a = 0; a < dimension(); ++a) {
    const int k = e_basis_[a].front().first % orders();
    const cplx kx = kx_[k] / k0, ky = ky_[k] / k0;
    beta(a) = forward_root(1.0 - kx * kx - ky * ky);
  }
  return beta;
}

MatrixXcd RcwaSolver::vacuum_admittance(cplx freq) const {
  // h = Q0 beta0^-1 e with Q0 = [[-Kx Ky, Kx^2 - 1], [1 - Ky^2, Ky Kx]].
  const int n = orders();
  const cplx k0 = 2.0 * pi * freq;
  MatrixXcd v = MatrixXcd::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    const cplx kx = kx_[k] / k0, ky = ky_[k] / k0;
    const cplx inv_beta = 1.0 / forward_root(1.0 - kx * kx - ky * ky);
    v(k, k) = -kx * ky * inv_beta;
    v(k, n + k) = (kx * kx - 1.0) * inv_beta;
    v(n + k, k) = (1.0 - ky * ky) * inv_beta;
    v(n + k, n + k) = ky * kx * inv_beta;
  }
  return v;
}

RcwaSolver::LayerModes RcwaSolver::vacuum_modes(double thickness, cplx freq) const {
  const int d = dimension();
  LayerModes out;
  out.w = MatrixXcd::Identity(d, d);
  out.w_inv = out.w;
  out.beta = vacuum_beta(freq);
  out.a = 2.0 * out.w;
  out.b = MatrixXcd::Zero(d, d);
  out.thickness = thickness;
  return out;
}

RcwaSolver::LayerModes RcwaSolver::slab_modes(const PhcSlabSpec& slab, cplx freq, int layer_index) const {
  if (!(freq.real() > 0.0)) throw std::invalid_argument("rcwa: frequency must have a positive real part");
  if (slab.period != period_) throw std::invalid_argument("rcwa: slab period differs from the solver lattice");
  const int n = orders();
  const cplx k0 = 2.0 * pi * freq;

  const FourierCoefficients eps = permittivity_fourier(slab, cfg_.half_order);
  MatrixXcd e(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e(i, j) = eps.at(m_[i] - m_[j], n_[i] - n_[j]);

  MatrixXcd einv;
  if (cfg_.factorization == Factorization::Laurent) {
    einv = e.partialPivLu().inverse();
  } else {
    const FourierCoefficients inv = inverse_permittivity_fourier(slab, cfg_.half_order);
    einv.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) einv(i, j) = inv.at(m_[i] - m_[j], n_[i] - n_[j]);
  }

  VectorXcd kx(n), ky(n);
  for (int i = 0; i < n; ++i) {
    kx(i) = kx_[i] / k0;
    ky(i) = ky_[i] / k0;
  }

  // d/dz' e = i P h,  d/dz' h = i Q e   (z' = k0 z)
  MatrixXcd p(2 * n, 2 * n), q(2 * n, 2 * n);
  p.topLeftCorner(n, n) = kx.asDiagonal() * einv * ky.asDiagonal();
  p.topRightCorner(n, n) = -(kx.asDiagonal() * einv * kx.asDiagonal());
  p.topRightCorner(n, n).diagonal().array() += 1.0;
  p.bottomLeftCorner(n, n) = ky.asDiagonal() * einv * ky.asDiagonal();
  p.bottomLeftCorner(n, n).diagonal().array() -= 1.0;
  p.bottomRightCorner(n, n) = -(ky.asDiagonal() * einv * kx.asDiagonal());

  q.topLeftCorner(n, n) = MatrixXcd::Zero(n, n);
  q.topLeftCorner(n, n).diagonal() = -(kx.array() * ky.array()).matrix();
  q.topRightCorner(n, n) = -e;
  q.topRightCorner(n, n).diagonal() += (kx.array() * kx.array()).matrix();
  q.bottomLeftCorner(n, n) = e;
  q.bottomLeftCorner(n, n).diagonal() -= (ky.array() * ky.array()).matrix();
  q.bottomRightCorner(n, n) = MatrixXcd::Zero(n, n);
  q.bottomRightCorner(n, n).diagonal() = (ky.array() * kx.array()).matrix();

  const MatrixXcd ps = project(p, false, true);
  const MatrixXcd qs = project(q, true, false);
  const MatrixXcd v0s = project(vacuum_admittance(freq), true, false);

  const detail::EigenDecomposition ed = detail::eig(ps * qs);
  if (ed.info != 0)
    throw NumericalError("rcwa: layer eigendecomposition failed (layer " + std::to_string(layer_index) +
                         ", info " + std::to_string(ed.info) + ")");

  LayerModes out;
  out.thickness = slab.thickness;
  out.w = ed.vectors;
  out.beta.resize(ed.values.size());
  for (Eigen::Index i = 0; i < ed.values.size(); ++i) out.beta(i) = forward_root(ed.values(i));
  Eigen::PartialPivLU<MatrixXcd> lu(out.w);
  out.w_inv = lu.inverse();
  if (!out.w_inv.allFinite())
    throw NumericalError("rcwa: singular mode matrix (layer " + std::to_string(layer_index) + ")");

  // V^-1 V0 = beta^-1 W^-1 P V0
  const MatrixXcd y = out.beta.cwiseInverse().asDiagonal() * (out.w_inv * (ps * v0s));
  out.a = out.w_inv + y;
  out.b = out.w_inv - y;
  return out;
}

SMatrix RcwaSolver::layer_smatrix(const LayerModes& modes, cplx freq) const {
  const cplx k0 = 2.0 * pi * freq;
  const VectorXcd x = (I * k0 * modes.thickness * modes.beta).array().exp().matrix();
  const MatrixXcd a_inv = modes.a.partialPivLu().inverse();
  const MatrixXcd xbax = x.asDiagonal() * (modes.b * a_inv) * x.asDiagonal();
  const MatrixXcd d = modes.a - xbax * modes.b;
  Eigen::PartialPivLU<MatrixXcd> lu(d);
  SMatrix s;
  s.s11 = lu.solve(xbax * modes.a - modes.b);
  s.s12 = lu.solve(x.asDiagonal() * (modes.a - modes.b * a_inv * modes.b));
  s.s21 = s.s12;
  s.s22 = s.s11;
  return s;
}

SMatrix RcwaSolver::slab_smatrix(const PhcSlabSpec& slab, cplx freq, int layer_index) const {
  return layer_smatrix(slab_modes(slab, freq, layer_index), freq);
}

VectorXcd RcwaSolver::gap_phase(double gap, cplx freq) const {
  const cplx k0 = 2.0 * pi * freq;
  return (I * k0 * gap * vacuum_beta(freq)).array().exp().matrix();
}

SMatrix RcwaSolver::gap_smatrix(double gap, cplx freq) const {
  const int d = dimension();
  SMatrix s;
  s.s11 = MatrixXcd::Zero(d, d);
  s.s22 = s.s11;
  s.s12 = gap_phase(gap, freq).asDiagonal();
  s.s21 = s.s12;
  return s;
}

SMatrix RcwaSolver::structure_smatrix(const PhcSlabSpec& slab, cplx freq) const {
  return slab_smatrix(slab, freq);
}

SMatrix RcwaSolver::structure_smatrix(const CavitySpec& cavity, cplx freq) const {
  cavity.validate();
  const SMatrix s1 = slab_smatrix(cavity.slab1, freq, 0);
  const SMatrix s2 = cavity.is_symmetric() ? s1 : slab_smatrix(cavity.slab2, freq, 2);
  return star(s1, star(gap_smatrix(cavity.gap, freq), s2));
}

VectorXcd RcwaSolver::incident() const {
  VectorXcd a = VectorXcd::Zero(dimension());
  a(incident_index_) = 1.0;
  return a;
}

Eigen::RowVectorXcd RcwaSolver::centre_probe() const {
  const int n = orders();
  const bool xpol = cfg_.polarization == Polarization::X;
  Eigen::RowVectorXcd probe = Eigen::RowVectorXcd::Zero(dimension());
  for (int a = 0; a < dimension(); ++a)
    for (const auto& [i, u] : e_basis_[a])
      if ((i < n) == xpol) probe(a) += u;
  return probe;
}

ScatteringAmplitudes RcwaSolver::power(const VectorXcd& reflected, const VectorXcd& transmitted,
                                       cplx freq) const {
  const int n = orders();
  const MatrixXcd v0 = vacuum_admittance(freq);
  auto flux = [&](const VectorXcd& e_reduced) {
    const VectorXcd e = expand(e_reduced);
    const VectorXcd h = v0 * e;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += std::real(e(k) * std::conj(h(n + k)) - e(n + k) * std::conj(h(k)));
    return s;
  };
  const double incident_flux = flux(incident());
  ScatteringAmplitudes out;
  out.r = reflected(incident_index_);
  out.t = transmitted(incident_index_);
  out.R = flux(reflected) / incident_flux;
  out.T = flux(transmitted) / incident_flux;
  return out;
}

ScatteringAmplitudes RcwaSolver::zero_order(const SMatrix& s, cplx freq) const {
  const VectorXcd a = incident();
  return power(s.s11 * a, s.s21 * a, freq);
}

ScatteringAmplitudes RcwaSolver::zero_order_from_right(const SMatrix& s, cplx freq) const {
  const VectorXcd a = incident();
  return power(s.s22 * a, s.s12 * a, freq);
}

ScatteringAmplitudes RcwaSolver::scatter(const PhcSlabSpec& slab, cplx freq) const {
  return zero_order(structure_smatrix(slab, freq), freq);
}

ScatteringAmplitudes RcwaSolver::scatter(const CavitySpec& cavity, cplx freq) const {
  return zero_order(structure_smatrix(cavity, freq), freq);
}

FieldProfile RcwaSolver::layered_profile(const std::vector<LayerModes>& layers, cplx freq,
                                         std::span<const double> grid) const {
  const int d = dimension();
  const std::size_t nl = layers.size();
  const cplx k0 = 2.0 * pi * freq;
  const MatrixXcd id = MatrixXcd::Identity(d, d);

  std::vector<SMatrix> s;
  s.reserve(nl);
  for (const auto& l : layers) s.push_back(layer_smatrix(l, freq));
  std::vector<SMatrix> left(nl + 1), right(nl + 1);
  left[0] = SMatrix::identity(d);
  for (std::size_t k = 0; k < nl; ++k) left[k + 1] = star(left[k], s[k]);
  right[nl] = SMatrix::identity(d);
  for (std::size_t k = nl; k-- > 0;) right[k] = star(s[k], right[k + 1]);

  // Forward/backward vacuum amplitudes on every interface.
  const VectorXcd a = incident();
  std::vector<VectorXcd> fwd(nl + 1), bwd(nl + 1);
  std::vector<double> edge(nl + 1, 0.0);
  for (std::size_t k = 0; k <= nl; ++k) {
    fwd[k] = (id - left[k].s22 * right[k].s11).partialPivLu().solve(left[k].s21 * a);
    bwd[k] = right[k].s11 * fwd[k];
    if (k > 0) edge[k] = edge[k - 1] + layers[k - 1].thickness;
  }

  const Eigen::RowVectorXcd probe = centre_probe();
  const VectorXcd beta0 = vacuum_beta(freq);
  auto phase = [&](const VectorXcd& beta, double dz) { return (I * k0 * dz * beta).array().exp().matrix(); };

  FieldProfile out;
  out.z.assign(grid.begin(), grid.end());
  out.e.reserve(grid.size());
  for (double z : grid) {
    VectorXcd e;
    if (z < 0.0) {
      e = phase(beta0, z).cwiseProduct(a) + phase(beta0, -z).cwiseProduct(bwd[0]);
    } else if (z >= edge[nl]) {
      e = phase(beta0, z - edge[nl]).cwiseProduct(fwd[nl]);
    } else {
      std::size_t k = 0;
      while (k + 1 < nl && z >= edge[k + 1]) ++k;
      const LayerModes& l = layers[k];
      const VectorXcd cf = 0.5 * (l.a * fwd[k] + l.b * bwd[k]);
      const VectorXcd cb = 0.5 * (l.b * fwd[k + 1] + l.a * bwd[k + 1]);
      e = l.w * (phase(l.beta, z - edge[k]).cwiseProduct(cf) + phase(l.beta, edge[k + 1] - z).cwiseProduct(cb));
    }
    out.e.push_back((probe * e)(0));
  }
  return out;
}

FieldProfile RcwaSolver::field_profile(const PhcSlabSpec& slab, cplx freq, std::span<const double> grid) const {
  return layered_profile({slab_modes(slab, freq, 0)}, freq, grid);
}

FieldProfile RcwaSolver::field_profile(const CavitySpec& cavity, cplx freq, std::span<const double> grid) const {
  cavity.validate();
  std::vector<LayerModes> layers;
  layers.push_back(slab_modes(cavity.slab1, freq, 0));
  layers.push_back(vacuum_modes(cavity.gap, freq));
  layers.push_back(cavity.is_symmetric() ? layers.front() : slab_modes(cavity.slab2, freq, 2));
  return layered_profile(layers, freq, grid);
}

ScatteringAmplitudes rcwa_scatter(const PhcSlabSpec& slab, cplx freq, const RcwaConfig& cfg) {
  return RcwaSolver(slab.period, cfg).scatter(slab, freq);
}

ScatteringAmplitudes rcwa_scatter(const CavitySpec& cavity, cplx freq, const RcwaConfig& cfg) {
  return RcwaSolver(cavity.slab1.period, cfg).scatter(cavity, freq);
}

FieldProfile rcwa_field_profile(const CavitySpec& cavity, cplx freq, const RcwaConfig& cfg,
                                std::span<const double> grid) {
  return RcwaSolver(cavity.slab1.period, cfg).field_profile(cavity, freq, grid);
}

}  // namespace bicavity
