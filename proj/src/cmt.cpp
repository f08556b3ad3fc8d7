#include "bicavity/cmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "lsq.hpp"

namespace bicavity {

namespace {

// Per-slab port model: resonance, direct path and the common coupling
// coefficient d (input from either side equals output into either side).
struct Port {
  double omega_f;
  double kappa;  // total
  cplx r;
  cplx t;        // physical direct transmission is i t
  cplx d;
};

Port make_port(const FanoParams& p, const DirectPath& bg) {
  return {p.omega_f, p.kappa_e + p.kappa_i, bg.r_d, bg.t_d, std::sqrt(-p.kappa_e * (bg.r_d + I * bg.t_d))};
}

// Flat background: no direct path, |d|^2 = kappa_e with the same phase
// reference as a background satisfying r_d + i t_d = 1.
Port flat_port(const FanoParams& p) {
  return {p.omega_f, p.kappa_e + p.kappa_i, 0.0, 0.0, std::sqrt(cplx(-p.kappa_e, 0.0))};
}

ScatteringAmplitudes solve_pair(const Port& p1, const Port& p2, double zeta, double omega, double q) {
  const cplx e = std::exp(I * 2.0 * pi * omega * q);
  // Unknowns: A1, A2, u (leaves slab 1 to the right), v (leaves slab 2 to the left).
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
  m(0, 0) = -I * omega + I * p1.omega_f + p1.kappa;
  m(0, 1) = -I * zeta;
  m(0, 3) = -p1.d * e;
  rhs(0) = p1.d;
  m(1, 0) = -I * zeta;
  m(1, 1) = -I * omega + I * p2.omega_f + p2.kappa;
  m(1, 2) = -p2.d * e;
  m(2, 0) = -p1.d;
  m(2, 2) = 1.0;
  m(2, 3) = -p1.r * e;
  rhs(2) = I * p1.t;
  m(3, 1) = -p2.d;
  m(3, 2) = -p2.r * e;
  m(3, 3) = 1.0;
  const Eigen::Vector4cd x = m.partialPivLu().solve(rhs);

  ScatteringAmplitudes out;
  out.r = p1.r + I * p1.t * e * x(3) + p1.d * x(0);
  out.t = I * p2.t * e * x(2) + p2.d * x(1);
  out.R = std::norm(out.r);
  out.T = std::norm(out.t);
  return out;
}

}  // namespace

Background constant_background(DirectPath p) {
  return [p](double) { return p; };
}

Background slab_background(const PhcSlabSpec& slab) {
  const LayerStack stack = effective_stack(slab);
  return [stack](double omega) {
    const ScatteringAmplitudes s = tmm_scatter(stack, omega);
    return DirectPath{s.r, -I * s.t};
  };
}

void FanoParams::validate() const {
  if (!(omega_f > 0.0)) throw std::invalid_argument("FanoParams: omega_f must be positive");
  if (!(kappa_e > 0.0)) throw std::invalid_argument("FanoParams: kappa_e must be positive");
  if (!(kappa_i >= 0.0)) throw std::invalid_argument("FanoParams: kappa_i must be non-negative");
}

ScatteringAmplitudes fano_rt(const FanoParams& p, double omega, const Background& background) {
  if (!(omega > 0.0)) throw std::invalid_argument("fano_rt: omega must be positive");
  const DirectPath bg = background ? background(omega) : p.direct();
  const Port s = make_port(p, bg);
  const cplx delta = omega - p.omega_f;
  const cplx den = delta + I * s.kappa;
  ScatteringAmplitudes out;
  out.r = bg.r_d + I * s.d * s.d / den;
  out.t = I * bg.t_d + I * s.d * s.d / den;
  out.R = std::norm(out.r);
  out.T = std::norm(out.t);
  return out;
}

double DoubleSlabCmt::zeta(double q) const { return zeta_c * std::exp(-q / zeta_delta); }

DirectPath DoubleSlabCmt::direct(double omega) const { return background ? background(omega) : fano.direct(); }

ScatteringAmplitudes double_slab_response(const DoubleSlabCmt& m, double omega, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("double_slab_response: gap must be positive");
  const Port p = m.flat_background ? flat_port(m.fano) : make_port(m.fano, m.direct(omega));
  return solve_pair(p, p, m.zeta(q), omega, q);
}

ScatteringAmplitudes double_slab_response(const FanoParams& slab1, const FanoParams& slab2, double zeta,
                                          double omega, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("double_slab_response: gap must be positive");
  return solve_pair(make_port(slab1, slab1.direct()), make_port(slab2, slab2.direct()), zeta, omega, q);
}

std::string to_string(Parity p) {
  switch (p) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    default: return "unknown";
  }
}

std::pair<Supermode, Supermode> supermodes(const DoubleSlabCmt& m, double q) {
  const double k0q = 2.0 * pi * m.fano.omega_f * q;
  const double split = m.zeta(q) - m.fano.kappa_e * std::sin(k0q);
  const double base = m.fano.kappa_e + m.fano.kappa_i;
  const double rad = m.fano.kappa_e * std::cos(k0q);
  return {Supermode{Parity::Even, m.fano.omega_f - split, base + rad},
          Supermode{Parity::Odd, m.fano.omega_f + split, base - rad}};
}

std::pair<cplx, cplx> supermode_eigenvalues(const DoubleSlabCmt& m, double q) {
  const Port p = flat_port(m.fano);
  const double z = m.zeta(q);
  // omega A = H(omega) A with H = [[w0, c], [c, w0]],
  // w0 = omega_F - i kappa, c = -zeta + i d^2 exp(i k q); eigenvalues w0 +- c.
  auto branch = [&](double sign) {
    cplx w = m.fano.omega_f;
    for (int it = 0; it < 200; ++it) {
      const cplx c = -z + I * p.d * p.d * std::exp(I * 2.0 * pi * w * q);
      const cplx next = p.omega_f - I * p.kappa + sign * c;
      if (std::abs(next - w) < 1e-15) return next;
      w = next;
    }
    return w;
  };
  return {branch(+1.0), branch(-1.0)};
}

std::vector<double> bic_locations(const DoubleSlabCmt& m, double q_max) {
  if (!(q_max > 0.0)) throw std::invalid_argument("bic_locations: q_max must be positive");
  std::vector<double> out;
  const double half = 0.5 / m.fano.omega_f;
  for (int k = 1; k * half <= q_max * (1.0 + 1e-12); ++k) out.push_back(k * half);
  return out;
}

std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Converged: return "converged";
    case FitStatus::MaxIterations: return "max-iterations";
    default: return "degenerate";
  }
}

namespace {

double rms(const Eigen::VectorXd& r) { return r.size() ? std::sqrt(r.squaredNorm() / double(r.size())) : 0.0; }

detail::LsqOptions lsq_options(const FitOptions& opt) {
  detail::LsqOptions o;
  o.max_iterations = opt.max_iterations;
  o.step_tolerance = opt.step_tolerance;
  return o;
}

// Half width of the feature centred on `idx`, from the points where the
// deviation from `base` drops below half of its extremum.
double half_width(std::span<const double> x, std::span<const double> y, std::size_t idx, double base) {
  const double half = 0.5 * std::abs(y[idx] - base);
  double left = -1.0, right = -1.0;
  for (std::size_t i = idx; i-- > 0;)
    if (std::abs(y[i] - base) < half) {
      left = x[idx] - x[i];
      break;
    }
  for (std::size_t i = idx + 1; i < y.size(); ++i)
    if (std::abs(y[i] - base) < half) {
      right = x[i] - x[idx];
      break;
    }
  if (left > 0 && right > 0) return 0.5 * (left + right);
  if (left > 0) return left;
  if (right > 0) return right;
  return 0.1 * (x.back() - x.front());
}

}  // namespace

FitReport fit_fano(std::span<const SpectrumSample> spectrum, const Background& background, const FitOptions& opt) {
  FitReport rep;
  const std::size_t n = spectrum.size();
  if (n < 8) {
    rep.status = FitStatus::Degenerate;
    rep.message = "need at least 8 samples";
    return rep;
  }
  if (!background) throw std::invalid_argument("fit_fano: background required");

  std::vector<double> w(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = spectrum[i].omega;
    t[i] = spectrum[i].T;
  }
  if (!std::is_sorted(w.begin(), w.end())) throw std::invalid_argument("fit_fano: samples must be sorted");

  std::vector<double> sorted = t;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double base = sorted[n / 2];
  std::size_t ext = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(t[i] - base) > std::abs(t[ext] - base)) ext = i;
  if (std::abs(t[ext] - base) < 1e-3 || ext == 0 || ext == n - 1) {
    rep.status = FitStatus::Degenerate;
    rep.message = "no interior transmission extremum";
    return rep;
  }
  const double hw = half_width(w, t, ext, base);

  const int np = opt.fit_kappa_i ? 3 : 2;
  auto unpack = [&](const Eigen::VectorXd& x) {
    FanoParams p;
    p.omega_f = x(0);
    p.kappa_e = std::exp(x(1));
    p.kappa_i = opt.fit_kappa_i ? x(2) * x(2) : 0.0;
    return p;
  };
  const detail::Residual residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const FanoParams p = unpack(x);
    r.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const ScatteringAmplitudes s = fano_rt(p, w[i], background);
      r(2 * i) = s.R - spectrum[i].R;
      r(2 * i + 1) = s.T - spectrum[i].T;
    }
  };

  // Starting points: the extremum itself, and for a transmission zero the
  // resonance it implies through the background ratio.
  std::vector<double> centres{w[ext]};
  const DirectPath bg = background(w[ext]);
  if (t[ext] < base && std::abs(bg.t_d) > 0.0) centres.push_back(w[ext] - std::real(bg.r_d / bg.t_d) * hw);

  detail::LsqResult best;
  best.cost = std::numeric_limits<double>::infinity();
  double init_cost = std::numeric_limits<double>::infinity();
  for (double c : centres) {
    for (double scale : {1.0, 0.3, 3.0}) {
      Eigen::VectorXd x0(np);
      x0(0) = c;
      x0(1) = std::log(scale * hw);
      if (np == 3) x0(2) = std::sqrt(1e-3 * hw);
      detail::LsqResult res = detail::least_squares(residual, int(2 * n), x0, lsq_options(opt));
      init_cost = std::min(init_cost, res.initial_cost);
      if (res.cost < best.cost) best = res;
    }
  }

  rep.fano = unpack(best.x);
  const DirectPath at = background(rep.fano.omega_f);
  rep.fano.r_d = at.r_d;
  rep.fano.t_d = at.t_d;
  Eigen::VectorXd r;
  residual(best.x, r);
  rep.residual_rms = rms(r);
  rep.initial_rms = std::sqrt(2.0 * init_cost / double(2 * n));
  rep.iterations = best.iterations;
  rep.status = best.converged ? FitStatus::Converged : FitStatus::MaxIterations;
  if (!best.converged) rep.message = "iteration limit reached; best parameters returned";
  return rep;
}

FitReport fit_zeta(const DoubleSlabCmt& model, double omega, std::span<const SliceSample> slice,
                   const FitOptions& opt) {
  FitReport rep;
  rep.fano = model.fano;
  const std::size_t n = slice.size();
  if (n < 4) {
    rep.status = FitStatus::Degenerate;
    rep.message = "need at least 4 samples";
    return rep;
  }
  double tmin = 1.0, tmax = 0.0;
  for (const auto& s : slice) {
    tmin = std::min(tmin, s.T);
    tmax = std::max(tmax, s.T);
  }
  if (tmax - tmin < 1e-3) {
    rep.status = FitStatus::Degenerate;
    rep.message = "slice has no transmission peak";
    return rep;
  }

  // x = (C, log delta[, omega_F, log kappa_e])
  auto unpack = [&](const Eigen::VectorXd& x) {
    DoubleSlabCmt m = model;
    m.zeta_c = x(0);
    m.zeta_delta = std::exp(x(1));
    if (x.size() == 4) {
      m.fano.omega_f = x(2);
      m.fano.kappa_e = std::exp(x(3));
    }
    return m;
  };
  const detail::Residual residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const DoubleSlabCmt m = unpack(x);
    r.resize(n);
    for (std::size_t i = 0; i < n; ++i) r(i) = double_slab_response(m, omega, slice[i].q).T - slice[i].T;
  };
  auto cost_at = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r;
    residual(x, r);
    return r.squaredNorm();
  };

  // Coarse grid for starting points; the coupling scale follows the slab
  // linewidth.  The cost surface has several basins, so LM runs from the
  // best few.
  const double k = model.fano.kappa_e;
  std::vector<std::pair<double, Eigen::VectorXd>> starts;
  double initial = 0.0;
  for (double c : {0.0, 0.3, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0}) {
    for (double d : {0.03, 0.05, 0.08, 0.12, 0.18, 0.27, 0.4}) {
      Eigen::VectorXd x(2);
      x << c * k, std::log(d);
      const double v = cost_at(x);
      if (c == 0.0 && d == 0.12) initial = v;
      if (std::isfinite(v)) starts.emplace_back(v, x);
    }
  }
  std::sort(starts.begin(), starts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (starts.size() > 3) starts.resize(3);

  const detail::LsqOptions lo = lsq_options(opt);
  detail::LsqResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (const auto& [v, x0] : starts) {
    detail::LsqResult res = detail::least_squares(residual, int(n), x0, lo);
    // An exact start (noiseless data at a grid point) leaves nothing to do.
    if (v == 0.0) res.converged = true;
    if (res.cost < best.cost) best = std::move(res);
  }
  if (!std::isfinite(best.cost)) {
    rep.status = FitStatus::Degenerate;
    rep.message = "model undefined on the slice";
    return rep;
  }
  if (opt.refine_fano) {
    Eigen::VectorXd x4(4);
    x4 << best.x(0), best.x(1), model.fano.omega_f, std::log(model.fano.kappa_e);
    detail::LsqResult res = detail::least_squares(residual, int(n), x4, lo);
    if (res.cost <= best.cost) best = std::move(res);
  }

  const DoubleSlabCmt fitted = unpack(best.x);
  rep.fano = fitted.fano;
  rep.zeta = ZetaParams{fitted.zeta_c, fitted.zeta_delta};
  Eigen::VectorXd r;
  residual(best.x, r);
  rep.residual_rms = rms(r);
  rep.initial_rms = std::sqrt(initial / double(n));
  rep.iterations = best.iterations;
  rep.status = best.converged ? FitStatus::Converged : FitStatus::MaxIterations;
  if (!rep.converged()) rep.message = "iteration limit reached; best parameters returned";
  return rep;
}

}  // namespace bicavity
