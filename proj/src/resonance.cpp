#include "bicavity/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bicavity/error.hpp"
#include "linalg.hpp"
#include "lsq.hpp"

namespace bicavity {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

Eigenmode Eigenmode::from_raw(cplx root, double q, Parity parity, double residual) {
  Eigenmode m;
  m.f_c = std::conj(root);
  m.q = q;
  m.parity = parity;
  m.residual = residual;
  m.Q = m.f_c.imag() > 0.0 ? m.f_c.real() / (2.0 * m.f_c.imag()) : std::numeric_limits<double>::infinity();
  return m;
}

RootResult find_root(const PoleFunction& h, cplx guess, const PoleOptions& opt) {
  RootResult out;
  cplx x0 = guess;
  cplx x1 = guess + cplx(std::max(1e-6, 1e-3 * std::abs(guess.imag())), 0.0);
  cplx h0 = h(x0), h1 = h(x1);
  out.trace.push_back(x0);
  out.trace.push_back(x1);
  for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
    const cplx dh = h1 - h0;
    if (dh == 0.0 || !std::isfinite(std::abs(dh))) break;
    cplx step = -h1 * (x1 - x0) / dh;
    if (std::abs(step) > opt.max_step) step *= opt.max_step / std::abs(step);
    x0 = x1;
    h0 = h1;
    x1 += step;
    h1 = h(x1);
    out.trace.push_back(x1);
    if (std::abs(step) < opt.tolerance * std::max(1.0, std::abs(x1))) {
      out.converged = std::isfinite(std::abs(h1));
      break;
    }
  }
  out.root = x1;
  out.residual = std::abs(h1);
  out.outside_window = std::abs(x1.real() - guess.real()) > opt.window;
  return out;
}

PoleFunction smatrix_pole_function(std::function<MatrixXcd(cplx)> smatrix) {
  return [smatrix = std::move(smatrix)](cplx f) {
    const detail::EigenDecomposition e = detail::eig(smatrix(f), false);
    if (e.info != 0) throw NumericalError("pole function: eigendecomposition failed");
    cplx big = 0.0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (std::abs(e.values(i)) > std::abs(big)) big = e.values(i);
    return 1.0 / big;
  };
}

Eigenmode find_pole(std::function<MatrixXcd(cplx)> smatrix, cplx guess, const PoleOptions& opt) {
  const PoleFunction h = smatrix_pole_function(std::move(smatrix));
  const RootResult r = find_root(h, std::conj(guess), opt);
  if (!r.converged) throw NumericalError("find_pole: no convergence after " + std::to_string(r.iterations) + " steps");
  if (r.outside_window) throw NumericalError("find_pole: root left the search window");
  Eigenmode m = Eigenmode::from_raw(r.root, 0.0, Parity::Unknown, r.residual);
  m.iterations = r.iterations;
  return m;
}

// ------------------------------------------------------------------ cavity

CavityPoleProblem::CavityPoleProblem(CavitySpec cavity, RcwaConfig cfg)
    : cavity_(std::move(cavity)), cfg_(cfg), solver_(cavity_.slab1.period, cfg) {
  cavity_.validate();
}

CavityPoleProblem CavityPoleProblem::with_gap(double gap) const {
  CavitySpec c = cavity_;
  c.gap = gap;
  return CavityPoleProblem(c, cfg_);
}

CavityPoleProblem::GapOperator CavityPoleProblem::gap_operator(cplx f, bool want_vectors) const {
  GapOperator g;
  if (cavity_.is_symmetric()) {
    const SMatrix s = solver_.slab_smatrix(cavity_.slab2, f);
    const VectorXcd xh = solver_.gap_phase(0.5 * cavity_.gap, f);
    g.m = xh.asDiagonal() * s.s11 * xh.asDiagonal();
  } else {
    const SMatrix s1 = solver_.slab_smatrix(cavity_.slab1, f, 0);
    const SMatrix s2 = solver_.slab_smatrix(cavity_.slab2, f, 2);
    const VectorXcd x = solver_.gap_phase(cavity_.gap, f);
    g.m = s1.s22 * x.asDiagonal() * s2.s11 * x.asDiagonal();
  }
  const detail::EigenDecomposition e = detail::eig(g.m, want_vectors);
  if (e.info != 0) throw NumericalError("cavity pole function: eigendecomposition failed");
  g.values = e.values;
  g.vectors = e.vectors;
  return g;
}

cplx CavityPoleProblem::evaluate(cplx f, Parity parity) const {
  const GapOperator g = gap_operator(f, false);
  const bool sym = cavity_.is_symmetric();
  cplx best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < g.values.size(); ++i) {
    const cplx mu = g.values(i);
    auto consider = [&](double p) {
      if (std::abs(mu - p) < std::abs(best)) best = mu - p;
    };
    if (!sym || parity == Parity::Even) {
      consider(1.0);
    } else if (parity == Parity::Odd) {
      consider(-1.0);
    } else {
      consider(1.0);
      consider(-1.0);
    }
  }
  return best;
}

PoleFunction CavityPoleProblem::function(Parity parity) const {
  return [this, parity](cplx f) { return evaluate(f, parity); };
}

FieldProfile CavityPoleProblem::gap_field(cplx raw_root, std::span<const double> grid) const {
  if (!cavity_.is_symmetric()) throw std::invalid_argument("gap_field: symmetric cavity required");
  const GapOperator g = gap_operator(raw_root, true);
  Eigen::Index k = 0;
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < g.values.size(); ++i) {
    const double di = std::min(std::abs(g.values(i) - 1.0), std::abs(g.values(i) + 1.0));
    if (di < d) {
      d = di;
      k = i;
    }
  }
  const VectorXcd fwd = g.vectors.col(k);
  const VectorXcd bwd = g.m * fwd;
  const Eigen::RowVectorXcd probe = solver_.centre_probe();
  const double zm = cavity_.midplane();
  FieldProfile out;
  out.z.assign(grid.begin(), grid.end());
  for (double z : grid) {
    const VectorXcd e = solver_.gap_phase(z - zm, raw_root).cwiseProduct(fwd) +
                        solver_.gap_phase(zm - z, raw_root).cwiseProduct(bwd);
    out.e.push_back((probe * e)(0));
  }
  return out;
}

Parity CavityPoleProblem::parity_at(cplx raw_root) const {
  if (!cavity_.is_symmetric()) return Parity::Unknown;
  const double zm = cavity_.midplane();
  const double half = 0.5 * cavity_.gap;
  std::vector<double> grid;
  const int n = 32;
  for (int i = 0; i <= 2 * n; ++i) grid.push_back(zm - half + half * i / n);
  return classify_parity(gap_field(raw_root, grid), zm);
}

Parity classify_parity(const FieldProfile& field, double midplane) {
  // Pair samples mirrored about the midplane by linear interpolation.
  const auto& z = field.z;
  const auto& e = field.e;
  if (z.size() < 2) return Parity::Unknown;
  auto sample = [&](double x, cplx& v) {
    if (x < z.front() || x > z.back()) return false;
    auto it = std::upper_bound(z.begin(), z.end(), x);
    std::size_t j = std::min<std::size_t>(std::distance(z.begin(), it), z.size() - 1);
    if (j == 0) j = 1;
    const double t = (x - z[j - 1]) / (z[j] - z[j - 1]);
    v = (1.0 - t) * e[j - 1] + t * e[j];
    return true;
  };
  cplx num = 0.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    cplx mirrored;
    if (!sample(2.0 * midplane - z[i], mirrored)) continue;
    num += e[i] * std::conj(mirrored);
    na += std::norm(e[i]);
    nb += std::norm(mirrored);
  }
  if (na == 0.0 || nb == 0.0) return Parity::Unknown;
  const double corr = num.real() / std::sqrt(na * nb);
  if (corr > 0.5) return Parity::Even;
  if (corr < -0.5) return Parity::Odd;
  return Parity::Unknown;
}

Eigenmode lineshape_pole(const CavityPoleProblem& problem, cplx guess) {
  const double width = std::max(std::abs(guess.imag()), 1e-5);
  const int n = 41;
  std::vector<double> f(n), t(n);
  for (int i = 0; i < n; ++i) {
    f[i] = guess.real() + width * (-6.0 + 12.0 * i / (n - 1));
    t[i] = problem.solver().scatter(problem.cavity(), f[i]).T;
  }
  // |a + b / (f - f0 + i g)|^2 with a real.
  const detail::Residual residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const cplx b(x(3), x(4));
    const double g = std::exp(x(1));
    r.resize(n);
    for (int i = 0; i < n; ++i) r(i) = std::norm(x(2) + b / (f[i] - x(0) + I * g)) - t[i];
  };
  std::size_t ext = std::max_element(t.begin(), t.end()) - t.begin();
  detail::LsqResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (double phase : {0.0, 0.5 * pi, pi, 1.5 * pi}) {
    Eigen::VectorXd x0(5);
    const cplx b = width * std::exp(I * phase);
    x0 << f[ext], std::log(width), std::sqrt(std::max(t.front(), 1e-6)), b.real(), b.imag();
    const detail::LsqResult res = detail::least_squares(residual, n, x0);
    if (res.cost < best.cost) best = res;
  }
  if (!best.converged) throw NumericalError("lineshape fit did not converge");
  Eigenmode m = Eigenmode::from_raw(cplx(best.x(0), -std::exp(best.x(1))), problem.cavity().gap, Parity::Unknown,
                                    std::sqrt(2.0 * best.cost / n));
  m.fit_derived = true;
  return m;
}

Eigenmode find_pole(const CavityPoleProblem& problem, cplx guess, Parity parity, const PoleOptions& opt) {
  const cplx raw_guess = std::conj(guess);
  std::vector<Parity> tries;
  if (parity == Parity::Unknown && problem.cavity().is_symmetric())
    tries = {Parity::Even, Parity::Odd};
  else
    tries = {parity};

  std::optional<Eigenmode> best;
  std::string failures;
  for (Parity p : tries) {
    try {
      const RootResult r = find_root(problem.function(p), raw_guess, opt);
      if (!r.converged || r.outside_window) {
        failures += " " + to_string(p) + (r.converged ? ": outside window" : ": no convergence");
        continue;
      }
      Parity label = p;
      if (!problem.cavity().is_symmetric()) label = Parity::Unknown;
      Eigenmode m = Eigenmode::from_raw(r.root, problem.cavity().gap, label, r.residual);
      m.iterations = r.iterations;
      if (!best || std::abs(m.f_c - guess) < std::abs(best->f_c - guess)) best = m;
    } catch (const NumericalError& e) {
      failures += std::string(" ") + e.what();
    }
  }
  if (best) return *best;
  try {
    Eigenmode m = lineshape_pole(problem, guess);
    m.parity = parity;
    return m;
  } catch (const NumericalError& e) {
    throw NumericalError("find_pole: secant failed (" + failures + " ) and lineshape fallback failed: " + e.what());
  }
}

GapSolver cavity_gap_solver(const CavityPoleProblem& base, Parity parity, const PoleOptions& opt) {
  return [base, parity, opt](double q, cplx guess) {
    const CavityPoleProblem p = base.with_gap(q);
    Eigenmode m = find_pole(p, guess, parity, opt);
    m.q = q;
    return m;
  };
}

// ---------------------------------------------------------------- tracking

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

ModeBranch track_mode(const GapSolver& solve, std::span<const double> q_grid, const Eigenmode& seed,
                      const TrackOptions& opt) {
  ModeBranch b;
  if (q_grid.empty()) return b;
  if (std::abs(seed.q - q_grid.front()) > 1e-12)
    throw std::invalid_argument("track_mode: seed must sit at the first grid point");
  for (std::size_t i = 1; i < q_grid.size(); ++i) {
    const double a = q_grid[i] - q_grid[i - 1];
    const double s = q_grid[1] - q_grid[0];
    if (a == 0.0 || (a > 0) != (s > 0)) throw std::invalid_argument("track_mode: q grid must be strictly monotone");
  }
  b.modes.push_back(seed);
  std::vector<double> rates;  // |df| / |dq| of accepted steps

  auto is_jump = [&](const Eigenmode& from, const Eigenmode& to) {
    if (rates.size() < 2) return std::abs(to.f_c - from.f_c) > opt.pole.max_step * 5.0;
    const double rate = std::abs(to.f_c - from.f_c) / std::abs(to.q - from.q);
    return rate > opt.jump_factor * median(rates);
  };

  for (std::size_t i = 1; i < q_grid.size(); ++i) {
    const double q = q_grid[i];
    const Eigenmode start = b.modes.back();
    std::optional<Eigenmode> accepted;
    std::string why;
    for (int h = 0; h <= opt.max_halvings && !accepted; ++h) {
      const int parts = 1 << h;
      Eigenmode cur = start;
      cplx last_step = b.modes.size() >= 2 ? (start.f_c - b.modes[b.modes.size() - 2].f_c) : cplx(0.0);
      double last_dq = b.modes.size() >= 2 ? (start.q - b.modes[b.modes.size() - 2].q) : 0.0;
      bool ok = true;
      for (int k = 1; k <= parts; ++k) {
        const double qk = start.q + (q - start.q) * k / parts;
        const cplx guess = last_dq != 0.0 ? cur.f_c + last_step * ((qk - cur.q) / last_dq) : cur.f_c;
        Eigenmode next;
        try {
          next = solve(qk, guess);
        } catch (const std::exception& e) {
          why = e.what();
          ok = false;
          break;
        }
        if (is_jump(cur, next)) {
          why = "branch jump at q = " + std::to_string(qk);
          ok = false;
          break;
        }
        last_step = next.f_c - cur.f_c;
        last_dq = qk - cur.q;
        cur = next;
      }
      if (ok) accepted = cur;
    }
    if (!accepted) {
      b.truncated = true;
      b.diagnostic = "truncated before q = " + std::to_string(q) + ": " + why;
      break;
    }
    accepted->q = q;
    b.steps.push_back(std::abs(accepted->f_c - start.f_c));
    rates.push_back(b.steps.back() / std::abs(q - start.q));
    b.modes.push_back(*accepted);
  }
  return b;
}

// --------------------------------------------------------------------- BIC

BicFit locate_bic(const ModeBranch& branch, const GapSolver* refine, const BicOptions& opt) {
  const auto& m = branch.modes;
  if (m.size() < 3) throw NumericalError("locate_bic: branch too short");
  std::size_t k = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].Q > m[k].Q) k = i;
  if (k == 0 || k + 1 == m.size()) throw NumericalError("locate_bic: no interior Q maximum");

  BicFit fit;
  fit.q_peak = m[k].q;
  fit.Q_peak = m[k].Q;
  if (refine) {
    // Golden-section search on Im[f_c] / Re[f_c] (monotone in 1/Q).
    auto guess_at = [&](double q) {
      const std::size_t j = (q < m[k].q) ? k - 1 : k + 1;
      const double t = (q - m[k].q) / (m[j].q - m[k].q);
      return m[k].f_c + t * (m[j].f_c - m[k].f_c);
    };
    auto objective = [&](double q, Eigenmode* out) {
      const Eigenmode e = (*refine)(q, guess_at(q));
      if (out) *out = e;
      return e.f_c.imag() / e.f_c.real();
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::min(m[k - 1].q, m[k + 1].q), b = std::max(m[k - 1].q, m[k + 1].q);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c, nullptr), fd = objective(d, nullptr);
    while (b - a > opt.golden_tolerance) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = objective(c, nullptr);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = objective(d, nullptr);
      }
    }
    Eigenmode best;
    objective(0.5 * (a + b), &best);
    fit.q_peak = 0.5 * (a + b);
    fit.Q_peak = best.Q;
  }

  // Regression points.
  std::vector<double> qs, ys;
  for (const auto& e : m) {
    if (!std::isfinite(e.Q) || e.Q <= 0.0) continue;
    const double dq = std::abs(e.q - fit.q_peak);
    if (dq > opt.window || dq < opt.exclusion) continue;
    qs.push_back(e.q);
    ys.push_back(1.0 / std::sqrt(e.Q));
  }
  if (qs.size() < 4) throw NumericalError("locate_bic: too few points inside the fit window");

  double c0 = 0.0;
  {
    std::vector<double> est;
    for (std::size_t i = 0; i < qs.size(); ++i) est.push_back(std::abs(qs[i] - fit.q_peak) / ys[i]);
    c0 = median(est);
  }
  const int n = static_cast<int>(qs.size());
  const detail::Residual residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r.resize(n);
    for (int i = 0; i < n; ++i) r(i) = std::abs(qs[i] - x(0)) / std::exp(x(1)) - ys[i];
  };
  // With a refined peak q0 is pinned there and only the slope is fitted;
  // otherwise q0 floats with it.
  detail::LsqOptions lo;
  lo.step_tolerance = 1e-14;
  lo.cost_tolerance = 1e-20;
  detail::LsqResult res;
  if (refine) {
    const detail::Residual slope = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
      Eigen::VectorXd full(2);
      full << fit.q_peak, x(0);
      residual(full, r);
    };
    Eigen::VectorXd x0(1);
    x0 << std::log(c0);
    res = detail::least_squares(slope, n, x0, lo);
    fit.q0 = fit.q_peak;
    fit.coeff = std::exp(res.x(0));
  } else {
    Eigen::VectorXd x0(2);
    x0 << fit.q_peak, std::log(c0);
    res = detail::least_squares(residual, n, x0, lo);
    fit.q0 = res.x(0);
    fit.coeff = std::exp(res.x(1));
  }
  fit.q_min = *std::min_element(qs.begin(), qs.end());
  fit.q_max = *std::max_element(qs.begin(), qs.end());
  fit.points = n;
  fit.residual_rms = std::sqrt(2.0 * res.cost / n);

  // R^2 of the straight-line regression of y on |q - q0|.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::abs(qs[i] - fit.q0);
    sx += x;
    sy += ys[i];
    sxx += x * x;
    sxy += x * ys[i];
    syy += ys[i] * ys[i];
  }
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  fit.r_squared = (vx > 0 && vy > 0) ? cov * cov / (vx * vy) : 0.0;
  return fit;
}

// ------------------------------------------------------------------- bands

std::vector<BandPoint> band_structure(const CavitySpec& cavity, std::span<const std::array<double, 2>> k_path,
                                      RcwaConfig cfg, cplx guess, Parity parity) {
  std::vector<BandPoint> out;
  cplx last[2] = {guess, guess};
  for (const auto& k : k_path) {
    for (int s = 0; s < 2; ++s) {
      BandPoint p;
      p.k = k;
      p.sector = s == 0 ? Polarization::X : Polarization::Y;
      RcwaConfig c = cfg;
      c.bloch_k = k;
      c.polarization = p.sector;
      try {
        const CavityPoleProblem problem(cavity, c);
        Eigenmode m = find_pole(problem, last[s], parity);
        last[s] = m.f_c;
        p.mode = m;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::string branch_csv(const ModeBranch& branch) {
  std::ostringstream os;
  os << "q_lambda0,re_fc_f0,im_fc_f0,Q,parity,residual\n";
  char buf[256];
  for (const auto& m : branch.modes) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s,%.17g\n", m.q, m.f_c.real(), m.f_c.imag(), m.Q,
                  to_string(m.parity).c_str(), m.residual);
    os << buf;
  }
  return os.str();
}

}  // namespace bicavity
