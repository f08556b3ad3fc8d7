#include "bicavity/optomech.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bicavity {

void MechanicalSpec::validate() const {
  if (!(omega_m.value > 0.0)) throw std::invalid_argument("MechanicalSpec: omega_m must be positive");
  if (!(m_eff > 0.0)) throw std::invalid_argument("MechanicalSpec: m_eff must be positive");
  if (!(q_m > 0.0)) throw std::invalid_argument("MechanicalSpec: q_m must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("MechanicalSpec: temperature must be positive");
}

Metres zero_point_motion(const MechanicalSpec& mech) {
  mech.validate();
  return {std::sqrt(constants::hbar / (2.0 * mech.m_eff * mech.omega_m.value))};
}

double bath_occupation(const MechanicalSpec& mech) {
  mech.validate();
  return constants::k_B * mech.temperature / (constants::hbar * mech.omega_m.value);
}

namespace {

struct Stencil {
  cplx first, second;  // df/dq and d2f/dq2
};

Stencil five_point(const BranchFunction& f, double q, double h, cplx f0) {
  const cplx fp1 = f(q + h), fm1 = f(q - h), fp2 = f(q + 2.0 * h), fm2 = f(q - 2.0 * h);
  return {(-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h),
          (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)};
}

}  // namespace

CouplingReport coupling_derivatives(const BranchFunction& f_c, double q, const DerivativeOptions& opt, Scale scale) {
  CouplingReport rep;
  rep.q = q;
  rep.scale = scale;
  const cplx centre = f_c(q);
  const double Q = centre.imag() > 0.0 ? centre.real() / (2.0 * centre.imag())
                                       : std::numeric_limits<double>::infinity();
  const double h = Q > opt.q_threshold ? opt.h_near_bic : opt.h;
  rep.h_step = h;

  const Stencil coarse = five_point(f_c, q, h, centre);
  const Stencil fine = five_point(f_c, q, 0.5 * h, centre);
  // Both stencils are fourth order.
  const cplx d1 = fine.first + (fine.first - coarse.first) / 15.0;
  const cplx d2 = fine.second + (fine.second - coarse.second) / 15.0;
  rep.g_norm = d1;
  rep.g2_norm = 0.5 * d2;
  rep.g_error = std::abs(fine.first - coarse.first) / 15.0;
  rep.g2_error = 0.5 * std::abs(fine.second - coarse.second) / 15.0;

  const bool g_ok = rep.g_error <= opt.rel_tolerance * std::abs(rep.g_norm) + opt.abs_tolerance;
  const bool g2_ok = rep.g2_error <= opt.rel_tolerance * std::abs(rep.g2_norm) + opt.abs_tolerance / h;
  rep.converged = g_ok && g2_ok;
  if (!g_ok) rep.message = "first derivative not converged under step halving";
  else if (!g2_ok) rep.message = "second derivative not converged under step halving";
  return rep;
}

CouplingReport coupling_derivatives(const ModeBranch& branch, const GapSolver& solve, double q,
                                    const DerivativeOptions& opt, Scale scale) {
  CouplingReport rep;
  rep.q = q;
  rep.scale = scale;
  if (branch.modes.size() < 2) {
    rep.message = "branch has fewer than two points";
    return rep;
  }
  if (branch.truncated) {
    rep.message = "branch truncated: " + branch.diagnostic;
    return rep;
  }
  std::vector<Eigenmode> modes = branch.modes;
  std::sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) { return a.q < b.q; });
  const double reach = 2.0 * std::max(opt.h, opt.h_near_bic);
  if (q - reach < modes.front().q || q + reach > modes.back().q) {
    rep.message = "branch does not cover the stencil";
    return rep;
  }

  auto seed = [&](double x) {
    auto hi = std::upper_bound(modes.begin(), modes.end(), x, [](double v, const Eigenmode& m) { return v < m.q; });
    if (hi == modes.begin()) return modes.front().f_c;
    if (hi == modes.end()) return modes.back().f_c;
    auto lo = hi - 1;
    const double t = (x - lo->q) / (hi->q - lo->q);
    return lo->f_c + t * (hi->f_c - lo->f_c);
  };
  const BranchFunction f = [&](double x) { return solve(x, seed(x)).f_c; };
  return coupling_derivatives(f, q, opt, scale);
}

FigureOfMerit figure_of_merit(cplx g_hz_per_m, cplx g2_hz_per_m2, Hertz kappa, const MechanicalSpec& mech) {
  mech.validate();
  if (!(kappa.value > 0.0)) throw std::invalid_argument("figure_of_merit: kappa must be positive");
  FigureOfMerit f;
  f.x0 = zero_point_motion(mech);
  const double x0 = f.x0.value;
  f.g0 = 2.0 * pi * g_hz_per_m * x0;
  f.g2 = 2.0 * pi * g2_hz_per_m2 * x0 * x0;
  f.kappa = to_angular(kappa);
  f.omega_m = mech.omega_m;
  const double g0 = std::abs(f.g0.real());
  const double w = mech.omega_m.value, k = f.kappa.value;
  f.g0_over_kappa = g0 / k;
  f.g0_over_omega_m = g0 / w;
  f.kappa_over_omega_m = k / w;
  f.n_bath = bath_occupation(mech);
  f.cooperativity = 4.0 * g0 * g0 * mech.q_m / (k * w);
  f.quantum_cooperativity = f.cooperativity / f.n_bath;
  return f;
}

FigureOfMerit figure_of_merit(const CouplingReport& coupling, Hertz kappa, const MechanicalSpec& mech) {
  return figure_of_merit(coupling.g_hz_per_m(), coupling.g2_hz_per_m2(), kappa, mech);
}

Hertz mode_linewidth(const Eigenmode& mode, Scale scale) { return {mode.f_c.imag() * scale.f0()}; }

void FpBaselineSpec::validate() const {
  mech.validate();
  if (!(finesse > 0.0)) throw std::invalid_argument("FpBaselineSpec: finesse must be positive");
  if (!(wavelength.value > 0.0)) throw std::invalid_argument("FpBaselineSpec: wavelength must be positive");
  // Small relative slack so that L = lambda/2 given in rounded units passes.
  if (!(length.value >= 0.5 * wavelength.value * (1.0 - 1e-12)))
    throw std::invalid_argument("FpBaselineSpec: length below lambda/2 supports no resonance");
  if (mim_reflectivity && !(*mim_reflectivity > 0.0 && *mim_reflectivity <= 1.0))
    throw std::invalid_argument("FpBaselineSpec: membrane reflectivity must lie in (0, 1]");
}

FpBaseline fp_baseline(const FpBaselineSpec& spec) {
  spec.validate();
  FpBaseline out;
  const double L = spec.length.value;
  out.kappa = {pi * constants::c / (2.0 * L * spec.finesse)};
  const double omega_c = 2.0 * pi * constants::c / spec.wavelength.value;
  double g = omega_c / L / (2.0 * pi);
  if (spec.mim_reflectivity) g *= 2.0 * *spec.mim_reflectivity;
  out.g_hz_per_m = g;
  out.fom = figure_of_merit(cplx(g, 0.0), cplx(0.0, 0.0), to_hertz(out.kappa), spec.mech);
  return out;
}

LossModel loss_conversions(const LossInput& input, Metres wavelength, double n_re) {
  if (!(wavelength.value > 0.0)) throw std::invalid_argument("loss_conversions: wavelength must be positive");
  if (!(n_re > 0.0)) throw std::invalid_argument("loss_conversions: real index must be positive");
  LossModel m;
  m.n_re = n_re;
  const double lam = wavelength.value;
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, InternalDecay>) {
          if (!(in.kappa_i.value >= 0.0) || !(in.group_velocity > 0.0))
            throw std::invalid_argument("loss_conversions: need kappa_i >= 0 and v_g > 0");
          m.kappa_i = in.kappa_i;
          m.group_velocity = in.group_velocity;
          m.alpha = in.kappa_i.value / in.group_velocity;
          m.n_im = m.alpha * lam / (4.0 * pi);
        } else if constexpr (std::is_same_v<T, AbsorptionCoefficient>) {
          if (!(in.alpha >= 0.0)) throw std::invalid_argument("loss_conversions: alpha must be non-negative");
          m.alpha = in.alpha;
          m.n_im = m.alpha * lam / (4.0 * pi);
        } else {
          if (!(in.n_im >= 0.0)) throw std::invalid_argument("loss_conversions: extinction must be non-negative");
          m.n_im = in.n_im;
          m.alpha = 4.0 * pi * m.n_im / lam;
        }
      },
      input);
  m.q_abs_unbounded = m.n_im == 0.0;
  m.q_abs = m.q_abs_unbounded ? std::numeric_limits<double>::infinity() : n_re / (2.0 * m.n_im);
  return m;
}

double beam_divergence(Metres waist, Metres wavelength) {
  if (!(waist.value > 0.0)) throw std::invalid_argument("beam_divergence: waist must be positive");
  return wavelength.value / (pi * waist.value);
}

namespace {

nlohmann::json quantity(double v, const char* unit) { return {{"value", v}, {"unit", unit}}; }

nlohmann::json complex_quantity(cplx v, const char* unit) {
  return {{"re", v.real()}, {"im", v.imag()}, {"unit", unit}};
}

// JSON has no infinity; unbounded values are written as null.
nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const CouplingReport& c) {
  return {
      {"q", quantity(c.q, "lambda0")},
      {"lambda0", quantity(c.scale.lambda0, "m")},
      {"G_normalized", complex_quantity(c.g_norm, "f0_per_lambda0")},
      {"G2_normalized", complex_quantity(c.g2_norm, "f0_per_lambda0_sq")},
      {"G_over_2pi", complex_quantity(c.g_hz_per_m(), "hz_per_m")},
      {"G_over_2pi_flipped", complex_quantity(c.g_hz_per_m_flipped(), "hz_per_m")},
      {"G2_over_2pi", complex_quantity(c.g2_hz_per_m2(), "hz_per_m2")},
      {"h_step", quantity(c.h_step, "lambda0")},
      {"G_error", quantity(c.g_error, "f0_per_lambda0")},
      {"G2_error", quantity(c.g2_error, "f0_per_lambda0_sq")},
      {"converged", c.converged},
      {"message", c.message},
  };
}

nlohmann::json to_json(const FigureOfMerit& f) {
  return {
      {"x0", quantity(f.x0.value, "m")},
      {"g0", complex_quantity(f.g0, "rad_per_s")},
      {"g2", complex_quantity(f.g2, "rad_per_s")},
      {"kappa", quantity(f.kappa.value, "rad_per_s")},
      {"omega_m", quantity(f.omega_m.value, "rad_per_s")},
      {"g0_over_2pi", quantity(f.g0.real() / (2.0 * pi), "hz")},
      {"kappa_over_2pi", quantity(to_hertz(f.kappa).value, "hz")},
      {"g0_over_kappa", f.g0_over_kappa},
      {"g0_over_omega_m", f.g0_over_omega_m},
      {"kappa_over_omega_m", f.kappa_over_omega_m},
      {"n_bath", f.n_bath},
      {"cooperativity", f.cooperativity},
      {"quantum_cooperativity", f.quantum_cooperativity},
  };
}

nlohmann::json to_json(const LossModel& l) {
  nlohmann::json j = {
      {"alpha", quantity(l.alpha, "per_m")},
      {"n_im", l.n_im},
      {"n_re", l.n_re},
      {"q_abs", finite_or_null(l.q_abs)},
      {"q_abs_unbounded", l.q_abs_unbounded},
  };
  if (l.kappa_i) j["kappa_i"] = quantity(l.kappa_i->value, "rad_per_s");
  if (l.group_velocity) j["group_velocity"] = quantity(*l.group_velocity, "m_per_s");
  return j;
}

std::string fp_table_csv(std::span<const FpTableRow> rows) {
  std::ostringstream os;
  os << "L_m,kappa_over_2pi_MHz,G_over_2pi_GHz_per_nm,g0_over_2pi_kHz,g0_over_kappa,g0_over_omega_m,"
        "kappa_over_omega_m,C,C_q\n";
  for (const auto& r : rows) {
    const FigureOfMerit& f = r.result.fom;
    os << g17(r.length.value) << ',' << g17(to_hertz(f.kappa).value / 1e6) << ','
       << g17(r.result.g_hz_per_m * 1e-18) << ',' << g17(std::abs(f.g0.real()) / (2.0 * pi) / 1e3) << ','
       << g17(f.g0_over_kappa) << ',' << g17(f.g0_over_omega_m) << ',' << g17(f.kappa_over_omega_m) << ','
       << g17(f.cooperativity) << ',' << g17(f.quantum_cooperativity) << '\n';
  }
  return os.str();
}

std::string dphoc_table_csv(std::span<const DphocTableRow> rows) {
  std::ostringstream os;
  os << "set,Q_m,n_im,R,kappa_over_2pi_MHz,g0_over_kappa,C,C_q\n";
  for (const auto& r : rows) {
    const FigureOfMerit& f = r.fom;
    os << r.label << ',' << g17(r.q_m) << ',' << g17(r.n_im) << ','
       << (r.reflectance ? g17(*r.reflectance) : std::string()) << ',' << g17(to_hertz(f.kappa).value / 1e6)
       << ',' << g17(f.g0_over_kappa) << ',' << g17(f.cooperativity) << ',' << g17(f.quantum_cooperativity)
       << '\n';
  }
  return os.str();
}

}  // namespace bicavity
