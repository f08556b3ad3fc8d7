#include "lsq.hpp"

#include <cmath>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

namespace bicavity::detail {

namespace {

constexpr double kRejected = 1e10;

struct Functor : Eigen::DenseFunctor<double> {
  Functor(const Residual& f, int n, int m) : Eigen::DenseFunctor<double>(n, m), fn(&f) {}
  int operator()(const InputType& x, ValueType& r) const {
    (*fn)(x, r);
    // Trial steps can leave the model's domain; a large finite residual
    // makes LM reject them instead of aborting.
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (!std::isfinite(r(i))) r(i) = kRejected;
    return 0;
  }
  const Residual* fn;
};

double half_norm2(const Residual& f, const Eigen::VectorXd& x, int m) {
  Eigen::VectorXd r(m);
  f(x, r);
  return 0.5 * r.squaredNorm();
}

}  // namespace

LsqResult least_squares(const Residual& f, int num_residuals, Eigen::VectorXd x0, const LsqOptions& opt) {
  const int n = static_cast<int>(x0.size());
  LsqResult out;
  out.initial_cost = half_norm2(f, x0, num_residuals);

  Functor functor(f, n, num_residuals);
  Eigen::NumericalDiff<Functor> diff(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> lm(diff);
  lm.setXtol(opt.step_tolerance);
  lm.setFtol(opt.cost_tolerance);
  lm.setMaxfev(opt.max_iterations * (n + 1));
  const auto status = lm.minimize(x0);

  out.x = x0;
  out.cost = half_norm2(f, x0, num_residuals);
  out.iterations = static_cast<int>(lm.iterations());
  using S = Eigen::LevenbergMarquardtSpace::Status;
  out.converged = status == S::RelativeReductionTooSmall || status == S::RelativeErrorTooSmall ||
                  status == S::RelativeErrorAndReductionTooSmall || status == S::CosinusTooSmall ||
                  status == S::FtolTooSmall || status == S::XtolTooSmall;
  if (!std::isfinite(out.cost)) out.converged = false;
  return out;
}

}  // namespace bicavity::detail
