#pragma once

// Thin adapter over Eigen's MINPACK-style Levenberg-Marquardt with a
// forward-difference Jacobian.

#include <functional>

#include <Eigen/Dense>

namespace bicavity::detail {

using Residual = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct LsqOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;  // relative
  double cost_tolerance = 1e-14;  // relative reduction
};

struct LsqResult {
  Eigen::VectorXd x;
  double initial_cost = 0.0;  // 0.5 |r|^2
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

LsqResult least_squares(const Residual& f, int num_residuals, Eigen::VectorXd x0, const LsqOptions& opt = {});

}  // namespace bicavity::detail
