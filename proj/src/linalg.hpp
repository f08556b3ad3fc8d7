#pragma once

// Dense eigensolver backed by LAPACK zgeev.

#include <Eigen/Dense>

namespace bicavity::detail {

struct EigenDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // columns, right eigenvectors
  int info = 0;
};

/// Right eigenpairs of a general complex matrix.  `info` != 0 on failure.
EigenDecomposition eig(const Eigen::MatrixXcd& a, bool want_vectors = true);

}  // namespace bicavity::detail
