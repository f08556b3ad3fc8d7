#include "linalg.hpp"

#include <complex>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace bicavity::detail {

EigenDecomposition eig(const Eigen::MatrixXcd& a, bool want_vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  EigenDecomposition out;
  out.values.resize(n);
  if (want_vectors) out.vectors.resize(n, n);
  if (n == 0) return out;

  Eigen::MatrixXcd work = a;  // zgeev overwrites its input
  std::complex<double> dummy;
  out.info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', want_vectors ? 'V' : 'N', n, work.data(), n,
                           out.values.data(), &dummy, 1, want_vectors ? out.vectors.data() : &dummy,
                           want_vectors ? n : 1);
  return out;
}

}  // namespace bicavity::detail
