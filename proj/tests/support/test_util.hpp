#ifndef QKDBOUND_TESTS_TEST_UTIL_HPP
#define QKDBOUND_TESTS_TEST_UTIL_HPP

#include <random>

#include "qkdbound/hermitian.hpp"

namespace qkdtest {

using qkdbound::Complex;
using qkdbound::ComplexMatrix;
using qkdbound::ComplexVector;
using qkdbound::HermitianOperator;

inline std::mt19937_64 make_rng(unsigned seed) { return std::mt19937_64(seed); }

inline ComplexMatrix random_complex(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(n(rng), n(rng));
  return m;
}

inline HermitianOperator random_hermitian(std::mt19937_64& rng, Eigen::Index d) {
  return HermitianOperator(random_complex(rng, d, d));
}

inline HermitianOperator random_psd(std::mt19937_64& rng, Eigen::Index d) {
  ComplexMatrix m = random_complex(rng, d, d);
  return HermitianOperator(m * m.adjoint());
}

inline HermitianOperator random_density(std::mt19937_64& rng, Eigen::Index d) {
  HermitianOperator p = random_psd(rng, d);
  return p * (1.0 / p.trace());
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline bool mat_close(const ComplexMatrix& a, const ComplexMatrix& b, double tol) {
  return a.rows() == b.rows() && a.cols() == b.cols() && max_abs_diff(a, b) <= tol;
}

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}
inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

} // namespace qkdtest

#endif
