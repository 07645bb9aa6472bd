#include "qkdbound/hermitian.hpp"

#include <cmath>
#include <numeric>

namespace qkdbound {

Spectrum eig_hermitian(const HermitianOperator& op) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op.matrix());
  if (solver.info() != Eigen::Success)
    throw Error("eig_hermitian: eigensolver failed to converge (dim " +
                std::to_string(op.dim()) + ")");
  return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

double min_eigenvalue(const HermitianOperator& op) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error("min_eigenvalue: eigensolver failed to converge");
  return solver.eigenvalues()(0);
}

HermitianOperator mat_log(const HermitianOperator& op, double support_cutoff) {
  const Spectrum s = eig_hermitian(op);
  RealVector logs(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double lam = s.eigenvalues(i);
    if (lam <= support_cutoff)
      throw SingularOperand("mat_log: eigenvalue " + std::to_string(lam) +
                            " at or below cutoff " + std::to_string(support_cutoff));
    logs(i) = std::log2(lam);
  }
  ComplexMatrix out = s.eigenvectors * logs.asDiagonal() * s.eigenvectors.adjoint();
  return HermitianOperator::from_hermitian(0.5 * (out + out.adjoint()));
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianOperator partial_trace(const HermitianOperator& op, const std::vector<Eigen::Index>& dims,
                                const std::vector<int>& keep) {
  Eigen::Index total = 1;
  for (Eigen::Index d : dims) total *= d;
  if (total != op.dim())
    throw DimensionError("partial_trace: product of dims != operator dimension");

  const int n = static_cast<int>(dims.size());
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n) throw DimensionError("partial_trace: keep index out of range");
    kept[k] = true;
  }

  // Row-major strides; the last factor's index runs fastest.
  std::vector<Eigen::Index> stride(n, 1);
  for (int i = n - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];

  std::vector<int> keep_idx, drop_idx;
  for (int i = 0; i < n; ++i) (kept[i] ? keep_idx : drop_idx).push_back(i);

  Eigen::Index keep_dim = 1, drop_dim = 1;
  for (int i : keep_idx) keep_dim *= dims[i];
  for (int i : drop_idx) drop_dim *= dims[i];

  // Flat index of a (kept block, dropped block) pair in the full space.
  auto full_index = [&](Eigen::Index kf, Eigen::Index df) {
    Eigen::Index idx = 0;
    for (int i = static_cast<int>(keep_idx.size()) - 1; i >= 0; --i) {
      idx += (kf % dims[keep_idx[i]]) * stride[keep_idx[i]];
      kf /= dims[keep_idx[i]];
    }
    for (int i = static_cast<int>(drop_idx.size()) - 1; i >= 0; --i) {
      idx += (df % dims[drop_idx[i]]) * stride[drop_idx[i]];
      df /= dims[drop_idx[i]];
    }
    return idx;
  };

  const ComplexMatrix& m = op.matrix();
  ComplexMatrix out = ComplexMatrix::Zero(keep_dim, keep_dim);
  for (Eigen::Index r = 0; r < keep_dim; ++r)
    for (Eigen::Index c = 0; c < keep_dim; ++c) {
      Complex acc(0, 0);
      for (Eigen::Index t = 0; t < drop_dim; ++t) acc += m(full_index(r, t), full_index(c, t));
      out(r, c) = acc;
    }
  return HermitianOperator(out);
}

Complex hs_inner(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != b.dim()) throw DimensionError("hs_inner: dimension mismatch");
  return (a.matrix().adjoint() * b.matrix()).trace();
}

double hs_inner_real(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != b.dim()) throw DimensionError("hs_inner_real: dimension mismatch");
  // Tr(ab) = sum_ij a_ij conj(b_ij) for Hermitian a, b.
  return a.matrix().cwiseProduct(b.matrix().conjugate()).sum().real();
}

HermitianOperator transpose_std(const HermitianOperator& op) {
  return HermitianOperator::from_hermitian(op.matrix().transpose());
}

double trace_norm(const HermitianOperator& op) {
  const Spectrum s = eig_hermitian(op);
  return s.eigenvalues.cwiseAbs().sum();
}

HermitianOperator mat_sqrt_psd(const HermitianOperator& op, double neg_tol) {
  const Spectrum s = eig_hermitian(op);
  const double top = std::max(1.0, s.eigenvalues.size() ? s.eigenvalues.maxCoeff() : 0.0);
  RealVector roots(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double lam = s.eigenvalues(i);
    if (lam < -neg_tol * top)
      throw DomainError("mat_sqrt_psd: negative eigenvalue " + std::to_string(lam));
    roots(i) = std::sqrt(std::max(0.0, lam));
  }
  ComplexMatrix out = s.eigenvectors * roots.asDiagonal() * s.eigenvectors.adjoint();
  return HermitianOperator::from_hermitian(0.5 * (out + out.adjoint()));
}

std::pair<std::vector<HermitianOperator>, int>
gram_schmidt_hs(const std::vector<HermitianOperator>& ops, double drop_tol) {
  std::vector<HermitianOperator> basis;
  for (const auto& raw : ops) {
    ComplexMatrix v = raw.matrix();
    const double scale = std::max(1.0, v.norm());
    // Two projection passes keep the basis orthonormal to ~1e-15.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : basis) {
        const Complex c = (e.matrix().adjoint() * v).trace();
        v -= c.real() * e.matrix();
      }
    const double nrm = v.norm();
    if (nrm <= drop_tol * scale) continue;
    basis.push_back(HermitianOperator::from_hermitian(v / nrm));
  }
  return {basis, static_cast<int>(basis.size())};
}

std::vector<HermitianOperator> hermitian_basis(Eigen::Index dim) {
  std::vector<HermitianOperator> basis;
  basis.reserve(static_cast<std::size_t>(dim * dim));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    ComplexMatrix e = ComplexMatrix::Zero(dim, dim);
    e(i, i) = 1.0;
    basis.push_back(HermitianOperator::from_hermitian(e));
  }
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      ComplexMatrix re = ComplexMatrix::Zero(dim, dim);
      re(i, j) = inv_sqrt2;
      re(j, i) = inv_sqrt2;
      basis.push_back(HermitianOperator::from_hermitian(re));
      ComplexMatrix im = ComplexMatrix::Zero(dim, dim);
      im(i, j) = Complex(0, inv_sqrt2);
      im(j, i) = Complex(0, -inv_sqrt2);
      basis.push_back(HermitianOperator::from_hermitian(im));
    }
  return basis;
}

} // namespace qkdbound
