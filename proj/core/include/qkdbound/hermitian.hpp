#ifndef QKDBOUND_HERMITIAN_HPP
#define QKDBOUND_HERMITIAN_HPP

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "qkdbound/errors.hpp"

namespace qkdbound {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Default cutoff below which an eigenvalue is treated as zero by mat_log.
inline constexpr double kSupportCutoff = 1e-14;

/// Dense complex square matrix that is Hermitian by construction. The
/// constructor symmetrizes M <- (M + M^dag)/2, which absorbs the ~1e-15
/// asymmetry that solver round trips introduce.
class HermitianOperator {
public:
  HermitianOperator() = default;

  explicit HermitianOperator(const ComplexMatrix& m) {
    if (m.rows() != m.cols())
      throw DimensionError("HermitianOperator: matrix must be square");
    mat_ = 0.5 * (m + m.adjoint());
  }

  static HermitianOperator identity(Eigen::Index dim) {
    return HermitianOperator(ComplexMatrix::Identity(dim, dim));
  }
  static HermitianOperator zero(Eigen::Index dim) {
    return HermitianOperator(ComplexMatrix::Zero(dim, dim));
  }

  Eigen::Index dim() const { return mat_.rows(); }
  const ComplexMatrix& matrix() const { return mat_; }

  double trace() const { return mat_.trace().real(); }

  HermitianOperator operator+(const HermitianOperator& o) const {
    require_same_dim(o);
    return from_hermitian(mat_ + o.mat_);
  }
  HermitianOperator operator-(const HermitianOperator& o) const {
    require_same_dim(o);
    return from_hermitian(mat_ - o.mat_);
  }
  HermitianOperator operator*(double s) const { return from_hermitian(s * mat_); }
  HermitianOperator& operator+=(const HermitianOperator& o) {
    require_same_dim(o);
    mat_ += o.mat_;
    return *this;
  }

  /// Wraps a matrix that is already Hermitian to working precision,
  /// skipping the symmetrization pass.
  static HermitianOperator from_hermitian(ComplexMatrix m) {
    HermitianOperator h;
    h.mat_ = std::move(m);
    return h;
  }

private:
  void require_same_dim(const HermitianOperator& o) const {
    if (o.dim() != dim()) throw DimensionError("HermitianOperator: dimension mismatch");
  }

  ComplexMatrix mat_;
};

inline HermitianOperator operator*(double s, const HermitianOperator& h) { return h * s; }

/// Eigendecomposition of a Hermitian operator.
struct Spectrum {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors; // orthonormal columns, same order
};

/// Full spectral decomposition. Eigenvalues come back ascending and the
/// eigenvector columns orthonormal; throws Error if Eigen's solver fails
/// to converge.
Spectrum eig_hermitian(const HermitianOperator& op);

/// Matrix logarithm base 2 on a strictly positive operator,
/// V diag(log2 lambda) V^dag. An eigenvalue at or below support_cutoff
/// raises SingularOperand: the caller must take the depolarized path
/// instead of silently clamping.
HermitianOperator mat_log(const HermitianOperator& op, double support_cutoff = kSupportCutoff);

/// Kronecker product. Basis convention everywhere: the computational
/// product basis with the LAST factor's index fastest.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Trace out the subsystems not listed in `keep`. `dims` are the factor
/// dimensions in tensor order; kept factors stay in their original order.
HermitianOperator partial_trace(const HermitianOperator& op, const std::vector<Eigen::Index>& dims,
                                const std::vector<int>& keep);

/// Hilbert-Schmidt inner product Tr(a^dag b); real for Hermitian pairs.
Complex hs_inner(const HermitianOperator& a, const HermitianOperator& b);

/// Tr(a b) for Hermitian operands, guaranteed real.
double hs_inner_real(const HermitianOperator& a, const HermitianOperator& b);

/// Entrywise transpose in the fixed standard basis. Satisfies
/// Tr(transpose_std(s) t) = vec(s).vec(t) with column-stacking vec.
HermitianOperator transpose_std(const HermitianOperator& op);

/// Sum of absolute eigenvalues (trace norm for Hermitian operators).
double trace_norm(const HermitianOperator& op);

/// Gram-Schmidt under the Hilbert-Schmidt inner product. Linearly
/// dependent inputs are dropped; returns the orthonormal set and its rank.
std::pair<std::vector<HermitianOperator>, int>
gram_schmidt_hs(const std::vector<HermitianOperator>& ops, double drop_tol = 1e-10);

/// Orthonormal Hermitian basis of the d x d operator space: diagonal
/// units, then (E_ij + E_ji)/sqrt2, then i(E_ij - E_ji)/sqrt2 for i<j.
std::vector<HermitianOperator> hermitian_basis(Eigen::Index dim);

/// Smallest eigenvalue.
double min_eigenvalue(const HermitianOperator& op);

/// Principal square root of a PSD operator; eigenvalues in [-neg_tol, 0)
/// are clamped to zero, anything lower raises DomainError.
HermitianOperator mat_sqrt_psd(const HermitianOperator& op, double neg_tol = 1e-12);

} // namespace qkdbound

#endif
