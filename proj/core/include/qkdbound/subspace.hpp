#ifndef QKDBOUND_SUBSPACE_HPP
#define QKDBOUND_SUBSPACE_HPP

#include "qkdbound/constraints.hpp"

namespace qkdbound {

/// Splitting of the Hermitian operator space into the part pinned by the
/// constraints and its orthogonal complement: every feasible state is
/// fixed_part + sum_j omega_j free_basis[j] with free real coefficients.
struct FeasibleSubspace {
  HermitianOperator fixed_part;
  std::vector<HermitianOperator> constraint_basis; // orthonormal, spans the pinned part
  std::vector<double> constraint_values;           // expectations of constraint_basis
  std::vector<HermitianOperator> free_basis;       // orthonormal complement
  Eigen::Index dim = 0;

  int m() const { return static_cast<int>(free_basis.size()); }
  int rank() const { return static_cast<int>(constraint_basis.size()); }

  /// Nearest point of the affine feasible subspace (ignoring positivity).
  HermitianOperator project(const HermitianOperator& rho) const;
};

/// Orthonormalizes the constraint operators (values carried along;
/// contradictory dependent rows raise ConsistencyError) and completes
/// the basis to the full Hermitian space.
FeasibleSubspace build_subspace(const ConstraintSet& constraints, double tol = 1e-10);

/// Feasible starting point with maximal smallest eigenvalue, found by a
/// dedicated SDP over the free coefficients. Raises InfeasibleProtocol
/// when even the best point dips below -feas_tol.
HermitianOperator find_initial(const FeasibleSubspace& sub, double solver_tol = 1e-9,
                               double feas_tol = 1e-9);

} // namespace qkdbound

#endif
