#ifndef QKDBOUND_CONSTRAINTS_HPP
#define QKDBOUND_CONSTRAINTS_HPP

#include <utility>
#include <vector>

#include "qkdbound/hermitian.hpp"

namespace qkdbound {

/// Expectation-value constraints Tr(Gamma_i rho) = gamma_i plus the
/// imprecision radius eps_prime of the relaxed feasible set. The trace
/// constraint (identity, 1) must be present; certificate restoration
/// shifts its multiplier.
struct ConstraintSet {
  std::vector<std::pair<HermitianOperator, double>> gammas;
  double eps_prime = 0.0;
  int identity_index = 0;

  Eigen::Index dim() const;
  std::size_t size() const { return gammas.size(); }

  /// Checks shapes and that the entry at identity_index is (I, 1).
  void validate() const;

  /// max_i |Tr(Gamma_i rho) - gamma_i|, accumulated with compensated
  /// summation so the reported violation is trustworthy near 1e-15.
  double observed_violation(const HermitianOperator& rho) const;

  RealVector values() const;
};

/// Convenience builder that puts (identity, 1) first.
ConstraintSet make_constraint_set(std::vector<std::pair<HermitianOperator, double>> rows,
                                  double eps_prime = 0.0);

} // namespace qkdbound

#endif
