#include "qkdbound/subspace.hpp"

#include <cmath>

#include "qkdbound/sdp.hpp"

namespace qkdbound {

HermitianOperator FeasibleSubspace::project(const HermitianOperator& rho) const {
  ComplexMatrix out = fixed_part.matrix();
  for (const auto& omega : free_basis)
    out += hs_inner_real(omega, rho) * omega.matrix();
  return HermitianOperator::from_hermitian(std::move(out));
}

FeasibleSubspace build_subspace(const ConstraintSet& constraints, double tol) {
  constraints.validate();
  const Eigen::Index d = constraints.dim();

  FeasibleSubspace sub;
  sub.dim = d;

  for (const auto& [op, value] : constraints.gammas) {
    ComplexMatrix v = op.matrix();
    double rhs = value;
    const double scale = std::max(1.0, v.norm());
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < sub.constraint_basis.size(); ++k) {
        const double c = hs_inner_real(HermitianOperator::from_hermitian(v),
                                       sub.constraint_basis[k]);
        v -= c * sub.constraint_basis[k].matrix();
        rhs -= c * sub.constraint_values[k];
      }
    const double nrm = v.norm();
    if (nrm <= tol * scale) {
      // Dependent direction: its implied expectation must agree.
      if (std::abs(rhs) > 1e-9 * scale)
        throw ConsistencyError("build_subspace: same observable direction with clashing value (residual " +
                               std::to_string(rhs) + ")");
      continue;
    }
    sub.constraint_basis.push_back(HermitianOperator::from_hermitian(v / nrm));
    sub.constraint_values.push_back(rhs / nrm);
  }

  ComplexMatrix fixed = ComplexMatrix::Zero(d, d);
  for (std::size_t k = 0; k < sub.constraint_basis.size(); ++k)
    fixed += sub.constraint_values[k] * sub.constraint_basis[k].matrix();
  sub.fixed_part = HermitianOperator::from_hermitian(std::move(fixed));

  const int target_m = static_cast<int>(d * d) - sub.rank();
  for (const auto& e : hermitian_basis(d)) {
    if (sub.m() == target_m) break;
    ComplexMatrix v = e.matrix();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& g : sub.constraint_basis)
        v -= hs_inner_real(HermitianOperator::from_hermitian(v), g) * g.matrix();
      for (const auto& w : sub.free_basis)
        v -= hs_inner_real(HermitianOperator::from_hermitian(v), w) * w.matrix();
    }
    const double nrm = v.norm();
    if (nrm <= tol) continue;
    sub.free_basis.push_back(HermitianOperator::from_hermitian(v / nrm));
  }
  if (sub.m() != target_m)
    throw Error("build_subspace: completion failed to reach the expected dimension");
  return sub;
}

HermitianOperator find_initial(const FeasibleSubspace& sub, double solver_tol, double feas_tol) {
  if (sub.m() == 0) {
    const HermitianOperator rho0 = sub.fixed_part;
    if (min_eigenvalue(rho0) < -feas_tol)
      throw InfeasibleProtocol("find_initial: the unique candidate state is not PSD");
    return rho0;
  }

  // maximize t  s.t.  fixed - sum_j y_j Omega_j >= t I
  // realized as the dual of:  min <fixed, X>, <Omega_j, X> = 0, <I, X> = 1.
  SdpProblem p;
  p.variable_dim = sub.dim;
  p.objective = sub.fixed_part;
  for (const auto& omega : sub.free_basis) p.constraints.emplace_back(omega, 0.0);
  p.constraints.emplace_back(HermitianOperator::identity(sub.dim), 1.0);

  const SdpSolution sol = solve(p, solver_tol);
  if (sol.status == SdpStatus::Infeasible)
    throw InfeasibleProtocol("find_initial: feasibility SDP reported infeasible");

  ComplexMatrix rho = sub.fixed_part.matrix();
  for (int j = 0; j < sub.m(); ++j) rho -= sol.dual_y(j) * sub.free_basis[j].matrix();
  const HermitianOperator rho0 = HermitianOperator::from_hermitian(std::move(rho));

  const double lam = min_eigenvalue(rho0);
  if (lam < -feas_tol)
    throw InfeasibleProtocol("find_initial: best reachable smallest eigenvalue " +
                             std::to_string(lam) + " (constraints admit no density operator)");
  return rho0;
}

} // namespace qkdbound
