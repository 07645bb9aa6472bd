#include "qkdbound/frank_wolfe.hpp"

#include <cmath>
#include <ostream>

#include "qkdbound/certify.hpp"
#include "qkdbound/sdp.hpp"

namespace qkdbound {

double golden_section_min(const std::function<double(double)>& phi, double tol, int max_iters) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = phi(x1), f2 = phi(x2);
  for (int i = 0; i < max_iters && (b - a) > tol; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = phi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = phi(x2);
    }
  }
  return (f1 <= f2) ? x1 : x2;
}

double line_search(const SmoothObjective& objective, const HermitianOperator& rho,
                   const HermitianOperator& direction, double tol) {
  auto phi = [&](double lam) {
    return objective.value(
        HermitianOperator::from_hermitian(rho.matrix() + lam * direction.matrix()));
  };
  const double f0 = phi(0.0);
  double lam = golden_section_min(phi, tol);
  lam = std::max(lam, tol); // stay in (0, 1]
  // Guaranteed non-increase: back off geometrically if rounding put us up.
  for (int i = 0; i < 50 && phi(lam) > f0; ++i) lam *= 0.5;
  if (phi(lam) > f0) lam = 0.0;
  return lam;
}

FwResult fw_minimize_custom(const SmoothObjective& objective, const FeasibleSubspace& sub,
                            const HermitianOperator& rho0, const FwConfig& cfg,
                            std::ostream* trace) {
  FwResult res;
  res.rho = rho0;
  res.f_upper = objective.value(rho0);

  if (sub.m() == 0) {
    res.reached_gap = true;
    return res;
  }

  SdpProblem inner;
  inner.variable_dim = sub.dim;
  for (std::size_t k = 0; k < sub.constraint_basis.size(); ++k)
    inner.constraints.emplace_back(sub.constraint_basis[k], sub.constraint_values[k]);

  for (int it = 0; it < cfg.max_iters; ++it) {
    const HermitianOperator grad = objective.gradient(res.rho);
    inner.objective = transpose_std(grad);

    const SdpSolution sol = solve(inner, cfg.solver_tol, cfg.solver_max_iter);
    if (sol.status == SdpStatus::Infeasible)
      throw InfeasibleProtocol("fw_minimize: linearized subproblem infeasible");

    // Feasible move, re-projected onto the free directions so iterates
    // never leave the affine subspace.
    ComplexMatrix step = ComplexMatrix::Zero(sub.dim, sub.dim);
    const HermitianOperator raw =
        HermitianOperator::from_hermitian(sol.primal_X.matrix() - res.rho.matrix());
    for (const auto& omega : sub.free_basis)
      step += hs_inner_real(omega, raw) * omega.matrix();
    const HermitianOperator delta = HermitianOperator::from_hermitian(std::move(step));

    res.trace_gap = std::abs(hs_inner_real(delta, inner.objective));
    res.iterations = it + 1;
    if (trace)
      (*trace) << it << ' ' << res.f_upper << ' ' << res.trace_gap << '\n';
    if (res.trace_gap < cfg.stop_gap) {
      res.reached_gap = true;
      break;
    }

    const double lam = line_search(objective, res.rho, delta, cfg.line_search_tol);
    if (lam == 0.0) break; // no direction of decrease survives rounding
    res.rho = HermitianOperator::from_hermitian(res.rho.matrix() + lam * delta.matrix());
    const double f_new = objective.value(res.rho);
    if (f_new > res.f_upper + 1e-12) break; // monotonicity guard
    res.f_upper = f_new;
  }
  return res;
}

FwResult fw_minimize(const ObjectiveContext& ctx, const FeasibleSubspace& sub,
                     const HermitianOperator& rho0, const FwConfig& cfg, std::ostream* trace) {
  bool switched = false;
  SmoothObjective objective;
  objective.value = [&ctx](const HermitianOperator& rho) { return objective_value(ctx, rho); };
  objective.gradient = [&ctx, &switched](const HermitianOperator& rho) {
    // Iterates carry inner-solver rounding at the cone boundary; the
    // gradient is taken at the nearest PSD point, which certification
    // later redoes for itself.
    const HermitianOperator at = shift_to_psd(rho);
    if (!switched) {
      try {
        return objective_gradient_at(ctx, at, 0.0);
      } catch (const SingularOperand&) {
        switched = true;
      }
    }
    return objective_gradient_at(ctx, at, ctx.eps);
  };
  FwResult res = fw_minimize_custom(objective, sub, rho0, cfg, trace);
  res.switched_to_perturbed = switched;
  return res;
}

} // namespace qkdbound
