#ifndef QKDBOUND_FRANK_WOLFE_HPP
#define QKDBOUND_FRANK_WOLFE_HPP

#include <functional>
#include <iosfwd>

#include "qkdbound/objective.hpp"
#include "qkdbound/subspace.hpp"

namespace qkdbound {

struct FwConfig {
  double stop_gap = 1e-7;      // stop once |Tr(Delta^T grad)| drops below this
  int max_iters = 500;
  double line_search_tol = 1e-10;
  double solver_tol = 1e-9;    // inner SDP tolerance
  int solver_max_iter = 100;
};

struct FwResult {
  HermitianOperator rho;
  double f_upper = 0;    // objective at the returned point (valid upper bound)
  double trace_gap = 0;  // |Tr(Delta^T grad)| at exit
  int iterations = 0;
  bool reached_gap = false;
  bool switched_to_perturbed = false; // gradient needed the depolarized path
};

/// Objective interface for the conditional-gradient loop; gradient uses
/// the standard-basis derivative layout (pair with Tr(Delta^T grad)).
struct SmoothObjective {
  std::function<double(const HermitianOperator&)> value;
  std::function<HermitianOperator(const HermitianOperator&)> gradient;
};

/// Derivative-free golden-section minimization of a convex phi over
/// [0, 1]; returns the located minimizer.
double golden_section_min(const std::function<double(double)>& phi, double tol, int max_iters = 60);

/// Step-size search along a feasible direction: returns lambda in (0, 1]
/// with value(rho + lambda d) <= value(rho) guaranteed (lambda -> 0+
/// fallback) and within tol of the 1-D minimum.
double line_search(const SmoothObjective& objective, const HermitianOperator& rho,
                   const HermitianOperator& direction, double tol);

/// Conditional-gradient minimization over the feasible subspace: each
/// iteration solves the linearized SDP for the best feasible move,
/// line-searches along it, and stops when the predicted decrease
/// |Tr(Delta^T grad)| falls under cfg.stop_gap.
FwResult fw_minimize_custom(const SmoothObjective& objective, const FeasibleSubspace& sub,
                            const HermitianOperator& rho0, const FwConfig& cfg = {},
                            std::ostream* trace = nullptr);

/// The key-rate objective: runs on the unperturbed value and gradient
/// while G(rho) stays full rank, switching the gradient to the
/// depolarized path at ctx.eps on the first SingularOperand.
FwResult fw_minimize(const ObjectiveContext& ctx, const FeasibleSubspace& sub,
                     const HermitianOperator& rho0, const FwConfig& cfg = {},
                     std::ostream* trace = nullptr);

} // namespace qkdbound

#endif
