#include "qkdbound/certify.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include "qkdbound/subspace.hpp"

namespace qkdbound {

double certified_bound_arithmetic(double linear_const, const RealVector& gamma,
                                  const RealVector& y, double eps_prime, const RealVector& z,
                                  double zeta) {
  return linear_const + compensated_dot(gamma, y) - eps_prime * compensated_sum(z) - zeta;
}

HermitianOperator shift_to_psd(const HermitianOperator& rho) {
  const double lam = min_eigenvalue(rho);
  if (lam >= 0) return rho;
  return HermitianOperator::from_hermitian(
      rho.matrix() - lam * ComplexMatrix::Identity(rho.dim(), rho.dim()));
}

namespace {

struct Linearization {
  HermitianOperator rho;   // PSD-shifted candidate
  HermitianOperator w;     // transpose of the gradient, pairs with plain operators
  double f_eps = 0;
  double linear_const = 0; // f_eps - Tr(rho^T grad)
  double upper = 0;        // unperturbed objective at rho
};

Linearization linearize(const ObjectiveContext& ctx, const HermitianOperator& rho_in,
                        double eps) {
  Linearization lin;
  lin.rho = shift_to_psd(rho_in);
  lin.f_eps = (eps > 0) ? objective_value_at(ctx, lin.rho, eps) : objective_value(ctx, lin.rho);
  lin.w = transpose_std(objective_gradient_at(ctx, lin.rho, eps));
  lin.linear_const = lin.f_eps - hs_inner_real(lin.rho, lin.w);
  lin.upper = objective_value(ctx, lin.rho);
  return lin;
}

SdpProblem dual_problem(const HermitianOperator& w, const ConstraintSet& constraints) {
  SdpProblem p;
  p.variable_dim = w.dim();
  p.objective = w;
  p.constraints = constraints.gammas;
  return p;
}

struct LiftedCandidate {
  RealVector y;
  SdpStatus status;
  std::string message;
};

// Multipliers from a face-restricted dual solve, lifted back to the full
// problem along the constraint combination that expresses the face
// projector. Returns nothing when no face is detected or the lift does
// not apply; the caller verifies whatever comes back, so this only ever
// affects tightness.
std::optional<LiftedCandidate> face_lifted_multipliers(const HermitianOperator& w,
                                                       const ConstraintSet& constraints,
                                                       const CertifyOptions& opts) {
  const Eigen::Index d = w.dim();
  const int n = static_cast<int>(constraints.size());

  FeasibleSubspace sub;
  HermitianOperator interior;
  try {
    sub = build_subspace(constraints);
    interior = find_initial(sub, opts.solver_tol);
  } catch (const Error&) {
    return std::nullopt;
  }

  // Seed: the max-min-eigenvalue point separates forced directions
  // (eigenvalues at solver-noise scale) from genuinely populated ones.
  const Spectrum seed = eig_hermitian(interior);
  const double top = std::max(seed.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::Index face_dim = 0;
  while (face_dim < d && seed.eigenvalues(face_dim) <= 1e-8 * top) ++face_dim;
  if (face_dim == 0 || face_dim == d) return std::nullopt;

  // The seed subspace inherits the feasibility solver's accuracy, which
  // is far too coarse for a lift. Refine by alternating between the
  // constraint span (with the zero-expectation anchor enforced, so the
  // fitted operator annihilates every feasible state) and the nearest
  // spectral projector.
  const int r = sub.rank();
  RealVector span_values(r);
  for (int k = 0; k < r; ++k) span_values(k) = sub.constraint_values[k];
  const double values_sq = span_values.squaredNorm();

  ComplexMatrix proj = seed.eigenvectors.leftCols(face_dim) *
                       seed.eigenvectors.leftCols(face_dim).adjoint();
  ComplexMatrix fitted;
  ComplexMatrix face_vectors, range_vectors;
  double residual = 1;
  for (int sweep = 0; sweep < 50; ++sweep) {
    RealVector coef(r);
    for (int k = 0; k < r; ++k)
      coef(k) = hs_inner_real(sub.constraint_basis[k], HermitianOperator::from_hermitian(proj));
    if (values_sq > 0) coef -= (coef.dot(span_values) / values_sq) * span_values;
    fitted = ComplexMatrix::Zero(d, d);
    for (int k = 0; k < r; ++k) fitted += coef(k) * sub.constraint_basis[k].matrix();

    const Spectrum fs = eig_hermitian(HermitianOperator::from_hermitian(fitted));
    Eigen::Index keep = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (fs.eigenvalues(i) >= 0.5) ++keep;
    if (keep == 0 || keep == d) return std::nullopt;
    face_dim = keep;
    face_vectors = fs.eigenvectors.rightCols(keep);
    range_vectors = fs.eigenvectors.leftCols(d - keep);
    const ComplexMatrix rounded = face_vectors * face_vectors.adjoint();
    residual = (fitted - rounded).norm();
    if (residual < 1e-13) break;
    proj = rounded;
  }
  if (residual > 1e-9) return std::nullopt; // face not expressible in the span

  // Face-restricted dual solve; the identity row stays the identity.
  // Rows annihilated by the compression carry only compression noise and
  // would poison the rank filter, so they are dropped here (their
  // multipliers stay zero, which is always feasible).
  SdpProblem reduced;
  reduced.variable_dim = d - face_dim;
  reduced.objective =
      HermitianOperator(range_vectors.adjoint() * w.matrix() * range_vectors);
  std::vector<int> row_of;
  for (int i = 0; i < n; ++i) {
    const auto& [op, value] = constraints.gammas[i];
    ComplexMatrix compressed = range_vectors.adjoint() * op.matrix() * range_vectors;
    if (compressed.norm() <= 1e-10 * (1.0 + op.matrix().norm())) continue;
    reduced.constraints.emplace_back(HermitianOperator(std::move(compressed)), value);
    row_of.push_back(i);
  }
  const SdpSolution sol_reduced = solve(reduced, opts.solver_tol, opts.solver_max_iter);
  RealVector dual_full = RealVector::Zero(n);
  for (std::size_t k = 0; k < row_of.size(); ++k)
    dual_full(row_of[k]) = sol_reduced.dual_y(static_cast<Eigen::Index>(k));

  // Coefficients of the fitted face operator against the original rows
  // (minimal-norm least squares; the operator lies in their span).
  Eigen::MatrixXd stacked(2 * d * d, n);
  Eigen::VectorXd target(2 * d * d);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) {
        stacked(2 * (a * d + b), i) = constraints.gammas[i].first.matrix()(a, b).real();
        stacked(2 * (a * d + b) + 1, i) = constraints.gammas[i].first.matrix()(a, b).imag();
      }
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      target(2 * (a * d + b)) = fitted(a, b).real();
      target(2 * (a * d + b) + 1) = fitted(a, b).imag();
    }
  const RealVector c =
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(stacked).solve(target);

  // Walk along the face combination until the full inequality holds.
  ComplexMatrix base = w.matrix();
  for (int i = 0; i < n; ++i) base -= dual_full(i) * constraints.gammas[i].first.matrix();
  double t = std::max(1.0, base.norm());
  LiftedCandidate out;
  out.status = sol_reduced.status;
  out.message = "face dim " + std::to_string(face_dim) + ", " + sol_reduced.message;
  for (int tries = 0; tries < 30; ++tries) {
    const double lam = min_eigenvalue(HermitianOperator::from_hermitian(base + t * fitted));
    if (lam >= -1e-9 * std::max(1.0, base.norm())) {
      out.y = dual_full - t * c;
      return out;
    }
    t *= 4.0;
  }
  return std::nullopt;
}

ReliableBound finish_exactly_constrained(const ObjectiveContext& ctx,
                                         const ConstraintSet& constraints,
                                         const Linearization& lin, double eps,
                                         const CertifyOptions& opts) {
  const SdpProblem p = dual_problem(lin.w, constraints);
  const SdpSolution sol = solve(p, opts.solver_tol, opts.solver_max_iter);
  auto [y, dual_val] = restore_dual_feasibility(p, sol.dual_y, constraints.identity_index);
  SdpStatus status = sol.status;
  std::string message = sol.message;
  if (sol.status != SdpStatus::Optimal) {
    const auto lifted = face_lifted_multipliers(lin.w, constraints, opts);
    if (lifted) {
      try {
        auto [y2, val2] =
            restore_dual_feasibility(p, lifted->y, constraints.identity_index);
        if (val2 > dual_val) {
          y = std::move(y2);
          dual_val = val2;
          status = lifted->status;
          message = "face-lifted: " + lifted->message;
        }
      } catch (const Error&) {
      }
    }
  }
  (void)dual_val;

  ReliableBound out;
  out.eps = eps;
  out.eps_prime = 0;
  out.zeta = (eps > 0) ? perturbation_penalty(eps, ctx.d_out()) : 0.0;
  out.dual_y = y;
  out.dual_z = y.cwiseAbs();
  out.linear_const = lin.linear_const;
  out.lower = certified_bound_arithmetic(lin.linear_const, constraints.values(), out.dual_y,
                                         0.0, out.dual_z, out.zeta);
  out.upper = lin.upper;
  out.solver_status = status;
  out.diagnostics = message;

  const VerifyResult v =
      verify_certificate(ctx, constraints, lin.rho, out.dual_y, out.dual_z, eps, 0.0);
  out.certificate_verified = v.verified;
  if (!v.diagnostics.empty()) out.diagnostics += (out.diagnostics.empty() ? "" : "; ") + v.diagnostics;
  return out;
}

} // namespace

ReliableBound certify_exact(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                            const HermitianOperator& rho, const CertifyOptions& opts,
                            double exact_tol) {
  constraints.validate();
  const HermitianOperator shifted = shift_to_psd(rho);
  const double violation = constraints.observed_violation(shifted);
  if (violation > exact_tol)
    throw ParameterError("certify_exact: constraints violated by " + std::to_string(violation) +
                         "; use the imprecision-robust bound");
  const Linearization lin = linearize(ctx, shifted, 0.0); // throws SingularOperand if rank-deficient
  return finish_exactly_constrained(ctx, constraints, lin, 0.0, opts);
}

ReliableBound certify_perturbed(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                                const HermitianOperator& rho, double eps,
                                const CertifyOptions& opts) {
  constraints.validate();
  perturbation_penalty(eps, ctx.d_out()); // range check
  const Linearization lin = linearize(ctx, rho, eps);
  return finish_exactly_constrained(ctx, constraints, lin, eps, opts);
}

ReliableBound certify_robust(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                             const HermitianOperator& rho, double eps, double eps_prime,
                             const CertifyOptions& opts) {
  constraints.validate();
  perturbation_penalty(eps, ctx.d_out()); // range check
  if (eps_prime < 0) throw ParameterError("certify_robust: eps_prime must be nonnegative");

  const Linearization lin = linearize(ctx, rho, eps);
  const double observed = constraints.observed_violation(lin.rho);
  if (eps_prime < observed) eps_prime = observed * 1.01;

  // Multiplier problem over (y, z): the solver's standard-form dual is
  //   max  gamma.y - eps' sum z
  //   s.t. sum_i y_i Gamma_i <= W,  -z <= y <= z,
  // reached through the slack-block primal below.
  const Eigen::Index d = lin.w.dim();
  const int n = static_cast<int>(constraints.size());
  const Eigen::Index big = d + 2 * n;

  auto embed = [&](const ComplexMatrix& top, int slot_a, double va, int slot_b, double vb) {
    ComplexMatrix m = ComplexMatrix::Zero(big, big);
    if (top.size() > 0) m.topLeftCorner(d, d) = top;
    if (slot_a >= 0) m(d + slot_a, d + slot_a) = va;
    if (slot_b >= 0) m(d + n + slot_b, d + n + slot_b) = vb;
    return HermitianOperator::from_hermitian(std::move(m));
  };

  auto slack_problem = [&](double penalty) {
    SdpProblem p;
    p.variable_dim = big;
    p.objective = embed(lin.w.matrix(), -1, 0, -1, 0);
    for (int i = 0; i < n; ++i)
      p.constraints.emplace_back(embed(constraints.gammas[i].first.matrix(), i, -1.0, i, 1.0),
                                 constraints.gammas[i].second);
    for (int i = 0; i < n; ++i)
      p.constraints.emplace_back(embed(ComplexMatrix(), i, -1.0, i, -1.0), -penalty);
    return p;
  };

  const double zeta = perturbation_penalty(eps, ctx.d_out());

  // Feasibility restoration: shift the identity multiplier until the LMI
  // verifies, then clip z up to |y|; both can only lower the objective.
  const SdpProblem reduced = dual_problem(lin.w, constraints);
  auto restored_bound = [&](RealVector y, RealVector z) {
    const auto [yr, ignored] = restore_dual_feasibility(reduced, y, constraints.identity_index);
    (void)ignored;
    y = yr;
    for (int i = 0; i < n; ++i) z(i) = std::max(z(i), std::abs(y(i)));
    // The bound is evaluated at the caller's eps_prime whatever penalty
    // produced the pair: any feasible (y, z) certifies.
    const double value = certified_bound_arithmetic(lin.linear_const, constraints.values(), y,
                                                    eps_prime, z, zeta);
    return std::tuple<RealVector, RealVector, double>{std::move(y), std::move(z), value};
  };

  // When constraints force the optimum onto a face of the cone, the
  // multiplier problem has recession directions that the tiny eps_prime
  // penalty barely controls and the interior-point iterates blow up.
  // A ladder of stronger penalties regularizes the solve; each result
  // stays a feasible pair, so the best evaluated candidate is kept.
  RealVector y, z;
  double lower = -std::numeric_limits<double>::infinity();
  SdpStatus status = SdpStatus::NumericalTrouble;
  std::string note;
  auto consider = [&](SdpStatus sol_status, const std::string& sol_msg, RealVector cy,
                      RealVector cz, const std::string& tag) {
    try {
      auto [ry, rz, value] = restored_bound(std::move(cy), std::move(cz));
      if (value > lower) {
        y = std::move(ry);
        z = std::move(rz);
        lower = value;
        status = sol_status;
        note = tag + (sol_msg.empty() ? "" : (": " + sol_msg));
      }
    } catch (const Error&) {
      // A broken candidate never outranks a restorable one.
    }
  };

  {
    const SdpSolution sol = solve(slack_problem(eps_prime), opts.solver_tol,
                                  opts.solver_max_iter);
    consider(sol.status, sol.message, sol.dual_y.head(n), sol.dual_y.tail(n),
             "slack multiplier problem");
    if (sol.status != SdpStatus::Optimal) {
      const SdpSolution plain = solve(reduced, opts.solver_tol, opts.solver_max_iter);
      consider(plain.status, plain.message, plain.dual_y, plain.dual_y.cwiseAbs(),
               "plain multiplier problem");
      // Constraints that pin part of the state space to zero leave the
      // multiplier problem with recession directions the interior-point
      // method cannot close out; a face-restricted solve plus lift
      // recovers a tight candidate.
      const auto lifted = face_lifted_multipliers(lin.w, constraints, opts);
      if (lifted)
        consider(lifted->status, lifted->message, lifted->y, lifted->y.cwiseAbs(),
                 "face-lifted multiplier problem");
    }
  }
  // Last-resort candidate: the zero vector always restores to a valid
  // (weak) bound, so certification cannot come back empty handed.
  consider(SdpStatus::NumericalTrouble, "", RealVector::Zero(n), RealVector::Zero(n),
           "zero-multiplier fallback");

  ReliableBound out;
  out.eps = eps;
  out.eps_prime = eps_prime;
  out.zeta = zeta;
  out.dual_y = y;
  out.dual_z = z;
  out.linear_const = lin.linear_const;
  out.lower = lower;
  out.upper = lin.upper;
  out.solver_status = status;
  out.diagnostics = note;

  const VerifyResult v = verify_certificate(ctx, constraints, lin.rho, y, z, eps, eps_prime);
  out.certificate_verified = v.verified;
  if (!v.diagnostics.empty()) out.diagnostics += (out.diagnostics.empty() ? "" : "; ") + v.diagnostics;
  return out;
}

VerifyResult verify_certificate(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                                const HermitianOperator& rho, const RealVector& y,
                                const RealVector& z, double eps, double eps_prime) {
  VerifyResult res;
  try {
    constraints.validate();
    const int n = static_cast<int>(constraints.size());
    if (y.size() != n || z.size() != n) {
      res.diagnostics = "multiplier size mismatch";
      return res;
    }
    if (min_eigenvalue(rho) < -1e-12) {
      res.diagnostics = "candidate state is not PSD";
      return res;
    }
    for (int i = 0; i < n; ++i) {
      if (z(i) < 0 || y(i) > z(i) || y(i) < -z(i)) {
        res.diagnostics = "sign constraint -z <= y <= z fails at index " + std::to_string(i);
        return res;
      }
    }

    // Fresh gradient and spectral LMI check at tolerance zero.
    const HermitianOperator w = transpose_std(objective_gradient_at(ctx, rho, eps));
    ComplexMatrix slack = w.matrix();
    for (int i = 0; i < n; ++i) slack -= y(i) * constraints.gammas[i].first.matrix();
    const double lam = min_eigenvalue(HermitianOperator::from_hermitian(std::move(slack)));
    if (lam < 0) {
      res.diagnostics = "LMI violated: smallest slack eigenvalue " + std::to_string(lam);
      return res;
    }

    const double f_eps =
        (eps > 0) ? objective_value_at(ctx, rho, eps) : objective_value(ctx, rho);
    const double zeta = (eps > 0) ? perturbation_penalty(eps, ctx.d_out()) : 0.0;
    const double linear_const = f_eps - hs_inner_real(rho, w);
    res.recomputed_lower = certified_bound_arithmetic(linear_const, constraints.values(), y,
                                                      eps_prime, z, zeta);
    res.verified = true;
  } catch (const Error& e) {
    res.verified = false;
    res.diagnostics = e.what();
  }
  return res;
}

} // namespace qkdbound
