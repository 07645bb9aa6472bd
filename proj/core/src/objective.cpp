#include "qkdbound/objective.hpp"

#include <cmath>

namespace qkdbound {

ObjectiveContext ObjectiveContext::make(KeyMapChannel g, double eps) {
  const double cap = max_perturbation(g.out_dim);
  ObjectiveContext ctx(std::move(g), std::min(eps, cap));
  return ctx;
}

double max_perturbation(Eigen::Index d_out) {
  if (d_out < 1) throw ParameterError("max_perturbation: d' must be positive");
  if (d_out == 1) return 1.0;
  return 1.0 / (std::exp(1.0) * static_cast<double>(d_out - 1));
}

double perturbation_penalty(double eps, Eigen::Index d_out) {
  if (d_out < 1) throw ParameterError("perturbation_penalty: d' must be positive");
  if (d_out == 1) return 0.0; // one-dimensional output carries no entropy
  const double cap = max_perturbation(d_out);
  if (!(eps > 0.0) || eps > cap * (1.0 + 1e-12))
    throw ParameterError("perturbation_penalty: eps outside (0, 1/(e(d'-1))]");
  const double k = eps * static_cast<double>(d_out - 1);
  return 2.0 * k * std::log2(static_cast<double>(d_out) / k);
}

double entropy_bits(const HermitianOperator& op, double neg_tol) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(op.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("entropy_bits: eigensolver failed");
  const RealVector& lam = solver.eigenvalues();
  const double top = std::max(1.0, lam.size() ? std::abs(lam(lam.size() - 1)) : 0.0);
  double h = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    const double x = lam(i);
    if (x < -neg_tol * top)
      throw DomainError("entropy_bits: negative eigenvalue " + std::to_string(x));
    if (x > 0) h -= x * std::log2(x);
  }
  return h;
}

namespace {

double value_impl(const ObjectiveContext& ctx, const HermitianOperator& rho, double eps) {
  const HermitianOperator sigma = apply_depolarized(ctx.gmap, rho, eps, ctx.perturb);
  const HermitianOperator tau = pinch(ctx.zchannel, sigma);
  // D(sigma || Z(sigma)) = H(Z(sigma)) - H(sigma); zero eigenvalues
  // contribute 0 log 0 = 0, which realizes the support convention.
  // The negativity tolerance admits iterates that carry inner-solver
  // rounding at the 1e-9 scale.
  return entropy_bits(tau, 1e-9) - entropy_bits(sigma, 1e-9);
}

} // namespace

double objective_value(const ObjectiveContext& ctx, const HermitianOperator& rho) {
  return value_impl(ctx, rho, 0.0);
}

double objective_value_at(const ObjectiveContext& ctx, const HermitianOperator& rho, double eps) {
  return value_impl(ctx, rho, eps);
}

double objective_value_perturbed(const ObjectiveContext& ctx, const HermitianOperator& rho) {
  return value_impl(ctx, rho, ctx.eps);
}

HermitianOperator objective_gradient_at(const ObjectiveContext& ctx, const HermitianOperator& rho,
                                        double eps) {
  const HermitianOperator sigma = apply_depolarized(ctx.gmap, rho, eps, ctx.perturb);
  const HermitianOperator tau = pinch(ctx.zchannel, sigma);
  // For eps > 0 the arguments are strictly positive, so only genuine
  // numerical collapse to <= 0 should trip the singularity guard.
  const double cutoff = (eps > 0.0) ? 0.0 : kSupportCutoff;
  const HermitianOperator diff = mat_log(sigma, cutoff) - mat_log(tau, cutoff);
  const HermitianOperator lin = adjoint_depolarized(ctx.gmap, diff, eps, ctx.perturb);
  // lin satisfies d f_eps(rho + t Delta)/dt = Tr(lin Delta); transposing
  // moves it to the standard-basis derivative-matrix layout.
  return transpose_std(lin);
}

HermitianOperator objective_gradient(const ObjectiveContext& ctx, const HermitianOperator& rho) {
  return objective_gradient_at(ctx, rho, ctx.eps);
}

} // namespace qkdbound
