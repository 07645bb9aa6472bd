#ifndef QKDBOUND_OBJECTIVE_HPP
#define QKDBOUND_OBJECTIVE_HPP

#include "qkdbound/channels.hpp"

namespace qkdbound {

/// Everything needed to evaluate the privacy-amplification objective
/// f(rho) = D( G(rho) || Z(G(rho)) ) and its depolarized variant.
/// All entropies and the returned values are in bits.
struct ObjectiveContext {
  KeyMapChannel gmap;
  PinchingChannel zchannel;
  double eps = 0.0;
  PerturbKind perturb = PerturbKind::TraceScaled;

  ObjectiveContext(KeyMapChannel g, double eps_in)
      : gmap(std::move(g)), zchannel(gmap.key_pinching()), eps(eps_in) {}

  Eigen::Index d_out() const { return gmap.out_dim; }

  /// Clips eps to the admissible range (0, 1/(e (d'-1))] of the
  /// continuity penalty.
  static ObjectiveContext make(KeyMapChannel g, double eps = 1e-12);
};

/// Largest eps admitted by the continuity penalty for output dimension d'.
double max_perturbation(Eigen::Index d_out);

/// Continuity penalty 2 eps (d'-1) log2( d' / (eps (d'-1)) ) in bits.
/// Requires 0 < eps <= 1/(e (d'-1)); throws ParameterError otherwise.
double perturbation_penalty(double eps, Eigen::Index d_out);

/// von Neumann entropy in bits; eigenvalues below the negativity
/// tolerance raise DomainError, zero eigenvalues contribute nothing.
double entropy_bits(const HermitianOperator& op, double neg_tol = 1e-12);

/// f at eps = 0, computed on the support of G(rho):
/// H(Z(G(rho))) - H(G(rho)).
double objective_value(const ObjectiveContext& ctx, const HermitianOperator& rho);

/// f_eps at an explicit perturbation strength.
double objective_value_at(const ObjectiveContext& ctx, const HermitianOperator& rho, double eps);

/// f_eps at ctx.eps.
double objective_value_perturbed(const ObjectiveContext& ctx, const HermitianOperator& rho);

/// Gradient of f_eps at an explicit eps, laid out in the standard basis
/// so that the directional derivative along Delta is Tr(Delta^T grad).
/// eps = 0 is attempted on the bare channel and raises SingularOperand
/// when G(rho) or Z(G(rho)) is rank deficient.
HermitianOperator objective_gradient_at(const ObjectiveContext& ctx, const HermitianOperator& rho,
                                        double eps);

/// Gradient of f_eps at ctx.eps.
HermitianOperator objective_gradient(const ObjectiveContext& ctx, const HermitianOperator& rho);

} // namespace qkdbound

#endif
