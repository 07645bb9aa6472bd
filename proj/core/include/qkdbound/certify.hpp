#ifndef QKDBOUND_CERTIFY_HPP
#define QKDBOUND_CERTIFY_HPP

#include <string>

#include "qkdbound/constraints.hpp"
#include "qkdbound/objective.hpp"
#include "qkdbound/sdp.hpp"

namespace qkdbound {

/// Certified lower bound on the constrained objective minimum, together
/// with everything needed to re-verify it: the multiplier pair (y, z),
/// the perturbation strength, the constraint relaxation radius and the
/// continuity penalty. `lower` is only reported externally once
/// certificate_verified is true.
struct ReliableBound {
  double lower = 0;  // certified, bits
  double upper = 0;  // objective at the candidate point, bits
  RealVector dual_y;
  RealVector dual_z;
  double eps = 0;
  double eps_prime = 0;
  double zeta = 0;
  bool certificate_verified = false;

  double linear_const = 0; // objective minus linearization term at the candidate
  SdpStatus solver_status = SdpStatus::NumericalTrouble;
  std::string diagnostics;
};

struct CertifyOptions {
  double solver_tol = 1e-10;
  int solver_max_iter = 100;
};

/// Linearization-dual bound at exactly satisfied constraints and
/// unperturbed objective. Requires G(rho) full rank (SingularOperand
/// otherwise) and observed constraint violation below exact_tol.
ReliableBound certify_exact(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                            const HermitianOperator& rho, const CertifyOptions& opts = {},
                            double exact_tol = 1e-12);

/// Same bound on the depolarized objective, minus the continuity
/// penalty; works for rank-deficient G(rho).
ReliableBound certify_perturbed(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                                const HermitianOperator& rho, double eps,
                                const CertifyOptions& opts = {});

/// Production path: depolarized objective plus constraint-relaxed dual
/// with multiplier pair (y, z), minus the continuity penalty. eps_prime
/// is raised to 1.01x the observed violation when it is too small.
ReliableBound certify_robust(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                             const HermitianOperator& rho, double eps, double eps_prime,
                             const CertifyOptions& opts = {});

/// Canonical bound arithmetic, shared by certification, verification and
/// the certificate re-verifier so the same inputs reproduce the same
/// double bit for bit.
double certified_bound_arithmetic(double linear_const, const RealVector& gamma,
                                  const RealVector& y, double eps_prime, const RealVector& z,
                                  double zeta);

struct VerifyResult {
  bool verified = false;
  double recomputed_lower = 0;
  std::string diagnostics;
};

/// Independent re-check of a certificate: recomputes the gradient,
/// verifies the linear matrix inequality spectrally at tolerance zero,
/// checks -z <= y <= z elementwise, and redoes the bound arithmetic.
VerifyResult verify_certificate(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                                const HermitianOperator& rho, const RealVector& y,
                                const RealVector& z, double eps, double eps_prime);

/// The candidate state with any negative part shifted away:
/// rho + |lambda_min| I when lambda_min < 0, rho otherwise.
HermitianOperator shift_to_psd(const HermitianOperator& rho);

} // namespace qkdbound

#endif
