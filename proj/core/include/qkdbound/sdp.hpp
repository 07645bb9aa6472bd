#ifndef QKDBOUND_SDP_HPP
#define QKDBOUND_SDP_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qkdbound/hermitian.hpp"

namespace qkdbound {

/// Standard-form linear SDP over one Hermitian PSD variable:
///   minimize   <objective, X>
///   subject to <B_j, X> = b_j  for every constraint (B_j, b_j),
///              X >= 0.
/// The dual reads: maximize b.y subject to sum_j y_j B_j <= objective.
struct SdpProblem {
  HermitianOperator objective;
  std::vector<std::pair<HermitianOperator, double>> constraints;
  Eigen::Index variable_dim = 0;

  void validate() const;
};

enum class SdpStatus { Optimal, MaxIter, Infeasible, NumericalTrouble };

struct SdpResiduals {
  double primal_feasibility = 0; // ||A(X) - b|| / (1 + ||b||)
  double dual_feasibility = 0;   // ||A*(y) + S - C||_F / (1 + ||C||_F)
  double gap = 0;                // |<C,X> - b.y| / (1 + |<C,X>| + |b.y|)
};

struct SdpSolution {
  HermitianOperator primal_X;
  RealVector dual_y;
  double primal_obj = 0;
  double dual_obj = 0;
  SdpStatus status = SdpStatus::NumericalTrouble;
  SdpResiduals residuals;
  int iterations = 0;
  std::string message;
};

/// Dense primal-dual interior-point solve (Nesterov-Todd scaling on a
/// homogeneous self-dual embedding, Mehrotra predictor-corrector).
/// Dependent constraint rows are dropped after a Hilbert-Schmidt
/// Gram-Schmidt pass, with ConsistencyError if their right-hand sides
/// contradict the kept rows; dual multipliers of dropped rows are zero.
/// Whatever the exit status, the returned iterate is the best available:
/// certificate soundness downstream never relies on solver convergence.
SdpSolution solve(const SdpProblem& p, double tol = 1e-9, int max_iter = 100);

/// Shifts the multiplier of the identity constraint down until
/// objective - sum_j y_j B_j is verifiably PSD, which can only lower the
/// dual objective. Returns the repaired multipliers and the certified
/// dual value b.y'. safety_margin < 0 selects 1e-12 (1 + ||objective||).
std::pair<RealVector, double> restore_dual_feasibility(const SdpProblem& p, const RealVector& y,
                                                       int identity_index,
                                                       double safety_margin = -1.0);

/// Plain-text dump (matrix-market flavored) for cross-checks against
/// external solvers.
void dump_problem(const SdpProblem& p, std::ostream& os);

/// Compensated (Neumaier) dot product; used wherever certified bound
/// arithmetic must be reproducible from serialized values.
double compensated_dot(const RealVector& a, const RealVector& b);

/// Compensated sum.
double compensated_sum(const RealVector& a);

} // namespace qkdbound

#endif
