#include "qkdbound/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <cmath>
#include <ostream>

namespace qkdbound {

void SdpProblem::validate() const {
  if (variable_dim <= 0) throw DimensionError("SdpProblem: nonpositive dimension");
  if (objective.dim() != variable_dim)
    throw DimensionError("SdpProblem: objective dimension mismatch");
  for (const auto& [b, v] : constraints) {
    (void)v;
    if (b.dim() != variable_dim) throw DimensionError("SdpProblem: constraint dimension mismatch");
  }
}

double compensated_dot(const RealVector& a, const RealVector& b) {
  if (a.size() != b.size()) throw DimensionError("compensated_dot: size mismatch");
  double s = 0, comp = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double term = a(i) * b(i);
    const double t = s + term;
    if (std::abs(s) >= std::abs(term))
      comp += (s - t) + term;
    else
      comp += (term - t) + s;
    s = t;
  }
  return s + comp;
}

double compensated_sum(const RealVector& a) {
  return compensated_dot(a, RealVector::Ones(a.size()));
}

namespace {

double hs_dot(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.cwiseProduct(b.conjugate()).sum().real();
}

ComplexMatrix symmetrize(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

// Factor L of a (nearly) PSD matrix with L L^dag = M after clamping the
// spectrum away from zero; no hard failure near the cone boundary.
struct PsdFactor {
  ComplexMatrix l;
  ComplexMatrix l_inv;
};

PsdFactor factor_psd_clamped(const ComplexMatrix& m, double floor_rel = 1e-15) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m);
  if (es.info() != Eigen::Success) throw Error("psd factorization: eigensolver failed");
  const RealVector& lam = es.eigenvalues();
  const double top = std::max(std::abs(lam(lam.size() - 1)), 1e-300);
  RealVector roots(lam.size()), inv_roots(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    const double clamped = std::max(lam(i), floor_rel * top);
    roots(i) = std::sqrt(clamped);
    inv_roots(i) = 1.0 / roots(i);
  }
  PsdFactor f;
  f.l = es.eigenvectors() * roots.asDiagonal();
  f.l_inv = inv_roots.asDiagonal() * es.eigenvectors().adjoint();
  return f;
}

// Largest alpha in (0, 1] keeping M + alpha dM positive definite up to
// the boundary fraction; M is given through its factor.
double psd_step_length(const PsdFactor& f, const ComplexMatrix& dm) {
  const ComplexMatrix w = f.l_inv * dm * f.l_inv.adjoint();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(symmetrize(w), Eigen::EigenvaluesOnly);
  const double lam_min = es.eigenvalues()(0);
  if (lam_min >= 0) return 1.0;
  return std::min(1.0, -1.0 / lam_min);
}

struct ReducedProblem {
  ComplexMatrix c;                     // scaled objective
  std::vector<ComplexMatrix> bmats;    // scaled constraint matrices (kept rows)
  RealVector b;                        // scaled right-hand sides
  std::vector<int> kept;               // original row index of each kept row
  std::vector<double> row_scale;       // applied per-row scale
  double obj_scale = 1;
  bool contradictory = false;          // dependent rows with clashing values
  std::string note;
};

// Row-normalizes, drops rows that are linear combinations of earlier
// ones (their right-hand sides must agree), and rescales the objective.
ReducedProblem reduce(const SdpProblem& p, double rank_tol, double consistency_tol) {
  ReducedProblem rp;
  const Eigen::Index d = p.variable_dim;
  rp.obj_scale = std::max(1.0, p.objective.matrix().norm());
  rp.c = p.objective.matrix() / rp.obj_scale;

  std::vector<ComplexMatrix> ortho; // orthonormal basis of kept rows
  std::vector<RealVector> ortho_coeff_unused;
  std::vector<double> ortho_rhs; // rhs expressed against the orthonormal basis
  for (int j = 0; j < static_cast<int>(p.constraints.size()); ++j) {
    const double nrm = p.constraints[j].first.matrix().norm();
    if (nrm == 0.0) {
      if (std::abs(p.constraints[j].second) > consistency_tol) {
        rp.contradictory = true;
        rp.note = "row " + std::to_string(j) + ": zero operator with nonzero value";
        return rp;
      }
      continue;
    }
    ComplexMatrix v = p.constraints[j].first.matrix() / nrm;
    double rhs = p.constraints[j].second / nrm;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < ortho.size(); ++k) {
        const double c = hs_dot(ortho[k], v);
        v -= c * ortho[k];
        rhs -= c * ortho_rhs[k];
      }
    if (v.norm() <= rank_tol) {
      // Dependent row: merged if it agrees with the kept rows,
      // otherwise the equality system itself is infeasible.
      if (std::abs(rhs) > consistency_tol * (1.0 + std::abs(p.constraints[j].second) / nrm)) {
        rp.contradictory = true;
        rp.note = "row " + std::to_string(j) + " contradicts earlier rows (residual " +
                  std::to_string(rhs) + ")";
        return rp;
      }
      continue;
    }
    const double vn = v.norm();
    ortho.push_back(v / vn);
    ortho_rhs.push_back(rhs / vn);
    rp.bmats.push_back(p.constraints[j].first.matrix() / nrm);
    rp.kept.push_back(j);
    rp.row_scale.push_back(nrm);
  }
  rp.b.resize(static_cast<Eigen::Index>(rp.kept.size()));
  for (std::size_t k = 0; k < rp.kept.size(); ++k)
    rp.b(static_cast<Eigen::Index>(k)) = p.constraints[rp.kept[k]].second / rp.row_scale[k];
  (void)d;
  return rp;
}

} // namespace

SdpSolution solve(const SdpProblem& p, double tol, int max_iter) {
  p.validate();
  const Eigen::Index d = p.variable_dim;
  const ReducedProblem rp = reduce(p, 1e-12, 1e-8);
  const int m = static_cast<int>(rp.bmats.size());

  if (rp.contradictory) {
    SdpSolution out;
    out.primal_X = HermitianOperator::identity(d);
    out.dual_y = RealVector::Zero(static_cast<Eigen::Index>(p.constraints.size()));
    out.status = SdpStatus::Infeasible;
    out.message = "contradictory equality constraints: " + rp.note;
    return out;
  }

  const ComplexMatrix eye = ComplexMatrix::Identity(d, d);
  ComplexMatrix x = eye, s = eye;
  RealVector y = RealVector::Zero(m);
  double tau = 1.0, kappa = 1.0;

  auto a_of = [&](const ComplexMatrix& mat) {
    RealVector out(m);
    for (int j = 0; j < m; ++j) out(j) = hs_dot(rp.bmats[j], mat);
    return out;
  };
  auto a_star = [&](const RealVector& v) {
    ComplexMatrix out = ComplexMatrix::Zero(d, d);
    for (int j = 0; j < m; ++j) out += v(j) * rp.bmats[j];
    return out;
  };

  const double bnorm = rp.b.norm();
  const double cnorm = rp.c.norm();

  SdpSolution sol;
  sol.dual_y = RealVector::Zero(static_cast<Eigen::Index>(p.constraints.size()));

  // Best iterates seen so far, by primal and dual merit. Degenerate
  // problems can degrade before the loop notices, so the answer is the
  // best snapshot, not whatever the breakdown left behind.
  ComplexMatrix best_x = eye;
  RealVector best_y = RealVector::Zero(m);
  ComplexMatrix best_s = eye;
  double best_primal_merit = std::numeric_limits<double>::infinity();
  double best_dual_merit = std::numeric_limits<double>::infinity();
  SdpResiduals best_primal_res, best_dual_res;

  auto finalize = [&](SdpStatus status, const std::string& msg, int iters) {
    if (status == SdpStatus::Optimal || status == SdpStatus::Infeasible) {
      const bool broken = !x.allFinite() || !y.allFinite() || !s.allFinite() ||
                          !std::isfinite(tau) || tau <= 0;
      if (!broken) {
        const double t = tau;
        best_x = x / t;
        best_y = y / t;
        best_s = s / t;
        best_primal_res.primal_feasibility = (a_of(best_x) - rp.b).norm() / (1.0 + bnorm);
        best_dual_res.dual_feasibility =
            (a_star(best_y) + best_s - rp.c).norm() / (1.0 + cnorm);
      } else {
        status = SdpStatus::NumericalTrouble;
      }
    }
    sol.primal_X = HermitianOperator(best_x);
    sol.primal_obj = hs_dot(rp.c, best_x) * rp.obj_scale;
    sol.dual_obj = rp.b.dot(best_y) * rp.obj_scale;
    sol.residuals.primal_feasibility = best_primal_res.primal_feasibility;
    sol.residuals.dual_feasibility = best_dual_res.dual_feasibility;
    sol.residuals.gap = std::abs(sol.primal_obj - sol.dual_obj) /
                        (1.0 + std::abs(sol.primal_obj) + std::abs(sol.dual_obj));
    for (int j = 0; j < m; ++j)
      sol.dual_y(rp.kept[j]) = best_y(j) * rp.obj_scale / rp.row_scale[j];
    sol.status = status;
    sol.message = msg;
    sol.iterations = iters;
    return sol;
  };

  int stall = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (!x.allFinite() || !y.allFinite() || !s.allFinite() || !std::isfinite(tau) ||
        !std::isfinite(kappa) || tau <= 0 || kappa < 0)
      return finalize(SdpStatus::NumericalTrouble, "iterate became non-finite", iter);

    // Residuals of the self-dual embedding.
    RealVector res_p = tau * rp.b - a_of(x);
    ComplexMatrix res_d = tau * rp.c - a_star(y) - s;
    double res_g = hs_dot(rp.c, x) - rp.b.dot(y) + kappa;
    const double mu = (hs_dot(x, s) + tau * kappa) / static_cast<double>(d + 1);

    // Convergence on the de-homogenized iterate; snapshot the best
    // primal and dual candidates seen.
    {
      const ComplexMatrix xh = x / tau;
      const RealVector yh = y / tau;
      const ComplexMatrix sh = s / tau;
      const double pres = (a_of(xh) - rp.b).norm() / (1.0 + bnorm);
      const double dres = (a_star(yh) + sh - rp.c).norm() / (1.0 + cnorm);
      const double pobj = hs_dot(rp.c, xh);
      const double dobj = rp.b.dot(yh);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      const double compl_gap = hs_dot(xh, sh) / (1.0 + std::abs(pobj) + std::abs(dobj));

      const bool sane = yh.allFinite() && xh.allFinite() &&
                        (m == 0 || yh.cwiseAbs().maxCoeff() < 1e12);
      if (sane && pres + gap + compl_gap < best_primal_merit) {
        best_primal_merit = pres + gap + compl_gap;
        best_x = xh;
        best_primal_res.primal_feasibility = pres;
      }
      if (sane && dres + gap + compl_gap < best_dual_merit) {
        best_dual_merit = dres + gap + compl_gap;
        best_y = yh;
        best_s = sh;
        best_dual_res.dual_feasibility = dres;
      }

      if (pres <= tol && dres <= tol && gap <= tol && compl_gap <= tol)
        return finalize(SdpStatus::Optimal, "converged", iter);

      // Infeasibility: tau collapses while kappa stays bounded away.
      if (tau < 1e-10 * std::max(1.0, kappa) && mu < 1e-10) {
        if (rp.b.dot(y) > tol)
          return finalize(SdpStatus::Infeasible,
                          "primal infeasible (Farkas certificate in dual_y)", iter);
        if (-hs_dot(rp.c, x) > tol)
          return finalize(SdpStatus::Infeasible, "dual infeasible / primal unbounded", iter);
        return finalize(SdpStatus::NumericalTrouble, "embedding collapsed", iter);
      }
    }

    // Nesterov-Todd scaling point through spectrum-clamped factors;
    // boundary iterates degrade gracefully instead of failing outright.
    const PsdFactor fx = factor_psd_clamped(x);
    const PsdFactor fs = factor_psd_clamped(s);
    const ComplexMatrix lx = fx.l;
    const ComplexMatrix ls = fs.l;
    Eigen::JacobiSVD<ComplexMatrix> svd(ls.adjoint() * lx,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RealVector lam = svd.singularValues();
    if (lam(lam.size() - 1) <= 0)
      return finalize(SdpStatus::NumericalTrouble, "NT scaling broke down", iter);
    const ComplexMatrix r_mat = lx * svd.matrixV() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
    const ComplexMatrix r_inv = lam.cwiseSqrt().asDiagonal() *
                                svd.matrixV().adjoint() * fx.l_inv;

    // Scaled data.
    std::vector<ComplexMatrix> bt(m);
    for (int j = 0; j < m; ++j) bt[j] = symmetrize(r_mat.adjoint() * rp.bmats[j] * r_mat);
    const ComplexMatrix ct = symmetrize(r_mat.adjoint() * rp.c * r_mat);
    const ComplexMatrix rdt = symmetrize(r_mat.adjoint() * res_d * r_mat);

    // Schur complement with a whisper of regularization.
    Eigen::MatrixXd schur(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        const double v = hs_dot(bt[i], bt[j]);
        schur(i, j) = v;
        schur(j, i) = v;
      }
    for (int i = 0; i < m; ++i) schur(i, i) += 1e-14 * (1.0 + schur(i, i));
    Eigen::LDLT<Eigen::MatrixXd> schur_f(schur);
    if (schur_f.info() != Eigen::Success)
      return finalize(SdpStatus::NumericalTrouble, "Schur factorization failed", iter);

    RealVector u(m);
    for (int j = 0; j < m; ++j) u(j) = hs_dot(bt[j], ct);
    const double cc = hs_dot(ct, ct);

    auto solve_schur = [&](const RealVector& rhs) {
      RealVector z = schur_f.solve(rhs);
      z += schur_f.solve(rhs - schur * z); // one refinement pass
      return z;
    };

    // Direction for given centering sigma and complementarity correction.
    auto direction = [&](double sigma, const ComplexMatrix* corr, double corr_tk,
                         ComplexMatrix& dx, RealVector& dy, ComplexMatrix& ds, double& dtau,
                         double& dkappa) {
      ComplexMatrix rv(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
          Complex val = (i == j) ? Complex(sigma * mu - lam(i) * lam(i), 0) : Complex(0, 0);
          if (corr) val -= (*corr)(i, j);
          rv(i, j) = 2.0 * val / (lam(i) + lam(j));
        }
      const double rhs_tk = sigma * mu - tau * kappa - corr_tk;

      const ComplexMatrix base = rv - rdt;
      RealVector r1(m);
      for (int j = 0; j < m; ++j) r1(j) = res_p(j) - hs_dot(bt[j], base);
      const double r2 = -res_g - hs_dot(ct, base) - rhs_tk / tau;

      const RealVector q1 = solve_schur(u + rp.b);
      const RealVector q2 = solve_schur(r1);
      const double denom = (u - rp.b).dot(q1) - cc - kappa / tau;
      dtau = (r2 - (u - rp.b).dot(q2)) / denom;
      dy = q1 * dtau + q2;

      ComplexMatrix dst = rdt + ct * dtau;
      for (int j = 0; j < m; ++j) dst -= dy(j) * bt[j];
      dst = symmetrize(dst);
      const ComplexMatrix dxt = symmetrize(rv - dst);
      dx = symmetrize(r_mat * dxt * r_mat.adjoint());
      ds = symmetrize(r_inv.adjoint() * dst * r_inv);
      dkappa = (rhs_tk - kappa * dtau) / tau;
    };

    auto step_length = [&](const ComplexMatrix& dx, const ComplexMatrix& ds, double dtau,
                           double dkappa) {
      double a = 1.0;
      a = std::min(a, psd_step_length(fx, dx));
      a = std::min(a, psd_step_length(fs, ds));
      if (dtau < 0) a = std::min(a, -tau / dtau);
      if (dkappa < 0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    auto finite_direction = [](const ComplexMatrix& dx, const RealVector& dy,
                               const ComplexMatrix& ds, double dtau, double dkappa) {
      return dx.allFinite() && dy.allFinite() && ds.allFinite() && std::isfinite(dtau) &&
             std::isfinite(dkappa);
    };

    // Predictor.
    ComplexMatrix dx_a, ds_a;
    RealVector dy_a;
    double dtau_a, dkappa_a;
    direction(0.0, nullptr, 0.0, dx_a, dy_a, ds_a, dtau_a, dkappa_a);
    if (!finite_direction(dx_a, dy_a, ds_a, dtau_a, dkappa_a))
      return finalize(SdpStatus::NumericalTrouble, "non-finite predictor direction", iter);
    const double alpha_a = step_length(dx_a, ds_a, dtau_a, dkappa_a);
    const double mu_aff = (hs_dot(x + alpha_a * dx_a, s + alpha_a * ds_a) +
                           (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkappa_a)) /
                          static_cast<double>(d + 1);
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

    // Corrector.
    const ComplexMatrix dxt_a = symmetrize(r_inv * dx_a * r_inv.adjoint());
    const ComplexMatrix dst_a = symmetrize(r_mat.adjoint() * ds_a * r_mat);
    const ComplexMatrix corr = symmetrize(dxt_a * dst_a);
    ComplexMatrix dx, ds;
    RealVector dy;
    double dtau, dkappa;
    direction(sigma, &corr, dtau_a * dkappa_a, dx, dy, ds, dtau, dkappa);
    if (!finite_direction(dx, dy, ds, dtau, dkappa))
      return finalize(SdpStatus::NumericalTrouble, "non-finite corrector direction", iter);

    double alpha = 0.99 * step_length(dx, ds, dtau, dkappa);
    alpha = std::min(alpha, 1.0);
    // Rounding near degenerate boundaries can push the analytic step
    // fraction outside the cone; back off until both factors exist.
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::LLT<ComplexMatrix> try_x(symmetrize(x + alpha * dx));
      Eigen::LLT<ComplexMatrix> try_s(symmetrize(s + alpha * ds));
      if (try_x.info() == Eigen::Success && try_s.info() == Eigen::Success &&
          tau + alpha * dtau > 0 && kappa + alpha * dkappa > 0)
        break;
      alpha *= 0.5;
    }
    if (alpha < 1e-9) {
      if (++stall >= 3)
        return finalize(SdpStatus::NumericalTrouble, "step length collapsed", iter);
    } else {
      stall = 0;
    }

    x = symmetrize(x + alpha * dx);
    y += alpha * dy;
    s = symmetrize(s + alpha * ds);
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }
  return finalize(SdpStatus::MaxIter, "iteration limit reached", max_iter);
}

std::pair<RealVector, double> restore_dual_feasibility(const SdpProblem& p, const RealVector& y,
                                                       int identity_index, double safety_margin) {
  p.validate();
  if (identity_index < 0 || identity_index >= static_cast<int>(p.constraints.size()))
    throw CertificateError("restore_dual_feasibility: identity index out of range");
  if (y.size() != static_cast<Eigen::Index>(p.constraints.size()))
    throw CertificateError("restore_dual_feasibility: multiplier count mismatch");
  if (!y.allFinite()) throw CertificateError("restore_dual_feasibility: non-finite multipliers");
  if (y.cwiseAbs().maxCoeff() > 1e13)
    throw CertificateError("restore_dual_feasibility: multipliers too large to verify");
  const Eigen::Index d = p.variable_dim;
  const double id_defect =
      (p.constraints[identity_index].first.matrix() - ComplexMatrix::Identity(d, d)).norm();
  if (id_defect > 1e-12 * std::sqrt(static_cast<double>(d)))
    throw CertificateError(
        "restore_dual_feasibility: constraint at identity_index is not the identity");

  const double margin =
      (safety_margin >= 0) ? safety_margin : 1e-12 * (1.0 + p.objective.matrix().norm());

  auto slack_min_eig = [&](const RealVector& mult) {
    ComplexMatrix r = p.objective.matrix();
    for (Eigen::Index j = 0; j < mult.size(); ++j)
      r -= mult(j) * p.constraints[j].first.matrix();
    return min_eigenvalue(HermitianOperator(r));
  };

  RealVector yr = y;
  // The shifted slack is PSD by arithmetic; re-check spectrally and keep
  // shifting if eigensolver backward error says otherwise. The applied
  // shift must clear the ulp of the multiplier it lands on, or large
  // multipliers would absorb it.
  double lam = slack_min_eig(yr);
  for (int tries = 0; tries < 60 && lam < 0; ++tries) {
    const double wanted = -lam + margin;
    const double ulp_floor =
        4.0 * std::numeric_limits<double>::epsilon() * std::abs(yr(identity_index));
    yr(identity_index) -= std::max(wanted, ulp_floor);
    lam = slack_min_eig(yr);
  }
  if (lam < 0)
    throw CertificateError("restore_dual_feasibility: could not reach verified feasibility");

  RealVector rhs(yr.size());
  for (Eigen::Index j = 0; j < yr.size(); ++j) rhs(j) = p.constraints[j].second;
  return {yr, compensated_dot(rhs, yr)};
}

void dump_problem(const SdpProblem& p, std::ostream& os) {
  os << "%%qkdbound sdp dump\n";
  os << "% dim " << p.variable_dim << " constraints " << p.constraints.size() << "\n";
  auto emit = [&](const ComplexMatrix& m, const char* tag) {
    os << tag << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%ld %ld %.17g %.17g\n", static_cast<long>(i + 1),
                      static_cast<long>(j + 1), m(i, j).real(), m(i, j).imag());
        os << buf;
      }
  };
  emit(p.objective.matrix(), "objective");
  for (std::size_t j = 0; j < p.constraints.size(); ++j) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "rhs %.17g\n", p.constraints[j].second);
    os << buf;
    emit(p.constraints[j].first.matrix(), "constraint");
  }
}

} // namespace qkdbound
