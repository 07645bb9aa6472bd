#include "qkdbound/constraints.hpp"

#include <cmath>

namespace qkdbound {

Eigen::Index ConstraintSet::dim() const {
  if (gammas.empty()) throw DimensionError("ConstraintSet: empty");
  return gammas.front().first.dim();
}

void ConstraintSet::validate() const {
  const Eigen::Index d = dim();
  for (const auto& [op, v] : gammas) {
    (void)v;
    if (op.dim() != d) throw DimensionError("ConstraintSet: mixed dimensions");
  }
  if (identity_index < 0 || identity_index >= static_cast<int>(gammas.size()))
    throw ConfigError("ConstraintSet: identity_index out of range");
  const auto& [id_op, id_val] = gammas[identity_index];
  const double defect = (id_op.matrix() - ComplexMatrix::Identity(d, d)).norm();
  if (defect > 1e-12 * std::sqrt(static_cast<double>(d)) || std::abs(id_val - 1.0) > 1e-12)
    throw ConfigError("ConstraintSet: entry at identity_index must be (identity, 1)");
  if (eps_prime < 0) throw ParameterError("ConstraintSet: eps_prime must be nonnegative");
}

double ConstraintSet::observed_violation(const HermitianOperator& rho) const {
  const Eigen::Index d = dim();
  if (rho.dim() != d) throw DimensionError("observed_violation: dimension mismatch");
  double worst = 0;
  for (const auto& [op, target] : gammas) {
    // Neumaier accumulation of Tr(Gamma rho) = sum_ij Gamma_ij conj(rho_ij).
    double s = 0, comp = 0;
    auto add = [&](double term) {
      const double t = s + term;
      if (std::abs(s) >= std::abs(term))
        comp += (s - t) + term;
      else
        comp += (term - t) + s;
      s = t;
    };
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        add((op.matrix()(i, j) * std::conj(rho.matrix()(i, j))).real());
    const double value = s + comp;
    worst = std::max(worst, std::abs(value - target));
  }
  return worst;
}

RealVector ConstraintSet::values() const {
  RealVector v(static_cast<Eigen::Index>(gammas.size()));
  for (std::size_t i = 0; i < gammas.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = gammas[i].second;
  return v;
}

ConstraintSet make_constraint_set(std::vector<std::pair<HermitianOperator, double>> rows,
                                  double eps_prime) {
  if (rows.empty()) throw ConfigError("make_constraint_set: no rows");
  ConstraintSet cs;
  cs.gammas.reserve(rows.size() + 1);
  cs.gammas.emplace_back(HermitianOperator::identity(rows.front().first.dim()), 1.0);
  for (auto& r : rows) cs.gammas.push_back(std::move(r));
  cs.identity_index = 0;
  cs.eps_prime = eps_prime;
  cs.validate();
  return cs;
}

} // namespace qkdbound
