#ifndef QKDBOUND_TESTS_BB84_FIXTURE_HPP
#define QKDBOUND_TESTS_BB84_FIXTURE_HPP

// Hand-built entanglement-based BB84 with detector-efficiency mismatch:
// Alice measures a qubit, Bob a qutrit whose third dimension is the
// no-click outcome. Kept independently simple so library modules can be
// checked against it.

#include <cmath>
#include <vector>

#include "qkdbound/channels.hpp"
#include "qkdbound/constraints.hpp"
#include "test_util.hpp"

namespace qkdtest {

using qkdbound::AnnouncementMap;
using qkdbound::KeyMapChannel;

struct Bb84Fixture {
  double p_z = 0.99;
  double eta = 1.0;
  std::vector<std::vector<HermitianOperator>> alice_groups;
  std::vector<std::vector<HermitianOperator>> bob_groups;
  AnnouncementMap alice;
  AnnouncementMap bob;
  KeyMapChannel g;

  explicit Bb84Fixture(double pz = 0.99, double eta_in = 1.0) : p_z(pz), eta(eta_in) {
    using qkdbound::ComplexMatrix;
    ComplexMatrix k0 = ComplexMatrix::Zero(2, 2), k1 = ComplexMatrix::Zero(2, 2);
    k0(0, 0) = 1;
    k1(1, 1) = 1;
    ComplexMatrix plus(2, 2), minus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    minus << 0.5, -0.5, -0.5, 0.5;

    alice_groups = {{HermitianOperator(p_z * k0), HermitianOperator(p_z * k1)},
                    {HermitianOperator((1 - p_z) * plus), HermitianOperator((1 - p_z) * minus)}};

    auto embed = [](const ComplexMatrix& q) {
      ComplexMatrix m = ComplexMatrix::Zero(3, 3);
      m.topLeftCorner(2, 2) = q;
      return m;
    };
    ComplexMatrix b1 = embed(p_z * k0), b2 = embed(p_z * eta * k1);
    ComplexMatrix b3 = embed((1 - p_z) * plus), b4 = embed((1 - p_z) * eta * minus);
    ComplexMatrix b5 = ComplexMatrix::Identity(3, 3) - b1 - b2 - b3 - b4;
    bob_groups = {{HermitianOperator(b1), HermitianOperator(b2)},
                  {HermitianOperator(b3), HermitianOperator(b4)},
                  {HermitianOperator(b5)}};

    alice = qkdbound::announcement_map(alice_groups);
    bob = qkdbound::announcement_map(bob_groups);
    g = qkdbound::build_gmap(alice, bob, {{0, 0}, {1, 1}},
                             [](int, int outcome, int) { return outcome; }, 2);
  }

  /// (I (x) E_dep)(|Phi><Phi|) embedded into the 2 (x) 3 space.
  HermitianOperator simulated_state(double p) const {
    using qkdbound::ComplexMatrix;
    ComplexVector phi = ComplexVector::Zero(4);
    phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
    ComplexMatrix bell = phi * phi.adjoint();
    ComplexMatrix dep = (1 - p) * bell + p * 0.25 * ComplexMatrix::Identity(4, 4);
    ComplexMatrix out = ComplexMatrix::Zero(6, 6);
    auto to6 = [](Eigen::Index i, Eigen::Index j) { return i * 3 + j; };
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        for (Eigen::Index k = 0; k < 2; ++k)
          for (Eigen::Index l = 0; l < 2; ++l)
            out(to6(i, j), to6(k, l)) = dep(i * 2 + j, k * 2 + l);
    return HermitianOperator(out);
  }

  /// Expectation-value constraints from the full joint outcome table.
  qkdbound::ConstraintSet constraints(const HermitianOperator& rho_sim) const {
    std::vector<std::pair<HermitianOperator, double>> rows;
    for (const auto& ga : alice_groups)
      for (const auto& pa : ga)
        for (const auto& gb : bob_groups)
          for (const auto& pb : gb) {
            const qkdbound::ComplexMatrix op = qkdbound::kron(pa.matrix(), pb.matrix());
            rows.emplace_back(HermitianOperator(op),
                              (op * rho_sim.matrix()).trace().real());
          }
    return qkdbound::make_constraint_set(std::move(rows));
  }

  /// Direct probability sum over kept announcement outcomes.
  double brute_force_pass_probability(const HermitianOperator& rho) const {
    double total = 0;
    const std::vector<std::pair<int, int>> kept{{0, 0}, {1, 1}};
    for (auto [a, b] : kept)
      for (const auto& pa : alice_groups[a])
        for (const auto& pb : bob_groups[b])
          total += (qkdbound::kron(pa.matrix(), pb.matrix()) * rho.matrix()).trace().real();
    return total;
  }
};

} // namespace qkdtest

#endif
