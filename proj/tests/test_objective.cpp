#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkdbound/objective.hpp"
#include "support/bb84_fixture.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"
#include "support/toy_channel.hpp"

using namespace qkdbound;
using namespace qkdtest;

namespace {

HermitianOperator well_conditioned_density(std::mt19937_64& rng, Eigen::Index d) {
  const HermitianOperator r = random_density(rng, d);
  return HermitianOperator(0.7 * r.matrix() +
                           0.3 / static_cast<double>(d) * ComplexMatrix::Identity(d, d));
}

// Direct relative entropy D(sigma || tau) in bits via matrix logarithms;
// an independent route to the entropy-difference form used by the library.
double direct_relative_entropy(const HermitianOperator& sigma, const HermitianOperator& tau) {
  const HermitianOperator ls = mat_log(sigma), lt = mat_log(tau);
  return (sigma.matrix() * (ls.matrix() - lt.matrix())).trace().real();
}

} // namespace

TEST_CASE("perturbation_penalty fixed values and contract") {
  CHECK(perturbation_penalty(0.25, 2) == doctest::Approx(1.5).epsilon(1e-15));

  // Independent long-double evaluation of the same closed form.
  {
    const long double eps = 1e-12L, dp = 16.0L;
    const long double k = eps * (dp - 1);
    const long double want = 2 * k * std::log2(static_cast<double>(dp / k));
    CHECK(perturbation_penalty(1e-12, 16) ==
          doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
  }

  // Monotone decreasing as eps -> 0 on a log grid.
  double prev = perturbation_penalty(1e-3, 16);
  for (double eps = 1e-4; eps >= 1e-13; eps *= 0.1) {
    const double z = perturbation_penalty(eps, 16);
    CHECK(z < prev);
    CHECK(z > 0.0);
    prev = z;
  }

  // Boundary: the largest admissible eps is accepted, anything above is not.
  const double cap = max_perturbation(5);
  CHECK_NOTHROW(perturbation_penalty(cap, 5));
  CHECK_THROWS_AS(perturbation_penalty(cap * 1.01, 5), ParameterError);
  CHECK_THROWS_AS(perturbation_penalty(0.0, 5), ParameterError);
}

TEST_CASE("objective_value: block-diagonal states score zero") {
  ObjectiveContext ctx(identity_channel({2, 2}), 1e-12);
  ComplexMatrix block = ComplexMatrix::Zero(4, 4);
  block.topLeftCorner(2, 2) << 0.4, Complex(0.1, 0.05), Complex(0.1, -0.05), 0.2;
  block.bottomRightCorner(2, 2) << 0.3, 0.0, 0.0, 0.1;
  CHECK(objective_value(ctx, HermitianOperator(block)) ==
        doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("objective_value: dephasing |+><+| costs one bit") {
  ObjectiveContext ctx(identity_channel({1, 1}), 1e-12);
  ComplexMatrix plus(2, 2);
  plus << 0.5, 0.5, 0.5, 0.5;
  CHECK(objective_value(ctx, HermitianOperator(plus)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("objective_value equals the direct relative-entropy form") {
  ObjectiveContext ctx(identity_channel({2, 3}), 1e-12);
  auto rng = make_rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const HermitianOperator rho = well_conditioned_density(rng, 5);
    const HermitianOperator sigma = ctx.gmap.apply(rho);
    const HermitianOperator tau = pinch(ctx.zchannel, sigma);
    CHECK(std::abs(objective_value(ctx, rho) - direct_relative_entropy(sigma, tau)) <= 1e-10);
  }
}

TEST_CASE("objective_value on BB84 with the simulated depolarizing attack") {
  const Bb84Fixture fx(0.99, 1.0);
  ObjectiveContext ctx(fx.g, 1e-12);
  // Bell-diagonal conditional-entropy evaluation: the depolarized Bell
  // state has spectrum (1-3p/4, p/4, p/4, p/4) and per-sifted-signal
  // value 1 + h(p/2) - H(spectrum). (The depolarizing channel is not
  // the optimal attack; minimization would push this down to 1 - h(p/2).)
  for (double p : {0.1, 0.2}) {
    const HermitianOperator rho = fx.simulated_state(p);
    const double p_pass = fx.g.pass_probability(rho);
    const double got = objective_value(ctx, rho) / p_pass;
    const double hspec = -(1 - 0.75 * p) * std::log2(1 - 0.75 * p) -
                         3 * (p / 4) * std::log2(p / 4);
    CHECK(got == doctest::Approx(1.0 + binary_entropy(p / 2) - hspec).epsilon(1e-9));
  }
}

TEST_CASE("perturbed value stays within the continuity penalty") {
  const Bb84Fixture fx(0.95, 0.85);
  ObjectiveContext ctx(fx.g, 1e-6);
  auto rng = make_rng(37);
  for (int rep = 0; rep < 8; ++rep) {
    const HermitianOperator rho = random_density(rng, 6);
    const double f0 = objective_value(ctx, rho);
    const double fe = objective_value_perturbed(ctx, rho);
    const double z = perturbation_penalty(ctx.eps, ctx.d_out());
    CHECK(std::abs(f0 - fe) <= z);
    CHECK(fe >= -1e-12);
    CHECK(f0 >= -1e-12);
  }
}

TEST_CASE("perturbed value converges to the bare value as eps -> 0") {
  ObjectiveContext ctx(identity_channel({2, 2}), 1e-12);
  auto rng = make_rng(41);
  const HermitianOperator rho = well_conditioned_density(rng, 4);
  const double f0 = objective_value(ctx, rho);
  CHECK(std::abs(objective_value_at(ctx, rho, 1e-10) - f0) <= 1e-8);

  // Block-diagonal input: f = 0 and the perturbed value obeys the penalty.
  ComplexMatrix block = ComplexMatrix::Zero(4, 4);
  block.topLeftCorner(2, 2) = 0.5 * ComplexMatrix::Identity(2, 2) * 0.8;
  block.bottomRightCorner(2, 2) = 0.5 * ComplexMatrix::Identity(2, 2) * 0.2;
  const HermitianOperator bd(block);
  const double fe = objective_value_at(ctx, bd, 1e-8);
  CHECK(std::abs(fe) <= perturbation_penalty(1e-8, 4));
}

TEST_CASE("gradient matches central finite differences") {
  const Bb84Fixture fx(0.99, 0.9);
  ObjectiveContext ctx(fx.g, 1e-9);
  auto rng = make_rng(43);
  const HermitianOperator rho = well_conditioned_density(rng, 6);
  const HermitianOperator grad = objective_gradient(ctx, rho);

  auto f = [&](const HermitianOperator& r) { return objective_value_perturbed(ctx, r); };
  const double t = 1e-5;
  for (int rep = 0; rep < 10; ++rep) {
    HermitianOperator delta = random_hermitian(rng, 6);
    delta = delta * (1.0 / delta.matrix().norm());
    const double fd = finite_difference_directional(f, rho, delta, t);
    const double lin = (transpose_std(delta).matrix() * grad.matrix()).trace().real();
    CHECK(std::abs(fd - lin) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("gradient is Hermitian and vanishes at the dephasing fixed point") {
  ObjectiveContext ctx(identity_channel({1, 1}), 1e-12);
  const HermitianOperator mixed = HermitianOperator(0.5 * ComplexMatrix::Identity(2, 2));
  const HermitianOperator grad = objective_gradient(ctx, mixed);
  CHECK(grad.matrix().norm() <= 1e-12);

  const Bb84Fixture fx;
  ObjectiveContext bctx(fx.g, 1e-9);
  auto rng = make_rng(47);
  const HermitianOperator g2 = objective_gradient(bctx, well_conditioned_density(rng, 6));
  CHECK((g2.matrix() - g2.matrix().adjoint()).norm() <= 1e-12 * std::max(1.0, g2.matrix().norm()));
}

TEST_CASE("gradient at eps = 0 raises SingularOperand on rank-deficient output") {
  const Bb84Fixture fx(0.99, 1.0);
  ObjectiveContext ctx(fx.g, 1e-12);
  const HermitianOperator pure = fx.simulated_state(0.0); // Bell state, G(rho) rank deficient
  CHECK_THROWS_AS(objective_gradient_at(ctx, pure, 0.0), SingularOperand);
  CHECK_NOTHROW(objective_gradient_at(ctx, pure, 1e-12));
}

TEST_CASE("convexity spot-check along mixtures") {
  const Bb84Fixture fx(0.9, 0.8);
  ObjectiveContext ctx(fx.g, 1e-9);
  auto rng = make_rng(53);
  for (int rep = 0; rep < 4; ++rep) {
    const HermitianOperator a = random_density(rng, 6), b = random_density(rng, 6);
    const double fa = objective_value_perturbed(ctx, a);
    const double fb = objective_value_perturbed(ctx, b);
    for (double lam : {0.2, 0.5, 0.8}) {
      const HermitianOperator mix(lam * a.matrix() + (1 - lam) * b.matrix());
      CHECK(objective_value_perturbed(ctx, mix) <= lam * fa + (1 - lam) * fb + 1e-10);
    }
  }
}

TEST_CASE("first-order lower bound: the linearization undercuts the function") {
  const Bb84Fixture fx(0.95, 1.0);
  ObjectiveContext ctx(fx.g, 1e-9);
  auto rng = make_rng(59);
  for (int rep = 0; rep < 6; ++rep) {
    const HermitianOperator rho = well_conditioned_density(rng, 6);
    const HermitianOperator sigma = random_density(rng, 6);
    const double frho = objective_value_perturbed(ctx, rho);
    const double fsig = objective_value_perturbed(ctx, sigma);
    const HermitianOperator grad = objective_gradient(ctx, rho);
    const double slope =
        ((sigma.matrix() - rho.matrix()).transpose() * grad.matrix()).trace().real();
    CHECK(fsig >= frho + slope - 1e-9);
  }
}
