#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkdbound/protocols.hpp"
#include "qkdbound/subspace.hpp"
#include "support/bb84_fixture.hpp"
#include "support/fock_oracle.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace qkdbound;
using namespace qkdtest;

TEST_CASE("coherent_overlap closed form") {
  CHECK(std::abs(coherent_overlap(Complex(0.1, 0), Complex(-0.1, 0)) - std::exp(-0.02)) <=
        1e-15);
  CHECK(std::abs(coherent_overlap(Complex(0.1, 0), Complex(-0.1, 0)) - 0.980199) <= 1e-6);
  // Generic pair against the series definition sum_n conj(a)^n b^n / n!.
  const Complex a(0.3, -0.2), b(-0.1, 0.4);
  Complex series = 0;
  double fact = 1;
  for (int n = 0; n < 30; ++n) {
    if (n > 0) fact *= n;
    series += std::pow(std::conj(a) * b, n) / fact;
  }
  series *= std::exp(-0.5 * (std::norm(a) + std::norm(b)));
  CHECK(std::abs(coherent_overlap(a, b) - series) <= 1e-14);
}

TEST_CASE("span_coordinates reproduces the Gram matrix") {
  auto rng = make_rng(71);
  const ComplexMatrix m = random_complex(rng, 4, 4);
  const ComplexMatrix gram = m.adjoint() * m; // PSD Gram
  const auto coords = span_coordinates(gram);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(coords[i].dot(coords[j]) - gram(i, j)) <= 1e-12 * gram.norm());
}

TEST_CASE("source_replacement: orthonormal signals give a maximally mixed register") {
  std::vector<ComplexVector> signals;
  for (int i = 0; i < 4; ++i) {
    ComplexVector v = ComplexVector::Zero(4);
    v(i) = 1;
    signals.push_back(v);
  }
  const SourceReplacement sr = source_replacement(signals, {0.25, 0.25, 0.25, 0.25});
  CHECK(mat_close(sr.rho_a.matrix(), 0.25 * ComplexMatrix::Identity(4, 4), 1e-14));
  CHECK(sr.tomography.size() == 16);
}

TEST_CASE("source_replacement: reduced state equals the partial trace of the purification") {
  // Four random unit signals with uneven probabilities.
  auto rng = make_rng(73);
  std::vector<ComplexVector> signals;
  for (int i = 0; i < 4; ++i) {
    ComplexVector v = random_complex(rng, 3, 1);
    signals.push_back(v / v.norm());
  }
  const std::vector<double> probs{0.4, 0.3, 0.2, 0.1};
  const SourceReplacement sr = source_replacement(signals, probs);

  const HermitianOperator psi_op =
      HermitianOperator::from_hermitian(sr.psi * sr.psi.adjoint());
  const HermitianOperator reduced = partial_trace(psi_op, {4, 3}, {0});
  CHECK(mat_close(reduced.matrix(), sr.rho_a.matrix(), 1e-13));

  CHECK_THROWS_AS(source_replacement(signals, {0.5, 0.5, 0.5, 0.5}), ConfigError);
}

TEST_CASE("build_bb84_mismatch matches the hand-built reference construction") {
  for (double eta : {1.0, 0.75}) {
    for (double p : {0.0, 0.1}) {
      const auto [spec, obs] = build_bb84_mismatch(eta, p, 0.99);
      const Bb84Fixture fx(0.99, eta);
      const HermitianOperator rho_sim = fx.simulated_state(p);
      // Joint probabilities agree with the direct POVM evaluation.
      Eigen::Index j = 0;
      for (const auto& ga : fx.alice_groups)
        for (const auto& pa : ga) {
          Eigen::Index k = 0;
          for (const auto& gb : fx.bob_groups)
            for (const auto& pb : gb) {
              const double want =
                  (kron(pa.matrix(), pb.matrix()) * rho_sim.matrix()).trace().real();
              CHECK(obs.joint_probs(j, k) == doctest::Approx(want).epsilon(1e-12));
              ++k;
            }
          ++j;
        }
    }
  }
}

TEST_CASE("bb84 statistics: perfect correlations at p = 0, factorization at p = 1") {
  const auto [spec, ideal] = build_bb84_mismatch(1.0, 0.0, 0.9);
  for (Eigen::Index j = 0; j < ideal.joint_probs.rows(); ++j)
    for (Eigen::Index k = 0; k < ideal.joint_probs.cols(); ++k) {
      const auto [a, alpha] = spec.alice_split(j);
      const auto [b, beta] = spec.bob_split(k);
      if (a == b && b < 2 && alpha != beta) // same basis, different outcome
        CHECK(std::abs(ideal.joint_probs(j, k)) <= 1e-14);
    }
  CHECK(ideal.joint_probs.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const auto [spec2, noisy] = build_bb84_mismatch(1.0, 1.0, 0.9);
  const Eigen::VectorXd pa = noisy.joint_probs.rowwise().sum();
  const Eigen::VectorXd pb = noisy.joint_probs.colwise().sum();
  for (Eigen::Index j = 0; j < pa.size(); ++j)
    for (Eigen::Index k = 0; k < pb.size(); ++k)
      CHECK(noisy.joint_probs(j, k) == doctest::Approx(pa(j) * pb(k)).epsilon(1e-10));
  (void)spec2;
}

TEST_CASE("compute_leak on BB84") {
  {
    const auto [spec, obs] = build_bb84_mismatch(1.0, 0.0, 0.99);
    const auto [leak, p_pass] = compute_leak(spec, obs);
    CHECK(leak == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p_pass == doctest::Approx(0.99 * 0.99 + 0.01 * 0.01).epsilon(1e-12));
  }
  {
    const double q = 0.05;
    const auto [spec, obs] = build_bb84_mismatch(1.0, 2 * q, 0.99);
    const auto [leak, p_pass] = compute_leak(spec, obs);
    CHECK(leak == doctest::Approx(binary_entropy(q)).epsilon(1e-10));
    CHECK(binary_entropy(q) == doctest::Approx(0.28640).epsilon(1e-4));
    (void)p_pass;
  }
  {
    // Relabeling the key symbols leaves the leakage unchanged.
    auto [spec, obs] = build_bb84_mismatch(1.0, 0.1, 0.95);
    const double leak_before = compute_leak(spec, obs).first;
    spec.keymap = [](int, int outcome, int) { return 1 - outcome; };
    const double leak_after = compute_leak(spec, obs).first;
    CHECK(leak_before == doctest::Approx(leak_after).epsilon(1e-13));
  }
}

TEST_CASE("trojan construction: Gram entries and reduction at mu_out = 0") {
  const auto [spec, obs] = build_trojan(0.01, 0.02, 0.99);
  const SourceReplacement sr = source_replacement(spec.signals, spec.signal_probs);
  // <phi_z+|phi_z-> = 0 (orthogonal qubit parts) but the same-basis
  // cross terms carry the tag overlap e^{-2 mu}.
  CHECK(std::abs(sr.rho_a.matrix()(0, 1)) <= 1e-14);
  // z+ vs x+: qubit overlap (1-i)/2 conj ... magnitude 1/sqrt2, tag overlap
  // |<sqrt(mu)|i sqrt(mu)>| = e^{-mu}.
  const double want_mag =
      std::sqrt(0.99 / 2 * 0.01 / 2) * (1.0 / std::sqrt(2.0)) * std::exp(-0.01);
  CHECK(std::abs(std::abs(sr.rho_a.matrix()(0, 2)) - want_mag) <= 1e-12);

  // mu_out = 0: all tags identical, the Gram reduces to the bare qubit
  // overlaps (rank 2).
  const auto [spec0, obs0] = build_trojan(0.0, 0.02, 0.99);
  const SourceReplacement sr0 = source_replacement(spec0.signals, spec0.signal_probs);
  const Spectrum s = eig_hermitian(sr0.rho_a);
  CHECK(s.eigenvalues(0) <= 1e-14);
  CHECK(s.eigenvalues(1) <= 1e-14);
  CHECK(s.eigenvalues(2) >= 1e-3);
  (void)obs;
  (void)obs0;
}

TEST_CASE("trojan and phase-coherent observations admit a density operator") {
  {
    const auto [spec, obs] = build_trojan(0.04, 0.03, 0.99);
    (void)spec;
    const FeasibleSubspace sub = build_subspace(obs.constraints);
    const HermitianOperator rho0 = find_initial(sub);
    CHECK(min_eigenvalue(rho0) >= -1e-10);
  }
  {
    const auto [spec, obs] = build_phase_coherent(0.6, 0.8, 0.99);
    (void)spec;
    const FeasibleSubspace sub = build_subspace(obs.constraints);
    const HermitianOperator rho0 = find_initial(sub);
    CHECK(min_eigenvalue(rho0) >= -1e-10);
  }
}

TEST_CASE("phase-coherent click statistics match the Fock-space oracle") {
  const double alpha = 0.7, eta = 0.9, p_z = 0.9;
  const auto [spec, obs] = build_phase_coherent(alpha, eta, p_z);

  FockOracle oracle;
  oracle.cutoff = 12;
  const double pi = std::acos(-1.0);
  const Complex amps[4] = {Complex(alpha, 0), Complex(-alpha, 0), Complex(0, alpha),
                           Complex(0, -alpha)};
  const double pj[4] = {p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2};

  for (int j = 0; j < 4; ++j) {
    double no_click = 0;
    for (int b = 0; b < 2; ++b) {
      const double theta = (b == 0) ? 0.0 : pi / 2;
      const auto c = oracle.detect(std::sqrt(eta) * amps[j], std::sqrt(eta) * alpha,
                                   theta + pi / 2);
      const double pb = (b == 0) ? p_z : 1 - p_z;
      const double want_plus = pj[j] * pb * (c.only_plus + 0.5 * c.both);
      const double want_minus = pj[j] * pb * (c.only_minus + 0.5 * c.both);
      CHECK(obs.joint_probs(j, 2 * b + 0) == doctest::Approx(want_plus).epsilon(1e-6));
      CHECK(obs.joint_probs(j, 2 * b + 1) == doctest::Approx(want_minus).epsilon(1e-6));
      no_click += pj[j] * pb * c.none;
    }
    CHECK(obs.joint_probs(j, 4) == doctest::Approx(no_click).epsilon(1e-6));
    // Per-mode vacuum probability in closed form.
    CHECK(obs.joint_probs(j, 4) / pj[4 - 4 + j] ==
          doctest::Approx(std::exp(-2 * eta * alpha * alpha)).epsilon(1e-9));
  }
}

TEST_CASE("key_rate: BB84 against the analytic rate") {
  const double q = 0.05;
  const auto [spec, obs] = build_bb84_mismatch(1.0, 2 * q, 0.99);
  const KeyRateResult r = key_rate(spec, obs);
  CHECK(r.bound.certificate_verified);
  CHECK(std::abs(r.sifted_key_rate() - bb84_rate(q)) <= 1e-3);
  CHECK(r.pa_lower <= r.pa_upper + 1e-9);
  CHECK((r.pa_upper - r.pa_lower) / r.pa_upper <= 1e-4);
  CHECK(r.leak == doctest::Approx(binary_entropy(q)).epsilon(1e-10));
}

TEST_CASE("key_rate: beyond threshold the reported rate clamps to zero") {
  const auto [spec, obs] = build_bb84_mismatch(1.0, 0.24, 0.99); // Q = 0.12
  const KeyRateResult r = key_rate(spec, obs);
  CHECK(r.key_rate_lower <= 0.0);
  CHECK(r.reported_key_rate() == 0.0);
}

TEST_CASE("trojan at mu_out = 0 reproduces the entanglement-based protocol") {
  const double q = 0.02;
  const auto [spec_t, obs_t] = build_trojan(0.0, q, 0.99);
  const auto [spec_e, obs_e] = build_bb84_mismatch(1.0, 2 * q, 0.99);
  const KeyRateResult rt = key_rate(spec_t, obs_t);
  const KeyRateResult re = key_rate(spec_e, obs_e);
  CHECK(std::abs(rt.pa_lower - re.pa_lower) <= 1e-6);
  CHECK(std::abs(rt.key_rate_lower - re.key_rate_lower) <= 1e-6);
}

TEST_CASE("trojan: side channel information lowers the rate") {
  const auto r0 = key_rate(build_trojan(0.0, 0.0, 0.99).first,
                           build_trojan(0.0, 0.0, 0.99).second);
  const auto r4 = key_rate(build_trojan(0.04, 0.0, 0.99).first,
                           build_trojan(0.04, 0.0, 0.99).second);
  CHECK(r4.key_rate_lower < r0.key_rate_lower - 1e-4);
  CHECK(r4.sifted_key_rate() < 1.0);
  CHECK(r0.sifted_key_rate() >= 0.999);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(build_bb84_mismatch(0.0, 0.1, 0.99), ParameterError);
  CHECK_THROWS_AS(build_bb84_mismatch(1.0, -0.1, 0.99), ParameterError);
  CHECK_THROWS_AS(build_trojan(-0.01, 0.1, 0.99), ParameterError);
  CHECK_THROWS_AS(build_trojan(0.01, 0.6, 0.99), ParameterError);
  CHECK_THROWS_AS(build_phase_coherent(0.0, 1.0, 0.99), ParameterError);
  CHECK_THROWS_AS(build_phase_coherent(0.5, 1.2, 0.99), ParameterError);
}
