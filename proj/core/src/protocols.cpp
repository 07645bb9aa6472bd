#include "qkdbound/protocols.hpp"

#include <cmath>

#include "qkdbound/subspace.hpp"

namespace qkdbound {

void ProtocolSpec::validate() const {
  if (alice_povm.empty() || bob_povm.empty()) throw ConfigError("ProtocolSpec: missing POVMs");
  if (kept.empty()) throw ConfigError("ProtocolSpec: no kept announcement pairs");
  if (!keymap) throw ConfigError("ProtocolSpec: key map missing");
  if (num_key_symbols <= 0) throw ConfigError("ProtocolSpec: need at least one key symbol");
  if (dim_a <= 0 || dim_b <= 0) throw ConfigError("ProtocolSpec: dimensions unset");
  if (prepare_and_measure) {
    if (signals.empty() || signals.size() != signal_probs.size())
      throw ConfigError("ProtocolSpec: PM mode needs signals with probabilities");
    double total = 0;
    for (double p : signal_probs) {
      if (p < 0) throw ConfigError("ProtocolSpec: negative signal probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-10)
      throw ConfigError("ProtocolSpec: signal probabilities must sum to 1");
  }
}

KeyMapChannel ProtocolSpec::build_channel() const {
  validate();
  return build_gmap(announcement_map(alice_povm), announcement_map(bob_povm), kept, keymap,
                    num_key_symbols);
}

Eigen::Index ProtocolSpec::alice_outcomes() const {
  Eigen::Index n = 0;
  for (const auto& g : alice_povm) n += static_cast<Eigen::Index>(g.size());
  return n;
}

Eigen::Index ProtocolSpec::bob_outcomes() const {
  Eigen::Index n = 0;
  for (const auto& g : bob_povm) n += static_cast<Eigen::Index>(g.size());
  return n;
}

namespace {

std::pair<int, int> split_flat(const std::vector<std::vector<HermitianOperator>>& groups,
                               Eigen::Index flat) {
  Eigen::Index at = flat;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (at < static_cast<Eigen::Index>(groups[g].size()))
      return {static_cast<int>(g), static_cast<int>(at)};
    at -= static_cast<Eigen::Index>(groups[g].size());
  }
  throw DimensionError("flat outcome index out of range");
}

const HermitianOperator& povm_at(const std::vector<std::vector<HermitianOperator>>& groups,
                                 Eigen::Index flat) {
  const auto [g, o] = split_flat(groups, flat);
  return groups[g][o];
}

} // namespace

std::pair<int, int> ProtocolSpec::alice_split(Eigen::Index flat) const {
  return split_flat(alice_povm, flat);
}
std::pair<int, int> ProtocolSpec::bob_split(Eigen::Index flat) const {
  return split_flat(bob_povm, flat);
}

Complex coherent_overlap(Complex a, Complex b) {
  return std::exp(-0.5 * (std::norm(a) + std::norm(b)) + std::conj(a) * b);
}

std::vector<ComplexVector> span_coordinates(const ComplexMatrix& gram, double tol) {
  const Spectrum s = eig_hermitian(HermitianOperator(gram));
  const Eigen::Index n = gram.rows();
  const double top = std::max(s.eigenvalues.maxCoeff(), 0.0);
  RealVector roots(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = s.eigenvalues(i);
    if (lam < -1e-10 * std::max(1.0, top))
      throw DomainError("span_coordinates: Gram matrix not PSD");
    roots(i) = (lam > tol * std::max(1.0, top)) ? std::sqrt(lam) : 0.0;
  }
  // Columns of sqrt(Lambda) V^dag reproduce the Gram matrix exactly.
  const ComplexMatrix l = roots.asDiagonal() * s.eigenvectors.adjoint();
  std::vector<ComplexVector> coords;
  for (Eigen::Index k = 0; k < n; ++k) coords.push_back(l.col(k));
  return coords;
}

SourceReplacement source_replacement(const std::vector<ComplexVector>& signals,
                                     const std::vector<double>& probs) {
  if (signals.empty() || signals.size() != probs.size())
    throw ConfigError("source_replacement: signals and probabilities must pair up");
  const Eigen::Index n = static_cast<Eigen::Index>(signals.size());
  const Eigen::Index ds = signals.front().size();
  double total = 0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    if (signals[i].size() != ds) throw ConfigError("source_replacement: signal dimensions differ");
    if (probs[i] < 0) throw ConfigError("source_replacement: negative probability");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw ConfigError("source_replacement: probabilities must sum to 1");

  SourceReplacement out;
  out.psi = ComplexVector::Zero(n * ds);
  for (Eigen::Index i = 0; i < n; ++i)
    out.psi.segment(i * ds, ds) = std::sqrt(probs[i]) * signals[i];

  ComplexMatrix rho_a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      rho_a(i, j) = std::sqrt(probs[i] * probs[j]) * signals[j].dot(signals[i]);
  out.rho_a = HermitianOperator(rho_a);

  for (const auto& theta : hermitian_basis(n))
    out.tomography.emplace_back(theta, hs_inner_real(theta, out.rho_a));
  return out;
}

void ObservationSet::validate() const {
  double total = 0;
  for (Eigen::Index j = 0; j < joint_probs.rows(); ++j)
    for (Eigen::Index k = 0; k < joint_probs.cols(); ++k) {
      if (joint_probs(j, k) < -1e-12)
        throw ValidationError("ObservationSet: negative joint probability");
      total += joint_probs(j, k);
    }
  if (total > 1.0 + 1e-10)
    throw ValidationError("ObservationSet: joint probabilities exceed 1");
  constraints.validate();
}

namespace {

ConstraintSet assemble_constraints(const ProtocolSpec& spec, const Eigen::MatrixXd& p_jk,
                                   const std::vector<std::pair<HermitianOperator, double>>& tomo) {
  std::vector<std::pair<HermitianOperator, double>> rows;
  const Eigen::Index na = spec.alice_outcomes(), nb = spec.bob_outcomes();
  for (Eigen::Index j = 0; j < na; ++j)
    for (Eigen::Index k = 0; k < nb; ++k) {
      const ComplexMatrix op =
          kron(povm_at(spec.alice_povm, j).matrix(), povm_at(spec.bob_povm, k).matrix());
      rows.emplace_back(HermitianOperator(op), p_jk(j, k));
    }
  const ComplexMatrix id_b = ComplexMatrix::Identity(spec.dim_b, spec.dim_b);
  for (const auto& [theta, value] : tomo)
    rows.emplace_back(HermitianOperator(kron(theta.matrix(), id_b)), value);
  return make_constraint_set(std::move(rows));
}

Eigen::MatrixXd entangled_simulation(const ProtocolSpec& spec, double p) {
  // (I (x) E_dep)(|Phi><Phi|) on the d_A-dimensional corner of Bob's space.
  const Eigen::Index da = spec.dim_a, db = spec.dim_b;
  if (db < da) throw ConfigError("simulate_statistics: Bob's space smaller than Alice's");
  ComplexVector phi = ComplexVector::Zero(da * db);
  for (Eigen::Index i = 0; i < da; ++i) phi(i * db + i) = 1.0 / std::sqrt(double(da));
  ComplexMatrix rho = phi * phi.adjoint();
  if (p > 0) {
    // Depolarize the populated d_A x d_A block of B.
    ComplexMatrix mixed = ComplexMatrix::Zero(da * db, da * db);
    const HermitianOperator full(rho);
    const HermitianOperator red_a = partial_trace(full, {da, db}, {0});
    for (Eigen::Index i = 0; i < da; ++i)
      for (Eigen::Index k = 0; k < da; ++k)
        for (Eigen::Index b = 0; b < da; ++b)
          mixed(i * db + b, k * db + b) += red_a.matrix()(i, k) / double(da);
    rho = (1 - p) * rho + p * mixed;
  }

  const Eigen::Index na = spec.alice_outcomes(), nb = spec.bob_outcomes();
  Eigen::MatrixXd p_jk(na, nb);
  for (Eigen::Index j = 0; j < na; ++j)
    for (Eigen::Index k = 0; k < nb; ++k)
      p_jk(j, k) = (kron(povm_at(spec.alice_povm, j).matrix(),
                         povm_at(spec.bob_povm, k).matrix()) *
                    rho)
                       .trace()
                       .real();
  return p_jk;
}

Eigen::MatrixXd pm_depolarizing_simulation(const ProtocolSpec& spec, double p) {
  const Eigen::Index na = spec.alice_outcomes(), nb = spec.bob_outcomes();
  if (spec.bob_side_signals.size() != static_cast<std::size_t>(na))
    throw ConfigError("simulate_statistics: conditional signal states missing");
  Eigen::MatrixXd p_jk(na, nb);
  for (Eigen::Index j = 0; j < na; ++j) {
    const ComplexVector& s = spec.bob_side_signals[j];
    const Eigen::Index dq = s.size();
    ComplexMatrix sigma = ComplexMatrix::Zero(spec.dim_b, spec.dim_b);
    sigma.topLeftCorner(dq, dq) =
        (1 - p) * (s * s.adjoint()) + p / double(dq) * ComplexMatrix::Identity(dq, dq);
    for (Eigen::Index k = 0; k < nb; ++k)
      p_jk(j, k) =
          spec.signal_probs[j] * (povm_at(spec.bob_povm, k).matrix() * sigma).trace().real();
  }
  return p_jk;
}

Eigen::MatrixXd coherent_click_simulation(const ProtocolSpec& spec, double eta) {
  const Eigen::Index na = spec.alice_outcomes(), nb = spec.bob_outcomes();
  if (spec.coherent_amps.size() != static_cast<std::size_t>(na))
    throw ConfigError("simulate_statistics: coherent amplitudes missing");
  if (nb != 5) throw ConfigError("simulate_statistics: squashed detector expects 5 outcomes");

  Eigen::MatrixXd p_jk = Eigen::MatrixXd::Zero(na, nb);
  const Complex ref = std::sqrt(eta) * spec.reference_amp;
  const double basis_prob[2] = {spec.p_z, 1 - spec.p_z};
  const Complex rot[2] = {Complex(1, 0), Complex(0, -1)}; // basis phases 0 and pi/2
  for (Eigen::Index j = 0; j < na; ++j) {
    const Complex beta = std::sqrt(eta) * spec.coherent_amps[j];
    for (int b = 0; b < 2; ++b) {
      const Complex d_plus = (rot[b] * beta + ref) / std::sqrt(2.0);
      const Complex d_minus = (rot[b] * beta - ref) / std::sqrt(2.0);
      const double q_plus = 1.0 - std::exp(-std::norm(d_plus));
      const double q_minus = 1.0 - std::exp(-std::norm(d_minus));
      const double dbl = q_plus * q_minus; // split evenly between key values
      p_jk(j, 2 * b + 0) +=
          spec.signal_probs[j] * basis_prob[b] * (q_plus * (1 - q_minus) + 0.5 * dbl);
      p_jk(j, 2 * b + 1) +=
          spec.signal_probs[j] * basis_prob[b] * (q_minus * (1 - q_plus) + 0.5 * dbl);
      p_jk(j, 4) += spec.signal_probs[j] * basis_prob[b] * (1 - q_plus) * (1 - q_minus);
    }
  }
  return p_jk;
}

} // namespace

ObservationSet simulate_statistics(const ProtocolSpec& spec, const ChannelModel& channel) {
  spec.validate();

  Eigen::MatrixXd p_jk;
  if (!spec.prepare_and_measure) {
    double p = 0;
    if (const auto* dep = std::get_if<DepolarizingModel>(&channel))
      p = dep->p;
    else if (!std::holds_alternative<IdentityModel>(channel))
      throw ConfigError("simulate_statistics: unsupported channel for entanglement-based mode");
    if (p < 0 || p > 1) throw ParameterError("simulate_statistics: p outside [0, 1]");
    p_jk = entangled_simulation(spec, p);
  } else if (const auto* dep = std::get_if<DepolarizingModel>(&channel)) {
    if (dep->p < 0 || dep->p > 1) throw ParameterError("simulate_statistics: p outside [0, 1]");
    p_jk = pm_depolarizing_simulation(spec, dep->p);
  } else if (const auto* loss = std::get_if<LossyModel>(&channel)) {
    if (loss->eta <= 0 || loss->eta > 1)
      throw ParameterError("simulate_statistics: eta outside (0, 1]");
    p_jk = coherent_click_simulation(spec, loss->eta);
  } else {
    p_jk = pm_depolarizing_simulation(spec, 0.0);
  }

  ObservationSet obs;
  obs.joint_probs = p_jk;
  if (spec.prepare_and_measure)
    obs.tomography = source_replacement(spec.signals, spec.signal_probs).tomography;
  obs.constraints = assemble_constraints(spec, p_jk, obs.tomography);
  obs.validate();
  return obs;
}

namespace {

std::vector<std::vector<HermitianOperator>> register_povm(Eigen::Index dim,
                                                          const std::vector<int>& group_sizes) {
  std::vector<std::vector<HermitianOperator>> groups;
  Eigen::Index at = 0;
  for (int sz : group_sizes) {
    std::vector<HermitianOperator> g;
    for (int o = 0; o < sz; ++o) {
      ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
      m(at, at) = 1.0;
      g.push_back(HermitianOperator::from_hermitian(std::move(m)));
      ++at;
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

ComplexMatrix projector(const ComplexVector& v) { return v * v.adjoint(); }

// Interferometric single-photon qubit vectors shared by the optical
// protocols: z_+ -> |0>, z_- -> |1>, x_pm -> ((1 pm i)|0> + (1 mp i)|1>)/2.
ComplexVector qubit_zp() {
  ComplexVector v(2);
  v << 1, 0;
  return v;
}
ComplexVector qubit_zm() {
  ComplexVector v(2);
  v << 0, 1;
  return v;
}
ComplexVector qubit_xp() {
  ComplexVector v(2);
  v << Complex(0.5, 0.5), Complex(0.5, -0.5);
  return v;
}
ComplexVector qubit_xm() {
  ComplexVector v(2);
  v << Complex(0.5, -0.5), Complex(0.5, 0.5);
  return v;
}

ComplexMatrix embed_qutrit(const ComplexMatrix& q) {
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m.topLeftCorner(2, 2) = q;
  return m;
}

} // namespace

std::pair<ProtocolSpec, ObservationSet> build_bb84_mismatch(double eta, double p, double p_z) {
  if (eta <= 0 || eta > 1) throw ParameterError("build_bb84_mismatch: eta outside (0, 1]");
  if (p < 0 || p > 1) throw ParameterError("build_bb84_mismatch: p outside [0, 1]");
  if (p_z <= 0 || p_z >= 1) throw ParameterError("build_bb84_mismatch: p_z outside (0, 1)");

  ProtocolSpec spec;
  spec.dim_a = 2;
  spec.dim_b = 3;
  spec.p_z = p_z;

  ComplexVector zp = qubit_zp(), zm = qubit_zm();
  ComplexVector xp(2), xm(2);
  xp << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  xm << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);

  spec.alice_povm = {{HermitianOperator(p_z * projector(zp)), HermitianOperator(p_z * projector(zm))},
                     {HermitianOperator((1 - p_z) * projector(xp)),
                      HermitianOperator((1 - p_z) * projector(xm))}};

  const ComplexMatrix b1 = embed_qutrit(p_z * projector(zp));
  const ComplexMatrix b2 = embed_qutrit(p_z * eta * projector(zm));
  const ComplexMatrix b3 = embed_qutrit((1 - p_z) * projector(xp));
  const ComplexMatrix b4 = embed_qutrit((1 - p_z) * eta * projector(xm));
  const ComplexMatrix b5 = ComplexMatrix::Identity(3, 3) - b1 - b2 - b3 - b4;
  spec.bob_povm = {{HermitianOperator(b1), HermitianOperator(b2)},
                   {HermitianOperator(b3), HermitianOperator(b4)},
                   {HermitianOperator(b5)}};

  spec.kept = {{0, 0}, {1, 1}};
  spec.keymap = [](int, int outcome, int) { return outcome; };
  spec.num_key_symbols = 2;

  ObservationSet obs = simulate_statistics(spec, DepolarizingModel{p});
  return {std::move(spec), std::move(obs)};
}

std::pair<ProtocolSpec, ObservationSet> build_trojan(double mu_out, double q, double p_z) {
  if (mu_out < 0) throw ParameterError("build_trojan: mu_out must be nonnegative");
  if (q < 0 || q >= 0.5) throw ParameterError("build_trojan: Q outside [0, 0.5)");
  if (p_z <= 0 || p_z >= 1) throw ParameterError("build_trojan: p_z outside (0, 1)");

  ProtocolSpec spec;
  spec.prepare_and_measure = true;
  spec.dim_a = 4;
  spec.dim_b = 2;
  spec.p_z = p_z;

  const std::vector<ComplexVector> qubits{qubit_zp(), qubit_zm(), qubit_xp(), qubit_xm()};
  const double root_mu = std::sqrt(mu_out);
  const std::vector<Complex> tags{Complex(root_mu, 0), Complex(-root_mu, 0),
                                  Complex(0, root_mu), Complex(0, -root_mu)};
  ComplexMatrix tag_gram(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) tag_gram(i, j) = coherent_overlap(tags[i], tags[j]);
  const auto tag_coords = span_coordinates(tag_gram);

  for (int i = 0; i < 4; ++i) {
    spec.signals.push_back(kron(qubits[i], tag_coords[i]));
    spec.bob_side_signals.push_back(qubits[i]);
  }
  spec.signal_probs = {p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2};

  spec.alice_povm = register_povm(4, {2, 2});
  spec.bob_povm = {{HermitianOperator(p_z * projector(qubit_zp())),
                    HermitianOperator(p_z * projector(qubit_zm()))},
                   {HermitianOperator((1 - p_z) * projector(qubit_xp())),
                    HermitianOperator((1 - p_z) * projector(qubit_xm()))}};
  spec.kept = {{0, 0}, {1, 1}};
  spec.keymap = [](int, int outcome, int) { return outcome; };
  spec.num_key_symbols = 2;

  ObservationSet obs = simulate_statistics(spec, DepolarizingModel{2 * q});
  return {std::move(spec), std::move(obs)};
}

std::pair<ProtocolSpec, ObservationSet> build_phase_coherent(double alpha, double eta,
                                                             double p_z) {
  if (alpha <= 0) throw ParameterError("build_phase_coherent: alpha must be positive");
  if (eta <= 0 || eta > 1) throw ParameterError("build_phase_coherent: eta outside (0, 1]");
  if (p_z <= 0 || p_z >= 1) throw ParameterError("build_phase_coherent: p_z outside (0, 1)");

  ProtocolSpec spec;
  spec.prepare_and_measure = true;
  spec.dim_a = 4;
  spec.dim_b = 3;
  spec.p_z = p_z;

  spec.coherent_amps = {Complex(alpha, 0), Complex(-alpha, 0), Complex(0, alpha),
                        Complex(0, -alpha)};
  spec.reference_amp = alpha;
  ComplexMatrix gram(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      gram(i, j) = coherent_overlap(spec.coherent_amps[i], spec.coherent_amps[j]);
  const auto coords = span_coordinates(gram);
  spec.signals.assign(coords.begin(), coords.end());
  spec.signal_probs = {p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2};

  spec.alice_povm = register_povm(4, {2, 2});
  const ComplexMatrix c1 = embed_qutrit(p_z * projector(qubit_zp()));
  const ComplexMatrix c2 = embed_qutrit(p_z * projector(qubit_zm()));
  const ComplexMatrix c3 = embed_qutrit((1 - p_z) * projector(qubit_xp()));
  const ComplexMatrix c4 = embed_qutrit((1 - p_z) * projector(qubit_xm()));
  const ComplexMatrix c5 = ComplexMatrix::Identity(3, 3) - c1 - c2 - c3 - c4;
  spec.bob_povm = {{HermitianOperator(c1), HermitianOperator(c2)},
                   {HermitianOperator(c3), HermitianOperator(c4)},
                   {HermitianOperator(c5)}};
  spec.kept = {{0, 0}, {1, 1}};
  spec.keymap = [](int, int outcome, int) { return outcome; };
  spec.num_key_symbols = 2;

  ObservationSet obs = simulate_statistics(spec, LossyModel{eta});
  return {std::move(spec), std::move(obs)};
}

std::pair<double, double> compute_leak(const ProtocolSpec& spec, const ObservationSet& obs) {
  spec.validate();
  if (spec.kept.empty()) throw ConfigError("compute_leak: empty kept set");

  const Eigen::Index na = spec.alice_outcomes(), nb = spec.bob_outcomes();
  double p_pass = 0;
  // Conditional entropy of the key symbol given (a, b, beta), averaged
  // over the post-selected distribution.
  double leak_raw = 0;
  for (Eigen::Index k = 0; k < nb; ++k) {
    const auto [b, beta] = spec.bob_split(k);
    (void)beta;
    for (auto [ka, kb] : spec.kept) {
      if (kb != b) continue;
      // Gather the key-symbol distribution within this (a, b, beta) cell.
      std::vector<double> by_symbol(static_cast<std::size_t>(spec.num_key_symbols), 0.0);
      double cell = 0;
      for (Eigen::Index j = 0; j < na; ++j) {
        const auto [a, alpha] = spec.alice_split(j);
        if (a != ka) continue;
        const double pr = obs.joint_probs(j, k);
        if (pr <= 0) continue;
        by_symbol[static_cast<std::size_t>(spec.keymap(a, alpha, b))] += pr;
        cell += pr;
      }
      p_pass += cell;
      if (cell <= 0) continue;
      for (double pv : by_symbol)
        if (pv > 0) leak_raw -= pv * std::log2(pv / cell);
    }
  }
  if (p_pass <= 0) return {0.0, 0.0};
  return {leak_raw / p_pass, p_pass};
}

KeyRateResult key_rate(const ProtocolSpec& spec, const ObservationSet& obs,
                       const KeyRateTolerances& tol) {
  spec.validate();
  obs.validate();

  ConstraintSet constraints = obs.constraints;
  constraints.eps_prime = tol.eps_prime;

  const FeasibleSubspace sub = build_subspace(constraints);
  const HermitianOperator rho0 = find_initial(sub, tol.solver_tol);

  ObjectiveContext ctx = ObjectiveContext::make(spec.build_channel(), tol.eps);

  FwConfig fw_cfg = tol.fw;
  fw_cfg.solver_tol = std::min(fw_cfg.solver_tol, tol.solver_tol);
  const FwResult fw = fw_minimize(ctx, sub, rho0, fw_cfg);

  CertifyOptions opts;
  opts.solver_tol = tol.solver_tol;
  const ReliableBound bound =
      certify_robust(ctx, constraints, fw.rho, ctx.eps, tol.eps_prime, opts);
  if (!bound.certificate_verified)
    throw CertificateError("key_rate: certificate failed verification: " + bound.diagnostics);

  const auto [leak, p_pass] = compute_leak(spec, obs);

  KeyRateResult out;
  out.bound = bound;
  out.pa_lower = bound.lower;
  out.pa_upper = fw.f_upper;
  out.leak = leak;
  out.p_pass = p_pass;
  out.key_rate_lower = bound.lower - p_pass * leak;
  out.fw_iterations = fw.iterations;
  return out;
}

} // namespace qkdbound
