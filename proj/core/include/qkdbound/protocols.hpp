#ifndef QKDBOUND_PROTOCOLS_HPP
#define QKDBOUND_PROTOCOLS_HPP

#include <optional>
#include <variant>

#include "qkdbound/certify.hpp"
#include "qkdbound/channels.hpp"
#include "qkdbound/constraints.hpp"
#include "qkdbound/frank_wolfe.hpp"

namespace qkdbound {

/// Complete description of one prepare-and-measure or entanglement-based
/// protocol: both parties' POVMs grouped by announcement, the kept
/// announcement pairs, the key map, and (PM only) the signal states.
struct ProtocolSpec {
  std::vector<std::vector<HermitianOperator>> alice_povm;
  std::vector<std::vector<HermitianOperator>> bob_povm;
  std::vector<std::pair<int, int>> kept;
  KeyMapFunction keymap;
  int num_key_symbols = 0;
  Eigen::Index dim_a = 0;
  Eigen::Index dim_b = 0;
  double p_z = 0.99;

  bool prepare_and_measure = false;
  std::vector<ComplexVector> signals;   // finite coordinates, PM only
  std::vector<double> signal_probs;     // PM only
  std::vector<ComplexVector> bob_side_signals; // conditional pure states at Bob, PM only
  std::vector<Complex> coherent_amps;   // signal-mode amplitudes (optical PM protocols)
  double reference_amp = 0.0;           // shared reference-mode amplitude

  void validate() const;
  KeyMapChannel build_channel() const;

  Eigen::Index alice_outcomes() const;
  Eigen::Index bob_outcomes() const;
  /// Flat index <-> (announcement, outcome) maps.
  std::pair<int, int> alice_split(Eigen::Index flat) const;
  std::pair<int, int> bob_split(Eigen::Index flat) const;
};

/// Simulated (closed-form, noise-free) measurement record: the joint
/// outcome table, the reduced-state tomography rows (PM), and the
/// derived constraint set.
struct ObservationSet {
  Eigen::MatrixXd joint_probs; // alice flat x bob flat
  std::vector<std::pair<HermitianOperator, double>> tomography;
  ConstraintSet constraints;

  void validate() const;
};

struct SourceReplacement {
  ComplexVector psi;        // purification |psi>_AA'
  HermitianOperator rho_a;  // Gram matrix sqrt(p_i p_j) <phi_j|phi_i>
  std::vector<std::pair<HermitianOperator, double>> tomography;
};

/// Source-replacement of a prepare-and-measure source: the purification,
/// Alice's fixed reduced state, and a tomographically complete set of
/// constraints on it.
SourceReplacement source_replacement(const std::vector<ComplexVector>& signals,
                                     const std::vector<double>& probs);

/// Overlap <a|b> of two coherent states.
Complex coherent_overlap(Complex a, Complex b);

/// Coordinates of states with the given Gram matrix in an orthonormal
/// basis of their span (exact factorization, no truncation).
std::vector<ComplexVector> span_coordinates(const ComplexMatrix& gram, double tol = 1e-13);

struct DepolarizingModel {
  double p = 0;
};
struct LossyModel {
  double eta = 1;
};
struct IdentityModel {};
using ChannelModel = std::variant<IdentityModel, DepolarizingModel, LossyModel>;

/// Exact closed-form statistics for the supported protocol/channel
/// combinations; no sampling noise anywhere.
ObservationSet simulate_statistics(const ProtocolSpec& spec, const ChannelModel& channel);

/// Entanglement-based BB84 with one detector of efficiency eta; Bob's
/// third dimension is the no-click outcome. Data simulated through a
/// depolarizing channel with probability p.
std::pair<ProtocolSpec, ObservationSet> build_bb84_mismatch(double eta, double p, double p_z);

/// Single-photon BB84 under a Trojan-horse side channel: back-reflected
/// coherent tags of intensity mu_out ride along with the signals and
/// enter Alice's reduced-state constraints. Error rate Q maps to a
/// depolarizing probability p = 2Q on the signal qubit.
std::pair<ProtocolSpec, ObservationSet> build_trojan(double mu_out, double q, double p_z);

/// Phase-coherent BB84 (signal + reference coherent states) with a lossy
/// channel of transmissivity eta and a squashed qutrit detector model;
/// double clicks are split evenly between the key values.
std::pair<ProtocolSpec, ObservationSet> build_phase_coherent(double alpha, double eta,
                                                             double p_z);

/// Shannon-limit error-correction leakage: conditional entropy of the
/// key symbol given Bob's outcome and both announcements, on the
/// post-selected distribution. Also returns the pass probability.
std::pair<double, double> compute_leak(const ProtocolSpec& spec, const ObservationSet& obs);

struct KeyRateTolerances {
  double eps = 1e-12;
  double eps_prime = 1e-12;
  FwConfig fw;
  double solver_tol = 1e-9;

  // Conditional-gradient steps zig-zag when constraints force the
  // optimum onto a face of the cone, so the end-to-end pipeline gets a
  // larger iteration budget than the bare optimizer default.
  KeyRateTolerances() { fw.max_iters = 2500; }
};

struct KeyRateResult {
  double key_rate_lower = 0; // pa_lower - p_pass * leak (may be negative)
  double pa_lower = 0;       // certified
  double pa_upper = 0;       // objective at the optimizer output
  double p_pass = 0;
  double leak = 0;
  ReliableBound bound;
  int fw_iterations = 0;

  /// Certified rate clamped at zero (no key below threshold).
  double reported_key_rate() const { return key_rate_lower > 0 ? key_rate_lower : 0.0; }
  /// Rate per post-selected signal.
  double sifted_key_rate() const { return key_rate_lower / p_pass; }
};

/// End-to-end certified key rate: subspace construction, initial point,
/// conditional-gradient minimization, imprecision-robust certification
/// and verification. A certificate that fails verification is a hard
/// error, never a number.
KeyRateResult key_rate(const ProtocolSpec& spec, const ObservationSet& obs,
                       const KeyRateTolerances& tol = {});

} // namespace qkdbound

#endif
