#ifndef QKDBOUND_CHANNELS_HPP
#define QKDBOUND_CHANNELS_HPP

#include <functional>
#include <utility>
#include <vector>

#include "qkdbound/hermitian.hpp"

namespace qkdbound {

inline constexpr double kCptniTol = 1e-10;
inline constexpr double kIsoTol = 1e-10;

/// Completely positive trace-nonincreasing map in Kraus form.
struct KrausMap {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  std::vector<ComplexMatrix> kraus_ops;

  KrausMap() = default;
  /// Validates operator shapes and the trace-nonincreasing property
  /// (largest eigenvalue of sum K^dag K at most 1 + cptni_tol).
  KrausMap(Eigen::Index in, Eigen::Index out, std::vector<ComplexMatrix> ops,
           double cptni_tol = kCptniTol);
};

/// Sum_k K rho K^dag.
HermitianOperator apply(const KrausMap& map, const HermitianOperator& rho);

/// Sum_k K^dag H K; the Hilbert-Schmidt adjoint of apply.
HermitianOperator adjoint_apply(const KrausMap& map, const HermitianOperator& h);

/// Pinching channel over contiguous blocks: off-block entries are zeroed.
/// The key register is the leading tensor factor, so each key symbol's
/// sector is one contiguous block.
class PinchingChannel {
public:
  explicit PinchingChannel(std::vector<Eigen::Index> block_sizes);

  Eigen::Index dim() const { return dim_; }
  const std::vector<Eigen::Index>& block_sizes() const { return block_sizes_; }
  /// Mutually orthogonal projectors, one per block; they sum to identity.
  std::vector<HermitianOperator> block_projectors() const;

private:
  std::vector<Eigen::Index> block_sizes_;
  Eigen::Index dim_ = 0;
};

/// Block-diagonal truncation of sigma; idempotent and trace preserving.
HermitianOperator pinch(const PinchingChannel& z, const HermitianOperator& sigma);

/// Announcement channel of one party: Kraus operator number a maps the
/// system to (system, announcement register in state |a>, outcome
/// register), expanding the Hilbert space.
struct AnnouncementMap {
  KrausMap map;
  Eigen::Index sys_dim = 0;
  Eigen::Index num_announcements = 0;
  Eigen::Index outcome_dim = 0;
};

/// How the depolarizing perturbation treats a subnormalized output.
/// TraceScaled mixes in eps * Tr(G(rho)) * I/d' so the trace is kept
/// (the depolarizing channel acting as a linear map); Literal mixes in
/// eps * I/d' regardless of trace.
enum class PerturbKind { TraceScaled, Literal };

/// Composite map G(sigma) = V Pi A(sigma) Pi V^dag: joint announcements,
/// post-selection on the kept announcement pairs, then an isometry that
/// writes the key symbol into a leading register. The output space is
/// compressed onto the (key-graded) joint support of the composite Kraus
/// operators, which shrinks d' substantially and with it the cost of
/// every matrix logarithm.
struct KeyMapChannel {
  KrausMap announce;             // joint channel, Kraus ops K^A_a (x) K^B_b
  HermitianOperator sift;        // projector onto kept announcement pairs
  ComplexMatrix keymap_isometry; // V, prepends the key register
  Eigen::Index in_dim = 0;       // d
  Eigen::Index out_dim = 0;      // d', after support compression

  std::vector<ComplexMatrix> kraus;          // compressed composite ops, d' x d
  std::vector<Eigen::Index> key_block_sizes; // compressed basis grouped by key symbol
  ComplexMatrix support_basis;   // isometry from compressed to full post-key space
  Eigen::Index num_key_symbols = 0;
  HermitianOperator adjoint_identity; // sum K^dag K of the compressed ops

  PinchingChannel key_pinching() const { return PinchingChannel(key_block_sizes); }

  HermitianOperator apply(const HermitianOperator& rho) const;
  HermitianOperator adjoint(const HermitianOperator& h) const;
  double pass_probability(const HermitianOperator& rho) const;
};

/// (1-eps) G(rho) + eps c I/d' with c = Tr(G(rho)) or 1 per `kind`.
HermitianOperator apply_depolarized(const KeyMapChannel& g, const HermitianOperator& rho,
                                    double eps, PerturbKind kind = PerturbKind::TraceScaled);

/// Adjoint of the linear part of apply_depolarized at fixed eps.
HermitianOperator adjoint_depolarized(const KeyMapChannel& g, const HermitianOperator& h,
                                      double eps, PerturbKind kind = PerturbKind::TraceScaled);

/// Builds a party's announcement channel from its POVM grouped by
/// announcement: Kraus operator a is sum_alpha sqrt(P_(a,alpha)) (x)
/// |a> (x) |alpha>. The grouped elements must be PSD and sum to identity
/// within povm_tol.
AnnouncementMap announcement_map(const std::vector<std::vector<HermitianOperator>>& grouped_povm,
                                 double povm_tol = 1e-10);

using KeyMapFunction = std::function<int(int announcement_a, int outcome_a, int announcement_b)>;

/// Assembles the composite channel from both parties' announcement maps,
/// the kept announcement pairs and the key map. Throws ConfigError when
/// the key map is not total on the kept outcomes or the construction
/// violates the isometry/CPTNI invariants.
KeyMapChannel build_gmap(const AnnouncementMap& alice, const AnnouncementMap& bob,
                         const std::vector<std::pair<int, int>>& kept,
                         const KeyMapFunction& keymap, int num_key_symbols);

} // namespace qkdbound

#endif
