#include "qkdbound/channels.hpp"

#include <Eigen/QR>
#include <cmath>

namespace qkdbound {

KrausMap::KrausMap(Eigen::Index in, Eigen::Index out, std::vector<ComplexMatrix> ops,
                   double cptni_tol)
    : in_dim(in), out_dim(out), kraus_ops(std::move(ops)) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("KrausMap: nonpositive dimension");
  ComplexMatrix gram = ComplexMatrix::Zero(in_dim, in_dim);
  for (const auto& k : kraus_ops) {
    if (k.rows() != out_dim || k.cols() != in_dim)
      throw DimensionError("KrausMap: Kraus operator shape mismatch");
    gram += k.adjoint() * k;
  }
  const double top = min_eigenvalue(HermitianOperator(-gram));
  if (-top > 1.0 + cptni_tol)
    throw ConfigError("KrausMap: trace-nonincreasing check failed, |sum K^dag K| = " +
                      std::to_string(-top));
}

HermitianOperator apply(const KrausMap& map, const HermitianOperator& rho) {
  if (rho.dim() != map.in_dim) throw DimensionError("apply: state dimension mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(map.out_dim, map.out_dim);
  for (const auto& k : map.kraus_ops) out += k * rho.matrix() * k.adjoint();
  return HermitianOperator(out);
}

HermitianOperator adjoint_apply(const KrausMap& map, const HermitianOperator& h) {
  if (h.dim() != map.out_dim) throw DimensionError("adjoint_apply: operand dimension mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(map.in_dim, map.in_dim);
  for (const auto& k : map.kraus_ops) out += k.adjoint() * h.matrix() * k;
  return HermitianOperator(out);
}

PinchingChannel::PinchingChannel(std::vector<Eigen::Index> block_sizes)
    : block_sizes_(std::move(block_sizes)) {
  for (Eigen::Index b : block_sizes_) {
    if (b < 0) throw DimensionError("PinchingChannel: negative block size");
    dim_ += b;
  }
  if (dim_ == 0) throw DimensionError("PinchingChannel: empty block structure");
}

std::vector<HermitianOperator> PinchingChannel::block_projectors() const {
  std::vector<HermitianOperator> out;
  Eigen::Index offset = 0;
  for (Eigen::Index b : block_sizes_) {
    ComplexMatrix p = ComplexMatrix::Zero(dim_, dim_);
    p.block(offset, offset, b, b) = ComplexMatrix::Identity(b, b);
    out.push_back(HermitianOperator::from_hermitian(p));
    offset += b;
  }
  return out;
}

HermitianOperator pinch(const PinchingChannel& z, const HermitianOperator& sigma) {
  if (sigma.dim() != z.dim()) throw DimensionError("pinch: dimension mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(z.dim(), z.dim());
  Eigen::Index offset = 0;
  for (Eigen::Index b : z.block_sizes()) {
    out.block(offset, offset, b, b) = sigma.matrix().block(offset, offset, b, b);
    offset += b;
  }
  return HermitianOperator::from_hermitian(std::move(out));
}

HermitianOperator KeyMapChannel::apply(const HermitianOperator& rho) const {
  if (rho.dim() != in_dim) throw DimensionError("KeyMapChannel::apply: dimension mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(out_dim, out_dim);
  for (const auto& k : kraus) out += k * rho.matrix() * k.adjoint();
  return HermitianOperator(out);
}

HermitianOperator KeyMapChannel::adjoint(const HermitianOperator& h) const {
  if (h.dim() != out_dim) throw DimensionError("KeyMapChannel::adjoint: dimension mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(in_dim, in_dim);
  for (const auto& k : kraus) out += k.adjoint() * h.matrix() * k;
  return HermitianOperator(out);
}

double KeyMapChannel::pass_probability(const HermitianOperator& rho) const {
  if (rho.dim() != in_dim) throw DimensionError("pass_probability: dimension mismatch");
  double t = 0;
  for (const auto& k : kraus) t += (k * rho.matrix() * k.adjoint()).trace().real();
  return t;
}

HermitianOperator apply_depolarized(const KeyMapChannel& g, const HermitianOperator& rho,
                                    double eps, PerturbKind kind) {
  if (eps < 0.0 || eps > 1.0)
    throw ParameterError("apply_depolarized: eps must lie in [0, 1]");
  HermitianOperator out = g.apply(rho);
  if (eps == 0.0) return out;
  const double c = (kind == PerturbKind::TraceScaled) ? out.trace() : 1.0;
  ComplexMatrix m = (1.0 - eps) * out.matrix();
  m += (eps * c / static_cast<double>(g.out_dim)) *
       ComplexMatrix::Identity(g.out_dim, g.out_dim);
  return HermitianOperator::from_hermitian(std::move(m));
}

HermitianOperator adjoint_depolarized(const KeyMapChannel& g, const HermitianOperator& h,
                                      double eps, PerturbKind kind) {
  if (eps < 0.0 || eps > 1.0)
    throw ParameterError("adjoint_depolarized: eps must lie in [0, 1]");
  HermitianOperator out = g.adjoint(h) * (1.0 - eps);
  if (eps > 0.0 && kind == PerturbKind::TraceScaled) {
    const double w = eps * h.trace() / static_cast<double>(g.out_dim);
    out += g.adjoint_identity * w;
  }
  return out;
}

namespace {

// Orthonormal basis of the joint column space of `blocks`, via
// column-pivoted QR with a relative rank cutoff.
ComplexMatrix column_space_basis(const std::vector<ComplexMatrix>& blocks, double rel_tol) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows = b.rows();
    cols += b.cols();
  }
  if (rows == 0 || cols == 0) return ComplexMatrix(rows, 0);
  ComplexMatrix stacked(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    stacked.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(stacked);
  const auto& rdiag = qr.matrixR().diagonal();
  const double top = rdiag.size() ? std::abs(rdiag(0)) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < std::min(rows, cols); ++i)
    if (std::abs(rdiag(i)) > rel_tol * std::max(top, 1e-300)) ++rank;
  ComplexMatrix q = qr.householderQ();
  return q.leftCols(rank);
}

} // namespace

AnnouncementMap announcement_map(const std::vector<std::vector<HermitianOperator>>& grouped_povm,
                                 double povm_tol) {
  if (grouped_povm.empty()) throw ConfigError("announcement_map: no announcements");
  Eigen::Index sys = 0, outcomes = 0;
  for (const auto& group : grouped_povm) {
    if (group.empty()) throw ConfigError("announcement_map: empty announcement group");
    outcomes = std::max(outcomes, static_cast<Eigen::Index>(group.size()));
    for (const auto& e : group) {
      if (sys == 0) sys = e.dim();
      if (e.dim() != sys) throw DimensionError("announcement_map: POVM dimension mismatch");
      if (min_eigenvalue(e) < -povm_tol)
        throw ValidationError("announcement_map: POVM element not PSD");
    }
  }
  ComplexMatrix total = ComplexMatrix::Zero(sys, sys);
  for (const auto& group : grouped_povm)
    for (const auto& e : group) total += e.matrix();
  if ((total - ComplexMatrix::Identity(sys, sys)).norm() > povm_tol * std::max<double>(1, sys))
    throw ValidationError("announcement_map: POVM does not sum to identity");

  const Eigen::Index num_ann = static_cast<Eigen::Index>(grouped_povm.size());
  const Eigen::Index out_dim = sys * num_ann * outcomes;
  std::vector<ComplexMatrix> ops;
  for (Eigen::Index a = 0; a < num_ann; ++a) {
    ComplexMatrix k = ComplexMatrix::Zero(out_dim, sys);
    for (std::size_t alpha = 0; alpha < grouped_povm[a].size(); ++alpha) {
      const ComplexMatrix root = mat_sqrt_psd(grouped_povm[a][alpha]).matrix();
      // Row block for basis |x, a, alpha>.
      for (Eigen::Index x = 0; x < sys; ++x)
        k.row((x * num_ann + a) * outcomes + static_cast<Eigen::Index>(alpha)) = root.row(x);
    }
    ops.push_back(std::move(k));
  }
  AnnouncementMap am;
  am.map = KrausMap(sys, out_dim, std::move(ops));
  am.sys_dim = sys;
  am.num_announcements = num_ann;
  am.outcome_dim = outcomes;
  return am;
}

KeyMapChannel build_gmap(const AnnouncementMap& alice, const AnnouncementMap& bob,
                         const std::vector<std::pair<int, int>>& kept,
                         const KeyMapFunction& keymap, int num_key_symbols) {
  if (num_key_symbols <= 0) throw ConfigError("build_gmap: need at least one key symbol");
  if (kept.empty()) throw ConfigError("build_gmap: no announcement pair is kept");
  if (!keymap) throw ConfigError("build_gmap: key map missing");

  const Eigen::Index d = alice.sys_dim * bob.sys_dim;
  const Eigen::Index ann_out = alice.map.out_dim * bob.map.out_dim;

  for (auto [a, b] : kept) {
    if (a < 0 || a >= alice.num_announcements || b < 0 || b >= bob.num_announcements)
      throw ConfigError("build_gmap: kept pair references unknown announcement");
    for (int alpha = 0; alpha < alice.outcome_dim; ++alpha) {
      const int r = keymap(a, alpha, b);
      if (r < 0 || r >= num_key_symbols)
        throw ConfigError("build_gmap: key map is not total on kept outcomes (a=" +
                          std::to_string(a) + ", outcome=" + std::to_string(alpha) +
                          ", b=" + std::to_string(b) + ")");
    }
  }

  // Joint announcement channel; register order (A, Atil, Abar, B, Btil, Bbar).
  std::vector<ComplexMatrix> joint_ops;
  for (int a = 0; a < alice.num_announcements; ++a)
    for (int b = 0; b < bob.num_announcements; ++b)
      joint_ops.push_back(kron(alice.map.kraus_ops[a], bob.map.kraus_ops[b]));
  KrausMap announce(d, ann_out, joint_ops);

  // Index helpers within the announcement output space.
  const Eigen::Index a_sys = alice.sys_dim, a_ann = alice.num_announcements,
                     a_out = alice.outcome_dim;
  const Eigen::Index b_sys = bob.sys_dim, b_ann = bob.num_announcements, b_out = bob.outcome_dim;
  auto ann_index = [&](Eigen::Index x, Eigen::Index a, Eigen::Index alpha, Eigen::Index y,
                       Eigen::Index b, Eigen::Index beta) {
    return ((((x * a_ann + a) * a_out + alpha) * b_sys + y) * b_ann + b) * b_out + beta;
  };

  // Sifting projector on the announcement registers.
  ComplexMatrix sift_mat = ComplexMatrix::Zero(ann_out, ann_out);
  for (auto [a, b] : kept)
    for (Eigen::Index x = 0; x < a_sys; ++x)
      for (Eigen::Index alpha = 0; alpha < a_out; ++alpha)
        for (Eigen::Index y = 0; y < b_sys; ++y)
          for (Eigen::Index beta = 0; beta < b_out; ++beta) {
            const Eigen::Index i = ann_index(x, a, alpha, y, b, beta);
            sift_mat(i, i) = 1.0;
          }
  HermitianOperator sift = HermitianOperator::from_hermitian(sift_mat);

  // Key-map isometry V: prepends the key register R. Outcomes of
  // non-kept announcements are routed to symbol 0; the sifting projector
  // removes them before V ever sees them.
  const Eigen::Index full_out = static_cast<Eigen::Index>(num_key_symbols) * ann_out;
  ComplexMatrix v = ComplexMatrix::Zero(full_out, ann_out);
  std::vector<std::pair<int, int>> all_pairs;
  for (int a = 0; a < a_ann; ++a)
    for (int b = 0; b < b_ann; ++b) all_pairs.emplace_back(a, b);
  auto is_kept = [&](int a, int b) {
    for (auto [ka, kb] : kept)
      if (ka == a && kb == b) return true;
    return false;
  };
  for (auto [a, b] : all_pairs)
    for (Eigen::Index x = 0; x < a_sys; ++x)
      for (Eigen::Index alpha = 0; alpha < a_out; ++alpha)
        for (Eigen::Index y = 0; y < b_sys; ++y)
          for (Eigen::Index beta = 0; beta < b_out; ++beta) {
            int r = 0;
            if (is_kept(a, b)) {
              r = keymap(a, static_cast<int>(alpha), b);
            }
            const Eigen::Index col = ann_index(x, a, alpha, y, b, beta);
            v(static_cast<Eigen::Index>(r) * ann_out + col, col) = 1.0;
          }
  const double iso_defect =
      (v.adjoint() * v - ComplexMatrix::Identity(ann_out, ann_out)).norm();
  if (iso_defect > kIsoTol)
    throw ConfigError("build_gmap: key-map isometry defect " + std::to_string(iso_defect));

  // Composite Kraus operators for the kept pairs, zero ones pruned.
  std::vector<ComplexMatrix> composite;
  for (auto [a, b] : kept) {
    const ComplexMatrix k_full =
        v * (sift_mat * joint_ops[static_cast<std::size_t>(a) * b_ann + b]);
    if (k_full.norm() > 0.0) composite.push_back(k_full);
  }
  if (composite.empty()) throw ConfigError("build_gmap: all kept Kraus operators vanish");

  // Support compression, graded by key symbol so the pinching channel
  // stays a contiguous block mask.
  std::vector<ComplexMatrix> basis_blocks(num_key_symbols);
  std::vector<Eigen::Index> block_sizes(num_key_symbols, 0);
  Eigen::Index d_prime = 0;
  for (int r = 0; r < num_key_symbols; ++r) {
    std::vector<ComplexMatrix> slices;
    for (const auto& k : composite)
      slices.push_back(k.middleRows(static_cast<Eigen::Index>(r) * ann_out, ann_out));
    basis_blocks[r] = column_space_basis(slices, 1e-13);
    block_sizes[r] = basis_blocks[r].cols();
    d_prime += block_sizes[r];
  }
  if (d_prime == 0) throw ConfigError("build_gmap: composite map has empty support");

  ComplexMatrix support = ComplexMatrix::Zero(full_out, d_prime);
  Eigen::Index at = 0;
  for (int r = 0; r < num_key_symbols; ++r) {
    support.block(static_cast<Eigen::Index>(r) * ann_out, at, ann_out, block_sizes[r]) =
        basis_blocks[r];
    at += block_sizes[r];
  }

  std::vector<ComplexMatrix> compressed;
  double recon_err = 0, scale = 0;
  for (const auto& k : composite) {
    ComplexMatrix kc = support.adjoint() * k;
    recon_err = std::max(recon_err, (support * kc - k).norm());
    scale = std::max(scale, k.norm());
    compressed.push_back(std::move(kc));
  }
  if (recon_err > 1e-11 * std::max(1.0, scale))
    throw ConfigError("build_gmap: support compression lost mass (" +
                      std::to_string(recon_err) + ")");

  ComplexMatrix gram = ComplexMatrix::Zero(d, d);
  for (const auto& k : compressed) gram += k.adjoint() * k;
  const double top = -min_eigenvalue(HermitianOperator(-gram));
  if (top > 1.0 + kCptniTol)
    throw ConfigError("build_gmap: composite map is not trace-nonincreasing (" +
                      std::to_string(top) + ")");

  KeyMapChannel g;
  g.announce = std::move(announce);
  g.sift = std::move(sift);
  g.keymap_isometry = std::move(v);
  g.in_dim = d;
  g.out_dim = d_prime;
  g.kraus = std::move(compressed);
  g.key_block_sizes = std::move(block_sizes);
  g.support_basis = std::move(support);
  g.num_key_symbols = num_key_symbols;
  g.adjoint_identity = HermitianOperator(gram);
  return g;
}

} // namespace qkdbound
