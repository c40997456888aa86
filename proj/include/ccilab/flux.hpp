#pragma once

// Flux observable through a horizontal cut, relative index of projections,
// the Kitaev trace formula, eigenvector flux and the wandering-subspace
// witness of the bilateral shift.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <string>
#include <vector>

#include "ccilab/linalg.hpp"
#include "ccilab/operator.hpp"

namespace ccilab {

/// Q = multiplication by chi(k >= cut).
struct HalfSpaceProjection {
  int cut = 1;

  bool contains(int k) const { return k >= cut; }
  bool contains(LatticeSite s) const { return contains(s.k); }

  CMatrix matrix(const std::vector<LatticeSite>& basis) const {
    const auto n = static_cast<Eigen::Index>(basis.size());
    CMatrix q = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (contains(basis[static_cast<std::size_t>(i)])) q(i, i) = 1.0;
    }
    return q;
  }
};

struct FluxBlock {
  std::vector<LatticeSite> basis;  // one or two sites
  CMatrix block;                   // hermitian, same order as basis
  int column = 0;                  // j of the first basis site
};

/// Phi_c = U_I^* Q_c U_I - Q_c on the strip, as a direct sum of 1x1 and 2x2
/// blocks supported on heights {c-1, c}.
struct FluxOperator {
  int cut = 0;
  StripSpec strip;
  std::vector<FluxBlock> blocks;

  /// The 2*width sites at heights c-1 and c, height-major.
  std::vector<LatticeSite> support_basis() const {
    std::vector<LatticeSite> b;
    for (int k = cut - 1; k <= cut; ++k)
      for (int j = strip.lo; j <= strip.hi; ++j) b.push_back({j, k});
    return b;
  }

  CMatrix dense(const std::vector<LatticeSite>& basis) const {
    std::map<LatticeSite, Eigen::Index> pos;
    for (std::size_t i = 0; i < basis.size(); ++i) pos[basis[i]] = static_cast<Eigen::Index>(i);
    const auto n = static_cast<Eigen::Index>(basis.size());
    CMatrix m = CMatrix::Zero(n, n);
    for (const auto& blk : blocks) {
      for (std::size_t a = 0; a < blk.basis.size(); ++a) {
        for (std::size_t b = 0; b < blk.basis.size(); ++b) {
          const auto ia = pos.find(blk.basis[a]);
          const auto ib = pos.find(blk.basis[b]);
          if (ia == pos.end() || ib == pos.end()) {
            throw InvalidInput("flux block site outside the requested basis");
          }
          m(ia->second, ib->second) += blk.block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
    }
    return m;
  }

  CMatrix dense() const { return dense(support_basis()); }
};

/// Closed-form block decomposition of the flux through the cut at height c.
///
/// Even c: -|hi,c><hi,c| plus, for p_L <= j < p_R, in the basis
/// {|2j,c>, |2j+1,c-1>} with (r,t) of S_{2j,c}:
///   [[-|r|^2, -conj(rt)], [-rt, |r|^2]].
/// Odd c: -|lo,c><lo,c| plus, for p_L < j <= p_R, in the basis
/// {|2j-1,c-1>, |2j,c>} with (r,t) of S_{2j-1,c-1}:
///   [[|t|^2, -conj(rt)], [-rt, -|t|^2]].
inline FluxOperator flux_blocks(const SField& field, const StripSpec& strip, int c) {
  require_chiral_strip(field, strip);
  FluxOperator phi{c, strip, {}};
  const int pl = strip.p_left(), pr = strip.p_right();
  auto singleton = [](LatticeSite s) {
    FluxBlock b{{s}, CMatrix::Constant(1, 1, cplx(-1.0, 0.0)), s.j};
    return b;
  };
  if (is_even(c)) {
    for (int j = pl; j < pr; ++j) {
      const ScatterMatrix s = field.at(2 * j, c);
      const cplx rt = s.r * s.t;
      CMatrix m(2, 2);
      m << -std::norm(s.r), -std::conj(rt), -rt, std::norm(s.r);
      phi.blocks.push_back({{LatticeSite{2 * j, c}, LatticeSite{2 * j + 1, c - 1}}, m, 2 * j});
    }
    phi.blocks.push_back(singleton({strip.hi, c}));
  } else {
    phi.blocks.push_back(singleton({strip.lo, c}));
    for (int j = pl + 1; j <= pr; ++j) {
      const ScatterMatrix s = field.at(2 * j - 1, c - 1);
      const cplx rt = s.r * s.t;
      CMatrix m(2, 2);
      m << std::norm(s.t), -std::conj(rt), -rt, -std::norm(s.t);
      phi.blocks.push_back(
          {{LatticeSite{2 * j - 1, c - 1}, LatticeSite{2 * j, c}}, m, 2 * j - 1});
    }
  }
  return phi;
}

/// Phi_c evaluated matrix-free as <U e_x, Q U e_y> - <e_x, Q e_y> on the
/// 2*width support sites (same order as FluxOperator::support_basis()).
inline CMatrix flux_matrix_free(const SField& field, const StripSpec& strip, int c) {
  require_chiral_strip(field, strip);
  const Window w = strip.window(c - 3, c + 2);
  const Network net(field, w, Closure::open);
  const HalfSpaceProjection q{c};
  std::vector<LatticeSite> basis;
  for (int k = c - 1; k <= c; ++k)
    for (int j = strip.lo; j <= strip.hi; ++j) basis.push_back({j, k});
  std::vector<CVector> images;
  images.reserve(basis.size());
  CVector mask = CVector::Zero(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i)
    if (q.contains(w.site(i))) mask(static_cast<Eigen::Index>(i)) = 1.0;
  for (const auto& s : basis) {
    images.push_back(net.apply(StateVector::basis(w, s)).amplitudes());
  }
  const auto n = static_cast<Eigen::Index>(basis.size());
  CMatrix phi(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const CVector& ux = images[static_cast<std::size_t>(x)];
      const CVector& uy = images[static_cast<std::size_t>(y)];
      phi(x, y) = ux.dot(mask.cwiseProduct(uy));
      if (x == y && q.contains(basis[static_cast<std::size_t>(x)])) phi(x, y) -= 1.0;
    }
  }
  return phi;
}

struct FluxEigenvalue {
  int column = 0;  // first column of the block
  double value = 0.0;
};

struct FluxReport {
  int cut = 0;
  std::vector<double> eigenvalues;  // ascending
  std::vector<FluxEigenvalue> by_block;
  double trace = 0.0;
  int index = 0;
  double tolerance_used = 1e-6;
};

inline constexpr double kIndexTolerance = 1e-6;

/// Spectrum, trace and relative index of a flux operator, block by block.
inline FluxReport flux_spectrum(const FluxOperator& phi) {
  FluxReport rep;
  rep.cut = phi.cut;
  rep.tolerance_used = kIndexTolerance;
  for (const auto& blk : phi.blocks) {
    if (blk.block.rows() == 1) {
      rep.by_block.push_back({blk.column, blk.block(0, 0).real()});
    } else {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(blk.block, Eigen::EigenvaluesOnly);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        rep.by_block.push_back({blk.column, es.eigenvalues()(i)});
    }
    rep.trace += blk.block.trace().real();
  }
  for (const auto& e : rep.by_block) {
    rep.eigenvalues.push_back(e.value);
    if (std::abs(e.value - 1.0) <= kIndexTolerance) ++rep.index;
    if (std::abs(e.value + 1.0) <= kIndexTolerance) --rep.index;
  }
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());
  return rep;
}

// ---------------------------------------------------------------------------

struct RelativeIndex {
  int index = 0;
  bool ill_conditioned = false;  // some eigenvalue of P-Q sits near, but not at, +-1
};

/// dim ker(P-Q-1) - dim ker(P-Q+1) for finite projections P, Q.
inline RelativeIndex relative_index(const CMatrix& p, const CMatrix& q) {
  if (p.rows() != p.cols() || q.rows() != q.cols() || p.rows() != q.rows()) {
    throw InvalidInput("relative_index: P and Q must be square of equal size");
  }
  for (const CMatrix* m : {&p, &q}) {
    if (hermiticity_defect(*m) > 1e-10 || (m->size() > 0 && (*m * *m - *m).cwiseAbs().maxCoeff() > 1e-10)) {
      throw InvalidInput("relative_index: argument is not an orthogonal projection to 1e-10");
    }
  }
  RelativeIndex out;
  if (p.size() == 0) return out;
  const CMatrix d = p - q;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    const double dist = std::min(std::abs(l - 1.0), std::abs(l + 1.0));
    if (std::abs(l - 1.0) <= kIndexTolerance) ++out.index;
    else if (std::abs(l + 1.0) <= kIndexTolerance) --out.index;
    else if (dist <= 2e-3) out.ill_conditioned = true;
  }
  return out;
}

/// U^* Q U restricted to the window of heights [c-3, c+2] on the strip; this
/// window contains the support of U^*QU - Q, so the restriction is itself a
/// projection. Returns {P, Q} in the window basis.
inline std::pair<CMatrix, CMatrix> strip_projection_pair(const SField& field,
                                                         const StripSpec& strip, int c) {
  require_chiral_strip(field, strip);
  const Window inner = strip.window(c - 3, c + 2);
  const Window outer = strip.window(c - 4, c + 3);
  const Network net(field, outer, Closure::open);
  std::vector<LatticeSite> basis;
  for (std::size_t i = 0; i < inner.size(); ++i) basis.push_back(inner.site(i));
  const HalfSpaceProjection half{c};
  CVector mask = CVector::Zero(static_cast<Eigen::Index>(outer.size()));
  for (std::size_t i = 0; i < outer.size(); ++i)
    if (half.contains(outer.site(i))) mask(static_cast<Eigen::Index>(i)) = 1.0;
  std::vector<CVector> images;
  for (const auto& s : basis) images.push_back(net.apply(StateVector::basis(outer, s)).amplitudes());
  const auto n = static_cast<Eigen::Index>(basis.size());
  CMatrix p(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      p(x, y) = images[static_cast<std::size_t>(x)].dot(mask.cwiseProduct(images[static_cast<std::size_t>(y)]));
  return {p, half.matrix(basis)};
}

// ---------------------------------------------------------------------------
// Kitaev's formula for banded operators on l^2(Z; C^d).

template <class K>
concept BandedKernel = requires(const K& k, int x, int y) {
  { k.bandwidth() } -> std::convertible_to<int>;
  { k.block(x, y) } -> std::convertible_to<CMatrix>;
};

/// sum_{z >= cut} sum_{y < cut} ( ||U(z,y)||_HS^2 - ||U(y,z)||_HS^2 ).
template <BandedKernel K>
double kitaev_trace(const K& kernel, int cut) {
  const int bw = kernel.bandwidth();
  if (bw < 0) throw InvalidInput("kitaev_trace: negative bandwidth");
  double sum = 0.0;
  for (int z = cut; z < cut + bw; ++z) {
    for (int y = z - bw; y < cut; ++y) {
      sum += CMatrix(kernel.block(z, y)).squaredNorm() - CMatrix(kernel.block(y, z)).squaredNorm();
    }
  }
  return sum;
}

/// U_I^n on the strip viewed as an operator on l^2(Z; C^width) with the height
/// as the Z coordinate. block(x, y)[a, b] = <(lo+a, x)| U^n |(lo+b, y)>.
class StripKernel {
 public:
  StripKernel(SField field, const StripSpec& strip, int power = 1)
      : field_(std::move(field)), strip_(strip), power_(power) {
    if (power < 1) throw InvalidInput("StripKernel: power must be >= 1");
    require_chiral_strip(field_, strip_);
  }

  int bandwidth() const { return power_; }
  int dim() const { return strip_.width(); }

  CMatrix block(int x, int y) const {
    const CMatrix& col = column(y);
    const int d = dim();
    const int off = x - (y - power_);
    if (off < 0 || off > 2 * power_) return CMatrix::Zero(d, d);
    return col.middleRows(static_cast<Eigen::Index>(off) * d, d);
  }

 private:
  // Images U^n e_{(j,y)}, stacked by height y-n .. y+n, for every column j.
  const CMatrix& column(int y) const {
    auto it = cache_.find(y);
    if (it != cache_.end()) return it->second;
    const Window w = strip_.window(y - power_ - 1, y + power_ + 1);
    const Network net(field_, w, Closure::open);
    const int d = dim();
    CMatrix col = CMatrix::Zero(static_cast<Eigen::Index>(2 * power_ + 1) * d, d);
    for (int b = 0; b < d; ++b) {
      StateVector v = StateVector::basis(w, {strip_.lo + b, y});
      for (int n = 0; n < power_; ++n) v = net.apply(v);
      for (int h = -power_; h <= power_; ++h)
        for (int a = 0; a < d; ++a)
          col(static_cast<Eigen::Index>(h + power_) * d + a, b) = v.at({strip_.lo + a, y + h});
    }
    return cache_.emplace(y, std::move(col)).first->second;
  }

  SField field_;
  StripSpec strip_;
  int power_;
  mutable std::map<int, CMatrix> cache_;
};

// ---------------------------------------------------------------------------

/// U^* Q U - Q for a dense truncation with Q = chi(k >= cut) on its basis.
inline CMatrix dense_flux(const DenseUnitary& u, int cut) {
  const CMatrix q = HalfSpaceProjection{cut}.matrix(u.basis);
  return u.matrix.adjoint() * q * u.matrix - q;
}

/// max_i |<phi_i, Phi phi_i>| over unit eigenvectors phi_i of the dense unitary.
inline double eigenvector_flux(const DenseUnitary& u, const CMatrix& flux) {
  if (flux.rows() != u.matrix.rows() || flux.cols() != u.matrix.cols()) {
    throw InvalidInput("eigenvector_flux: flux and unitary dimensions differ");
  }
  const UnitaryEigen eig = unitary_eigen(u.matrix, true);
  if (eig.max_residual > 1e-8) {
    throw NumericalFailure("eigen-decomposition residual " + std::to_string(eig.max_residual) +
                           " exceeds 1e-8");
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < eig.vectors.cols(); ++i) {
    const auto v = eig.vectors.col(i);
    worst = std::max(worst, std::abs(v.dot(flux * v)));
  }
  return worst;
}

// ---------------------------------------------------------------------------

struct ShiftWitness {
  LatticeSite seed;
  int depth = 0;
  CMatrix gram;  // <U'^m phi, U'^n phi>, m, n = -depth..depth
  double gram_defect = 0.0;  // max |G - I|
  std::vector<NodeKey> modified_nodes;
  int perturbation_rank = 0;  // rank of U'_I - U_I
};

/// Replaces the odd scattering matrices on row 0 strictly inside the strip by
/// the identity and returns the Gram matrix of the orbit of |lo, 1> under the
/// modified unitary U'.
inline ShiftWitness shift_witness(const SField& field, const StripSpec& strip, int depth) {
  require_chiral_strip(field, strip);
  if (depth < 0) throw InvalidInput("shift_witness: orbit depth must be >= 0");
  ShiftWitness out;
  out.seed = {strip.lo, 1};
  out.depth = depth;
  SField modified = field;
  for (int j = strip.lo + 1; j < strip.hi; j += 2) {
    modified = modified.with_local_override({j, 0}, ScatterMatrix::identity());
    out.modified_nodes.push_back({j, 0});
  }

  const Window w = strip.window(-depth - 2, depth + 3);
  const Network net(modified, w, Closure::open);
  const auto n = static_cast<std::size_t>(2 * depth + 1);
  std::vector<CVector> orbit(n);
  const StateVector phi = StateVector::basis(w, out.seed);
  orbit[static_cast<std::size_t>(depth)] = phi.amplitudes();
  StateVector fwd = phi, bwd = phi;
  for (int m = 1; m <= depth; ++m) {
    fwd = net.apply(fwd);
    bwd = net.apply_adjoint(bwd);
    orbit[static_cast<std::size_t>(depth + m)] = fwd.amplitudes();
    orbit[static_cast<std::size_t>(depth - m)] = bwd.amplitudes();
  }
  const auto dim = static_cast<Eigen::Index>(n);
  out.gram.resize(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b)
      out.gram(a, b) = orbit[static_cast<std::size_t>(a)].dot(orbit[static_cast<std::size_t>(b)]);
  out.gram_defect = (out.gram - CMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff();

  const Window local = strip.window(-3, 4);
  const CMatrix f = Network(modified, local).dense() - Network(field, local).dense();
  out.perturbation_rank = numerical_rank(f);
  return out;
}

}  // namespace ccilab
