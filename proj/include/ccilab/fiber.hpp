#pragma once

// Vertically translation invariant models: fiber kernels and their symbols,
// winding numbers, the quantum-walk and five-diagonal fiber pictures, phase
// gauge, and band structures with circle-coverage certificates.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ccilab/flux.hpp"
#include "ccilab/linalg.hpp"
#include "ccilab/operator.hpp"

namespace ccilab {

/// Compactly supported kernel k -> V(k) on l^2(Z; C^dim), acting by
/// (U psi)(k) = sum_k' V(k - k') psi(k').
class FiberKernel {
 public:
  FiberKernel() = default;
  FiberKernel(int dim, std::map<int, CMatrix> taps) : dim_(dim), taps_(std::move(taps)) {
    if (dim_ <= 0) throw InvalidInput("FiberKernel: dimension must be positive");
    for (const auto& [k, m] : taps_) {
      if (m.rows() != dim_ || m.cols() != dim_) {
        throw InvalidInput("FiberKernel: tap " + std::to_string(k) + " has wrong shape");
      }
    }
  }

  int dim() const { return dim_; }
  const std::map<int, CMatrix>& taps() const { return taps_; }

  CMatrix tap(int k) const {
    auto it = taps_.find(k);
    return it == taps_.end() ? CMatrix::Zero(dim_, dim_) : it->second;
  }

  int support_radius() const {
    int r = 0;
    for (const auto& [k, m] : taps_) r = std::max(r, std::abs(k));
    return r;
  }
  int bandwidth() const { return support_radius(); }
  CMatrix block(int x, int y) const { return tap(x - y); }

  /// V^(y) = sum_k e^{-iyk} V(k).
  CMatrix symbol(double y) const {
    CMatrix s = CMatrix::Zero(dim_, dim_);
    for (const auto& [k, m] : taps_) s += unit_phase(-y * k) * m;
    return s;
  }

  /// M^(theta) = sum_z M(z) e^{i theta z}; equals symbol(-theta).
  CMatrix momentum_symbol(double theta) const { return symbol(-theta); }

  CMatrix symbol_derivative(double y) const {
    CMatrix s = CMatrix::Zero(dim_, dim_);
    for (const auto& [k, m] : taps_) s += (-kI * static_cast<double>(k)) * unit_phase(-y * k) * m;
    return s;
  }

  /// Kernel of the product (this) * (rhs).
  FiberKernel compose(const FiberKernel& rhs) const {
    if (rhs.dim_ != dim_) throw InvalidInput("FiberKernel::compose: dimension mismatch");
    std::map<int, CMatrix> out;
    for (const auto& [a, ma] : taps_) {
      for (const auto& [b, mb] : rhs.taps_) {
        auto [it, fresh] = out.try_emplace(a + b, CMatrix::Zero(dim_, dim_));
        it->second += ma * mb;
      }
    }
    return FiberKernel(dim_, std::move(out));
  }

  FiberKernel power(int n) const {
    if (n < 1) throw InvalidInput("FiberKernel::power: exponent must be >= 1");
    FiberKernel acc = *this;
    for (int i = 1; i < n; ++i) acc = acc.compose(*this);
    return acc;
  }

  /// W V(k) W^* for a constant unitary W.
  FiberKernel conjugated(const CMatrix& w) const {
    std::map<int, CMatrix> out;
    for (const auto& [k, m] : taps_) out.emplace(k, w * m * w.adjoint());
    return FiberKernel(dim_, std::move(out));
  }

  std::map<int, CVector> apply(const std::map<int, CVector>& psi) const {
    std::map<int, CVector> out;
    for (const auto& [kp, v] : psi) {
      for (const auto& [d, m] : taps_) {
        auto [it, fresh] = out.try_emplace(kp + d, CVector::Zero(dim_));
        it->second += m * v;
      }
    }
    return out;
  }

 private:
  int dim_ = 0;
  std::map<int, CMatrix> taps_;
};

// Regrouped strip coordinates: cell k holds heights (2k-1, 2k); inside a cell
// the index is 2*(j - lo) + h with h = 0 for height 2k-1 and h = 1 for 2k.
inline int fiber_cell(int height) { return floor_div(height + 1, 2); }
inline int fiber_slot(int height) { return height - 2 * fiber_cell(height) + 1; }

inline void require_translation_invariant(const SField& field, const char* who) {
  if (!field.translation_invariant()) {
    throw InvalidInput(std::string(who) +
                       ": field is not vertically translation invariant (vertical_period != 1)");
  }
}

/// Convolution kernel of U_I after regrouping two horizontal slices per cell.
inline FiberKernel fiber_kernel(const SField& field, const StripSpec& strip) {
  require_translation_invariant(field, "fiber_kernel");
  require_chiral_strip(field, strip);
  const int d = 2 * strip.width();
  const Window w = strip.window(-3, 2);
  const Network net(field, w, Closure::open);
  std::map<int, CMatrix> taps;
  for (int j = strip.lo; j <= strip.hi; ++j) {
    for (int h = 0; h < 2; ++h) {
      const int col = 2 * (j - strip.lo) + h;
      const StateVector img = net.apply(StateVector::basis(w, {j, h == 0 ? -1 : 0}));
      for (std::size_t i = 0; i < w.size(); ++i) {
        const cplx a = img.amplitudes()(static_cast<Eigen::Index>(i));
        if (a == cplx{}) continue;
        const LatticeSite s = w.site(i);
        auto [it, fresh] = taps.try_emplace(fiber_cell(s.k), CMatrix::Zero(d, d));
        it->second(2 * (s.j - strip.lo) + fiber_slot(s.k), col) += a;
      }
    }
  }
  return FiberKernel(d, std::move(taps));
}

/// Strip state -> per-cell fiber vectors. The state's columns must be the strip.
inline std::map<int, CVector> regroup(const StateVector& psi, const StripSpec& strip) {
  const Window& w = psi.window();
  if (w.j0 != strip.lo || w.j1 != strip.hi) throw InvalidInput("regroup: window is not the strip");
  std::map<int, CVector> out;
  const int d = 2 * strip.width();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const LatticeSite s = w.site(i);
    auto [it, fresh] = out.try_emplace(fiber_cell(s.k), CVector::Zero(d));
    it->second(2 * (s.j - strip.lo) + fiber_slot(s.k)) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Winding numbers.

/// sum_z z ||V(z)||_HS^2, unrounded.
inline double winding_sum(const FiberKernel& kernel) {
  double w = 0.0;
  for (const auto& [k, m] : kernel.taps()) w += static_cast<double>(k) * m.squaredNorm();
  return w;
}

inline int winding_exact(const FiberKernel& kernel) {
  const double w = winding_sum(kernel);
  const double rounded = std::round(w);
  if (std::abs(w - rounded) > 1e-6) {
    throw NumericalFailure("winding sum " + std::to_string(w) +
                           " is not an integer; symbol is not unitary");
  }
  return static_cast<int>(rounded);
}

/// Phase-unwrapped winding of theta -> det M^(theta) on [0, 2pi] with an
/// n_grid-point base grid; intervals with a phase jump >= pi/2 are bisected up
/// to four times.
inline int winding_phase(const FiberKernel& kernel, int n_grid) {
  if (n_grid < 64) throw InvalidInput("winding_phase: grid needs at least 64 points");
  auto det_at = [&](double theta) {
    const cplx d = kernel.momentum_symbol(theta).determinant();
    if (!(std::abs(d) > 0.5)) {
      throw NumericalFailure("winding_phase: |det| far from 1; symbol is not unitary");
    }
    return d;
  };
  auto unwrap = [&](auto&& self, double a, double b, cplx da, cplx db, int depth) -> double {
    const double jump = std::arg(db / da);
    if (std::abs(jump) < kPi / 2) return jump;
    if (depth == 4) {
      throw NumericalFailure("winding_phase: phase jump >= pi/2 persists after 4 refinements");
    }
    const double mid = 0.5 * (a + b);
    const cplx dm = det_at(mid);
    return self(self, a, mid, da, dm, depth + 1) + self(self, mid, b, dm, db, depth + 1);
  };
  double total = 0.0;
  cplx prev = det_at(0.0);
  for (int m = 1; m <= n_grid; ++m) {
    const double a = kTwoPi * (m - 1) / n_grid, b = kTwoPi * m / n_grid;
    const cplx next = det_at(b);
    total += unwrap(unwrap, a, b, prev, next, 0);
    prev = next;
  }
  const double w = total / kTwoPi;
  const double rounded = std::round(w);
  if (std::abs(w - rounded) > 1e-6) {
    throw NumericalFailure("winding_phase: unwrapped phase is not a multiple of 2pi");
  }
  return static_cast<int>(rounded);
}

// ---------------------------------------------------------------------------
// Quantum-walk fibers. Index convention shared with the five-diagonal form:
// n = 2m <-> |m,+>,  n = 2m+1 <-> |m,->.

inline Eigen::Matrix2cd qw_coin(const ScatterMatrix& s, int j, double y) {
  Eigen::Matrix2cd c;
  if (is_even(j)) {
    c << -s.t, std::conj(s.r) * unit_phase(y), s.r * unit_phase(-y), std::conj(s.t);
  } else {
    c << s.r, std::conj(s.t), -s.t, std::conj(s.r);
  }
  return s.q * c;
}

/// U_QW(y) = Shift * C(y) on l^2(Z) (x) C^2 at one quasi-momentum.
class QWFiber {
 public:
  QWFiber(SField field, double y) : field_(std::move(field)), y_(y) {}

  double y() const { return y_; }
  Eigen::Matrix2cd coin(int j) const { return qw_coin(field_.at(j, 0), j, y_); }

  /// Dense U_QW(y) on the indices [n0, n1]; transitions leaving the range are dropped.
  CMatrix matrix(int n0, int n1) const {
    const int n = n1 - n0 + 1;
    if (n <= 0) throw InvalidInput("QWFiber::matrix: empty index range");
    CMatrix u = CMatrix::Zero(n, n);
    for (int col = n0; col <= n1; ++col) {
      const int m = floor_div(col, 2);
      const int spin = col - 2 * m;  // 0: +, 1: -
      const Eigen::Matrix2cd c = coin(m);
      for (int sp = 0; sp < 2; ++sp) {
        const int target = sp == 0 ? 2 * (m + 1) : 2 * (m - 1) + 1;
        if (target >= n0 && target <= n1) u(target - n0, col - n0) += c(sp, spin);
      }
    }
    return u;
  }

 private:
  SField field_;
  double y_;
};

/// The family y -> U_QW(y) of a translation invariant field.
class QuantumWalk {
 public:
  explicit QuantumWalk(SField field) : field_(std::move(field)) {
    require_translation_invariant(field_, "qw_coins");
  }
  QWFiber fiber(double y) const { return QWFiber(field_, y); }
  QWFiber operator()(double y) const { return fiber(y); }

 private:
  SField field_;
};

inline QuantumWalk qw_coins(const SField& field) { return QuantumWalk(field); }

/// Index range [2 lo - 1, 2 hi] of the strip in the relabeled line.
inline std::pair<int, int> strip_line_range(const StripSpec& strip) {
  return {2 * strip.lo - 1, 2 * strip.hi};
}

// ---------------------------------------------------------------------------
// Five-diagonal form.

struct MQWMatrix {
  double y = 0.0;
  int n0 = 0;
  int n1 = -1;
  CMatrix matrix;
  bool closed = false;  // unitary to 1e-10 on the index range
};

namespace detail {

struct LineEntry {
  int col;
  cplx value;
};

// Nonzero pattern of row n of M_QW(y), four rows per unit cell j.
inline std::array<LineEntry, 2> mqw_row(const SField& field, double y, int n) {
  const int m = floor_mod(n, 4);
  auto s = [&](int col) { return field.at(col, 0); };
  switch (m) {
    case 3: {  // n = 4j - 1
      const int j = (n + 1) / 4;
      const ScatterMatrix a = s(2 * j);
      return {LineEntry{4 * j, unit_phase(-y) * a.r * a.q},
              LineEntry{4 * j + 1, std::conj(a.t) * a.q}};
    }
    case 0: {  // n = 4j
      const int j = n / 4;
      const ScatterMatrix a = s(2 * j - 1);
      return {LineEntry{4 * j - 1, std::conj(a.t) * a.q}, LineEntry{4 * j - 2, a.r * a.q}};
    }
    case 1: {  // n = 4j + 1
      const int j = (n - 1) / 4;
      const ScatterMatrix a = s(2 * j + 1);
      return {LineEntry{4 * j + 2, -a.t * a.q}, LineEntry{4 * j + 3, std::conj(a.r) * a.q}};
    }
    default: {  // n = 4j + 2
      const int j = (n - 2) / 4;
      const ScatterMatrix a = s(2 * j);
      return {LineEntry{4 * j, -a.t * a.q}, LineEntry{4 * j + 1, unit_phase(y) * std::conj(a.r) * a.q}};
    }
  }
}

}  // namespace detail

/// M_QW(y) restricted to the line indices [n0, n1].
inline MQWMatrix mqw_matrix(const SField& field, double y, int n0, int n1) {
  require_translation_invariant(field, "mqw_matrix");
  if (n1 < n0) throw InvalidInput("mqw_matrix: empty index range");
  MQWMatrix out{y, n0, n1, CMatrix::Zero(n1 - n0 + 1, n1 - n0 + 1), false};
  for (int n = n0; n <= n1; ++n) {
    for (const auto& e : detail::mqw_row(field, y, n)) {
      if (e.col >= n0 && e.col <= n1) out.matrix(n - n0, e.col - n0) += e.value;
    }
  }
  out.closed = unitarity_defect(out.matrix) <= kUnitaryTolerance;
  return out;
}

inline MQWMatrix mqw_strip(const SField& field, const StripSpec& strip, double y) {
  require_chiral_strip(field, strip);
  const auto [n0, n1] = strip_line_range(strip);
  return mqw_matrix(field, y, n0, n1);
}

// ---------------------------------------------------------------------------
// Phase gauge.

struct GaugeTransform {
  SField field;
  int n0 = 0;      // first line index covered by `phases`
  CVector phases;  // D = diag(phases); M'(y) = D M(y) D^*
};

/// Conjugates M_QW(y) by a y-independent diagonal unitary so that the columns
/// j0..j1 satisfy r_{2j+1} = |r_{2j+1}| and t_{2j} = i|t_{2j}|. Column J only
/// touches line indices 2J-1 .. 2J+2.
inline GaugeTransform gauge_normalize(const SField& field, int j0, int j1) {
  require_translation_invariant(field, "gauge_normalize");
  if (j1 < j0) throw InvalidInput("gauge_normalize: empty column range");
  const int n0 = 2 * j0 - 1, n1 = 2 * j1 + 2;
  std::vector<double> theta(static_cast<std::size_t>(n1 - n0 + 1), 0.0);
  auto th = [&](int n) -> double& { return theta[static_cast<std::size_t>(n - n0)]; };

  SField out = field;
  for (int J = j0; J <= j1; ++J) {
    const bool even = is_even(J);
    const ScatterMatrix s = field.at(J, 0);
    // W = S^T in rows (rho0, rho1), columns (2J, 2J+1).
    const Eigen::Matrix2cd w = s.matrix().transpose();
    const int rho0 = even ? 2 * J - 1 : 2 * J + 2;
    const int rho1 = even ? 2 * J + 2 : 2 * J - 1;
    th(2 * J + 1) = 0.0;
    const cplx x = even ? w(0, 1) : w(1, 1);
    const cplx z = even ? w(1, 0) : w(0, 0);
    th(2 * J + 2) = (std::abs(x) > 0.0 && std::abs(z) > 0.0)
                        ? th(2 * J - 1) + th(2 * J) - th(2 * J + 1) + std::arg(x) - std::arg(z)
                        : 0.0;

    Eigen::Matrix2cd wp;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const int row = a == 0 ? rho0 : rho1;
        wp(a, b) = unit_phase(th(row) - th(2 * J + b)) * w(a, b);
      }
    }
    cplx q = std::sqrt(wp.determinant());
    cplx r = wp(0, 0) / q;
    cplx t = -wp(1, 0) / q;
    if (even ? (t.imag() < 0.0) : (r.real() < 0.0)) {
      q = -q;
      r = -r;
      t = -t;
    }
    if (even) t = kI * std::abs(t);
    else r = std::abs(r);
    out = out.with_column(J, build_scatter(q / std::abs(q), r, t));
  }
  CVector phases(n1 - n0 + 1);
  for (int n = n0; n <= n1; ++n) phases(n - n0) = unit_phase(th(n));
  return {std::move(out), n0, std::move(phases)};
}

// ---------------------------------------------------------------------------
// Band structure.

struct BandCoverage {
  double largest_gap = 0.0;   // largest arc of S^1 not swept by any branch
  bool covers_circle = false; // largest_gap <= kCoverageTolerance
  double max_step = 0.0;      // largest per-step eigenphase motion on the grid
  double step_bound = 0.0;    // Hoffman-Wielandt bound from ||V^(y') - V^(y)||_F
  bool surrogate = true;      // finite-grid stand-in for a measure statement
};

struct BandStructure {
  int base_grid = 0;
  std::vector<double> y;
  std::vector<std::vector<double>> phases;  // phases[point][branch] in [0, 2pi)
  std::vector<double> degeneracies;         // y where matching was not certified
  BandCoverage coverage;
};

inline constexpr double kCoverageTolerance = 1e-10;
inline constexpr double kDegenerateSeparation = 1e-8;

namespace detail {

inline double min_separation(const CVector& v) {
  double s = INFINITY;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (Eigen::Index j = i + 1; j < v.size(); ++j) s = std::min(s, std::abs(v(i) - v(j)));
  return s;
}

// Reorders `next` so that next[i] continues branch i of `prev`.
inline CVector match_greedy(const CVector& prev, const CVector& next) {
  const auto n = static_cast<std::size_t>(prev.size());
  struct P {
    double d;
    Eigen::Index i, j;
  };
  std::vector<P> pairs;
  for (Eigen::Index i = 0; i < prev.size(); ++i)
    for (Eigen::Index j = 0; j < next.size(); ++j) pairs.push_back({std::abs(prev(i) - next(j)), i, j});
  std::sort(pairs.begin(), pairs.end(), [](const P& a, const P& b) { return a.d < b.d; });
  std::vector<bool> ui(n, false), uj(n, false);
  CVector out(prev.size());
  for (const auto& p : pairs) {
    if (ui[static_cast<std::size_t>(p.i)] || uj[static_cast<std::size_t>(p.j)]) continue;
    ui[static_cast<std::size_t>(p.i)] = uj[static_cast<std::size_t>(p.j)] = true;
    out(p.i) = next(p.j);
  }
  return out;
}

inline void add_arc(std::vector<std::pair<double, double>>& arcs, double start, double delta) {
  double a = start, b = start + delta;
  if (a > b) std::swap(a, b);
  while (a < 0.0) {
    a += kTwoPi;
    b += kTwoPi;
  }
  while (a >= kTwoPi) {
    a -= kTwoPi;
    b -= kTwoPi;
  }
  if (b <= kTwoPi) {
    arcs.emplace_back(a, b);
  } else {
    arcs.emplace_back(a, kTwoPi);
    arcs.emplace_back(0.0, b - kTwoPi);
  }
}

inline double largest_gap(std::vector<std::pair<double, double>> arcs) {
  if (arcs.empty()) return kTwoPi;
  std::sort(arcs.begin(), arcs.end());
  double gap = 0.0;
  double reach = arcs.front().second;
  const double first = arcs.front().first;
  for (std::size_t i = 1; i < arcs.size(); ++i) {
    if (arcs[i].first > reach) gap = std::max(gap, arcs[i].first - reach);
    reach = std::max(reach, arcs[i].second);
  }
  gap = std::max(gap, first + kTwoPi - reach);  // wrap-around gap
  return std::max(0.0, gap);
}

}  // namespace detail

/// Eigenphase curves of V^(y) over y in [0, 2pi] on an n_grid-point grid.
/// Branches are continued by nearest-eigenvalue matching, which is exact when
/// the eigenvalue separation exceeds twice ||V^(y') - V^(y)||_F; otherwise the
/// step is bisected (up to 10 times) and, failing that, matched greedily and
/// reported as a degeneracy.
inline BandStructure band_structure(const FiberKernel& kernel, int n_grid) {
  if (n_grid < 128) throw InvalidInput("band_structure: grid needs at least 128 points");
  constexpr int kMaxDepth = 10;
  BandStructure bs;
  bs.base_grid = n_grid;
  std::vector<std::pair<double, double>> arcs;

  auto eig = [&](double y) { return unitary_eigenvalues(kernel.symbol(y)); };
  auto record = [&](double y, const CVector& v) {
    bs.y.push_back(y);
    std::vector<double> ph(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) ph[static_cast<std::size_t>(i)] = phase_0_2pi(v(i));
    bs.phases.push_back(std::move(ph));
  };
  auto step = [&](const CVector& a, const CVector& b, double delta) {
    bs.coverage.step_bound =
        std::max(bs.coverage.step_bound, 2.0 * std::asin(std::min(1.0, delta / 2.0)));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double d = std::arg(b(i) / a(i));
      bs.coverage.max_step = std::max(bs.coverage.max_step, std::abs(d));
      detail::add_arc(arcs, phase_0_2pi(a(i)), d);
    }
  };

  auto advance = [&](auto&& self, double ya, const CVector& va, double yb, int depth) -> CVector {
    const CVector raw = eig(yb);
    const double delta = (kernel.symbol(yb) - kernel.symbol(ya)).norm();
    const double sep = detail::min_separation(va);
    if (sep > 2.0 * delta) {
      const CVector vb = detail::match_greedy(va, raw);  // nearest partner is unique here
      step(va, vb, delta);
      record(yb, vb);
      return vb;
    }
    if (sep >= kDegenerateSeparation && depth < kMaxDepth) {
      const double mid = 0.5 * (ya + yb);
      const CVector vm = self(self, ya, va, mid, depth + 1);
      return self(self, mid, vm, yb, depth + 1);
    }
    bs.degeneracies.push_back(ya);
    const CVector vb = detail::match_greedy(va, raw);
    step(va, vb, delta);
    record(yb, vb);
    return vb;
  };

  CVector current = eig(0.0);
  {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(current.size()));
    for (Eigen::Index i = 0; i < current.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return phase_0_2pi(current(a)) < phase_0_2pi(current(b));
    });
    CVector sorted(current.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted(static_cast<Eigen::Index>(i)) = current(order[i]);
    current = sorted;
  }
  record(0.0, current);
  for (int m = 1; m <= n_grid; ++m) {
    const double ya = kTwoPi * (m - 1) / n_grid, yb = kTwoPi * m / n_grid;
    current = advance(advance, ya, current, yb, 0);
  }
  bs.coverage.largest_gap = detail::largest_gap(std::move(arcs));
  bs.coverage.covers_circle = bs.coverage.largest_gap <= kCoverageTolerance;
  return bs;
}

}  // namespace ccilab
