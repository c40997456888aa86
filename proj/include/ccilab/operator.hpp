#pragma once

// Matrix-free application of the network unitary on finite windows, plaquette
// blocks, parity, dense truncations and chiral boundary checks.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ccilab/lattice.hpp"
#include "ccilab/linalg.hpp"

namespace ccilab {

// ---------------------------------------------------------------------------
// Network geometry.
//
// Even node S_{2j,2k}:   inputs |2j,2k>, |2j+1,2k-1>   outputs |2j,2k-1>, |2j+1,2k>
// Odd node  S_{2j+1,2k}: inputs |2j+1,2k>, |2j+2,2k+1> outputs |2j+2,2k>, |2j+1,2k+1>
// U |in_a> = sum_b S(a,b) |out_b>.

struct Port {
  NodeKey node;
  int slot = 0;
};

inline Port input_port(LatticeSite s) {
  const bool je = is_even(s.j), ke = is_even(s.k);
  if (je && ke) return {{s.j, s.k}, 0};
  if (!je && !ke) return {{s.j - 1, s.k + 1}, 1};
  if (!je && ke) return {{s.j, s.k}, 0};
  return {{s.j - 1, s.k - 1}, 1};
}

inline Port output_port(LatticeSite s) {
  const bool je = is_even(s.j), ke = is_even(s.k);
  if (je && !ke) return {{s.j, s.k + 1}, 0};
  if (!je && ke) return {{s.j - 1, s.k}, 1};
  if (je && ke) return {{s.j - 1, s.k}, 0};
  return {{s.j, s.k - 1}, 1};
}

inline std::array<LatticeSite, 2> node_inputs(NodeKey n) {
  if (is_even(n.j)) return {LatticeSite{n.j, n.k2}, LatticeSite{n.j + 1, n.k2 - 1}};
  return {LatticeSite{n.j, n.k2}, LatticeSite{n.j + 1, n.k2 + 1}};
}

inline std::array<LatticeSite, 2> node_outputs(NodeKey n) {
  if (is_even(n.j)) return {LatticeSite{n.j, n.k2 - 1}, LatticeSite{n.j + 1, n.k2}};
  return {LatticeSite{n.j + 1, n.k2}, LatticeSite{n.j, n.k2 + 1}};
}

// ---------------------------------------------------------------------------

/// Amplitudes on a rectangular window (see Window for the linear order).
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(const Window& window)
      : window_(window), amps_(CVector::Zero(static_cast<Eigen::Index>(window.size()))) {}
  StateVector(const Window& window, CVector amps) : window_(window), amps_(std::move(amps)) {
    if (static_cast<std::size_t>(amps_.size()) != window_.size()) {
      throw InvalidInput("state amplitude count does not match its window");
    }
  }

  static StateVector basis(const Window& window, LatticeSite s, cplx value = 1.0) {
    if (!window.contains(s)) throw InvalidInput("basis site outside window");
    StateVector v(window);
    v.at(s) = value;
    return v;
  }

  const Window& window() const { return window_; }
  const CVector& amplitudes() const { return amps_; }
  CVector& amplitudes() { return amps_; }
  std::size_t size() const { return window_.size(); }

  cplx& at(LatticeSite s) { return amps_(static_cast<Eigen::Index>(window_.index(s))); }
  cplx at(LatticeSite s) const {
    return window_.contains(s) ? amps_(static_cast<Eigen::Index>(window_.index(s))) : cplx{};
  }

  double norm() const { return amps_.norm(); }
  // <this, other>, antilinear in this.
  cplx dot(const StateVector& other) const {
    if (!(window_ == other.window_)) throw InvalidInput("inner product across windows");
    return amps_.dot(other.amps_);
  }

 private:
  Window window_{};
  CVector amps_;
};

/// Vertical boundary treatment of a finite window. Horizontally a window is
/// always open; strips are closed because their edges do not leak.
enum class Closure { open, torus };

/// Cached transition table of U_CC restricted to a window.
///
/// With `Closure::open` any nonzero amplitude that would leave the window
/// raises WindowLeak. With `Closure::torus` heights wrap modulo the window
/// height H (even, >= 4) and scattering rows are read at their wrapped
/// position, which defines the CC model of an H-periodic field.
class Network {
 public:
  Network(const SField& field, const Window& window, Closure closure = Closure::open)
      : window_(window), closure_(closure) {
    if (window.empty()) throw InvalidInput("network window is empty");
    if (closure == Closure::torus) {
      const int h = window.rows();
      if (h < 4 || !is_even(h)) {
        throw InvalidInput("torus closure needs an even height count >= 4 (got " +
                           std::to_string(h) + ")");
      }
      const unsigned p = field.vertical_period();
      if (p > 0 && h % (2 * static_cast<int>(p)) != 0) {
        throw InvalidInput("torus height " + std::to_string(h) +
                           " is incompatible with the field's vertical period " +
                           std::to_string(p));
      }
    }
    build(field);
  }

  const Window& window() const { return window_; }
  Closure closure() const { return closure_; }

  /// True when no nonzero transition leaves the window in either direction.
  bool closed() const { return leaks_ == 0; }

  StateVector apply(const StateVector& psi) const { return propagate(psi, forward_, "U"); }
  StateVector apply_adjoint(const StateVector& psi) const {
    return propagate(psi, backward_, "U*");
  }

  /// Dense matrix in the window basis; leaking transitions are dropped.
  CMatrix dense() const {
    const auto n = static_cast<Eigen::Index>(window_.size());
    CMatrix m = CMatrix::Zero(n, n);
    for (std::size_t s = 0; s < forward_.size(); ++s) {
      for (int b = 0; b < 2; ++b) {
        const auto& link = forward_[s];
        if (link.to[b] >= 0) m(link.to[b], static_cast<Eigen::Index>(s)) += link.coef[b];
      }
    }
    return m;
  }

 private:
  struct Link {
    std::array<Eigen::Index, 2> to{-1, -1};
    std::array<cplx, 2> coef{};
  };

  LatticeSite wrap(LatticeSite s) const {
    if (closure_ == Closure::torus) s.k = window_.k0 + floor_mod(s.k - window_.k0, window_.rows());
    return s;
  }

  NodeKey wrap(NodeKey n) const {
    if (closure_ == Closure::torus) n.k2 = window_.k0 + floor_mod(n.k2 - window_.k0, window_.rows());
    return n;
  }

  Eigen::Index locate(LatticeSite s) const {
    s = wrap(s);
    return window_.contains(s) ? static_cast<Eigen::Index>(window_.index(s)) : -1;
  }

  void build(const SField& field) {
    std::map<NodeKey, ScatterMatrix> cache;
    auto scatter = [&](NodeKey n) -> const ScatterMatrix& {
      n = wrap(n);
      auto it = cache.find(n);
      if (it == cache.end()) it = cache.emplace(n, field.at(n)).first;
      return it->second;
    };
    forward_.resize(window_.size());
    backward_.resize(window_.size());
    for (std::size_t idx = 0; idx < window_.size(); ++idx) {
      const LatticeSite s = window_.site(idx);

      const Port in = input_port(s);
      const ScatterMatrix& sin = scatter(in.node);
      const auto outs = node_outputs(in.node);
      for (int b = 0; b < 2; ++b) {
        forward_[idx].coef[b] = sin.entry(in.slot, b);
        forward_[idx].to[b] = locate(outs[b]);
        if (forward_[idx].to[b] < 0 && forward_[idx].coef[b] != cplx{}) ++leaks_;
      }

      const Port out = output_port(s);
      const ScatterMatrix& sout = scatter(out.node);
      const auto ins = node_inputs(out.node);
      for (int a = 0; a < 2; ++a) {
        backward_[idx].coef[a] = std::conj(sout.entry(a, out.slot));
        backward_[idx].to[a] = locate(ins[a]);
        if (backward_[idx].to[a] < 0 && backward_[idx].coef[a] != cplx{}) ++leaks_;
      }
    }
  }

  StateVector propagate(const StateVector& psi, const std::vector<Link>& table,
                        const char* name) const {
    if (!(psi.window() == window_)) throw InvalidInput("state window differs from network window");
    StateVector out(window_);
    const CVector& in = psi.amplitudes();
    CVector& res = out.amplitudes();
    for (Eigen::Index s = 0; s < in.size(); ++s) {
      const cplx a = in(s);
      if (a == cplx{}) continue;
      const Link& link = table[static_cast<std::size_t>(s)];
      for (int b = 0; b < 2; ++b) {
        if (link.coef[b] == cplx{}) continue;
        if (link.to[b] < 0) {
          const LatticeSite site = window_.site(static_cast<std::size_t>(s));
          throw WindowLeak(site.j, site.k,
                           std::string(name) + " transports amplitude from site (" +
                               std::to_string(site.j) + "," + std::to_string(site.k) +
                               ") out of the open window");
        }
        res(link.to[b]) += link.coef[b] * a;
      }
    }
    return out;
  }

  Window window_;
  Closure closure_;
  std::vector<Link> forward_;
  std::vector<Link> backward_;
  std::size_t leaks_ = 0;
};

inline StateVector apply_u(const SField& field, const StateVector& psi,
                           Closure closure = Closure::open) {
  return Network(field, psi.window(), closure).apply(psi);
}

inline StateVector apply_u_adjoint(const SField& field, const StateVector& psi,
                                   Closure closure = Closure::open) {
  return Network(field, psi.window(), closure).apply_adjoint(psi);
}

/// Multiplication by (-1)^{j+k}.
inline StateVector parity_apply(const StateVector& psi) {
  StateVector out = psi;
  const Window& w = psi.window();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const LatticeSite s = w.site(i);
    if (!is_even(s.j + s.k)) out.amplitudes()(static_cast<Eigen::Index>(i)) *= -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plaquettes of the pure phases.

struct PlaquetteBlock {
  Chirality chirality = Chirality::right;
  std::array<LatticeSite, 4> basis{};
  Eigen::Matrix4cd matrix = Eigen::Matrix4cd::Zero();
  cplx accumulated_phase{1.0, 0.0};  // product of the four scattering amplitudes
  std::array<cplx, 4> eigenvalues{};
};

/// The 4x4 block of U_CC on plaquette (j, k) in the basis order
///   right: |2j,2k>, |2j,2k-1>, |2j-1,2k-1>, |2j-1,2k>
///   left:  |2j,2k>, |2j+1,2k>, |2j+1,2k+1>, |2j,2k+1>
/// together with its spectrum e^a {1, i, -1, -i}, e^{4a} = accumulated phase.
inline PlaquetteBlock plaquette_block(const SField& field, int j, int k, Chirality chirality) {
  PlaquetteBlock out;
  out.chirality = chirality;
  const int J = 2 * j, K = 2 * k;
  std::array<cplx, 4> cycle{};  // cycle[i]: amplitude basis[i] -> basis[i+1 mod 4]
  if (chirality == Chirality::right) {
    const std::array<NodeKey, 4> nodes{NodeKey{J, K}, NodeKey{J - 1, K - 2},
                                       NodeKey{J - 2, K}, NodeKey{J - 1, K}};
    for (const auto& n : nodes) {
      if (!field.at(n).is_diagonal()) {
        throw InvalidInput("right plaquette (" + std::to_string(j) + "," + std::to_string(k) +
                           ") needs diagonal S at j=" + std::to_string(n.j) +
                           ", k2=" + std::to_string(n.k2));
      }
    }
    out.basis = {LatticeSite{J, K}, LatticeSite{J, K - 1}, LatticeSite{J - 1, K - 1},
                 LatticeSite{J - 1, K}};
    const ScatterMatrix a = field.at(J, K), b = field.at(J - 1, K - 2), c = field.at(J - 2, K),
                        d = field.at(J - 1, K);
    cycle = {a.q * a.r, b.q * std::conj(b.r), c.q * std::conj(c.r), d.q * d.r};
  } else {
    const std::array<NodeKey, 4> nodes{NodeKey{J, K}, NodeKey{J + 1, K}, NodeKey{J, K + 2},
                                       NodeKey{J - 1, K}};
    for (const auto& n : nodes) {
      if (!field.at(n).is_off_diagonal()) {
        throw InvalidInput("left plaquette (" + std::to_string(j) + "," + std::to_string(k) +
                           ") needs off-diagonal S at j=" + std::to_string(n.j) +
                           ", k2=" + std::to_string(n.k2));
      }
    }
    out.basis = {LatticeSite{J, K}, LatticeSite{J + 1, K}, LatticeSite{J + 1, K + 1},
                 LatticeSite{J, K + 1}};
    const ScatterMatrix a = field.at(J, K), b = field.at(J + 1, K), c = field.at(J, K + 2),
                        d = field.at(J - 1, K);
    cycle = {-a.q * a.t, -b.q * b.t, c.q * std::conj(c.t), d.q * std::conj(d.t)};
  }
  for (int i = 0; i < 4; ++i) out.matrix((i + 1) % 4, i) = cycle[static_cast<std::size_t>(i)];
  out.accumulated_phase = cycle[0] * cycle[1] * cycle[2] * cycle[3];
  const cplx root = unit_phase(std::arg(out.accumulated_phase) / 4.0);
  for (int m = 0; m < 4; ++m) out.eigenvalues[static_cast<std::size_t>(m)] = root * std::pow(kI, m);
  return out;
}

// ---------------------------------------------------------------------------
// Dense truncations for oracle checks.

struct DenseUnitary {
  Window window{};
  Closure closure = Closure::open;
  std::vector<LatticeSite> basis;
  CMatrix matrix;
  bool closed = false;  // no transition leaves the basis
  double unitarity_defect = 0.0;
};

inline DenseUnitary dense_window(const SField& field, const Window& window, Closure closure) {
  Network net(field, window, closure);
  DenseUnitary out;
  out.window = window;
  out.closure = closure;
  out.basis.reserve(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) out.basis.push_back(window.site(i));
  out.matrix = net.dense();
  out.closed = net.closed();
  out.unitarity_defect = ccilab::unitarity_defect(out.matrix);
  return out;
}

/// Dense U restricted to the strip columns and heights [k_min, k_max].
inline DenseUnitary strip_dense(const SField& field, const StripSpec& strip, int k_min, int k_max,
                                Closure closure) {
  if (k_max < k_min) throw InvalidInput("strip_dense: empty height range");
  return dense_window(field, strip.window(k_min, k_max), closure);
}

// ---------------------------------------------------------------------------
// Chiral boundary conditions of the interface strip.

struct BoundaryRelation {
  std::string relation;  // "left", "right", "left_odd_a", ...
  LatticeSite from;
  LatticeSite to;
  cplx phase;
};

struct BoundaryReport {
  StripSpec strip;
  std::vector<BoundaryRelation> relations;
};

// Throws unless `field` has the chiral phases required by `strip`.
inline void require_chiral_strip(const SField& field, const StripSpec& strip) {
  if (strip.n_left > field.n_left() || strip.n_right < field.n_right()) {
    throw InvalidInput("strip [" + std::to_string(strip.n_left) + "," +
                       std::to_string(strip.n_right) +
                       "] is narrower than the field's interface [" +
                       std::to_string(field.n_left()) + "," + std::to_string(field.n_right()) +
                       "]");
  }
}

/// Verifies, for k in [k_from, k_to]:
///   U|lo,2k+1> = p|lo,2k>,  U|hi,2k> = p|hi,2k-1>
/// plus, for odd n_left, U|lo,2k> = p|lo+1,2k> and U|lo+1,2k+1> = p|lo,2k+1>,
/// and for odd n_right, U|hi,2k+1> = p|hi-1,2k+1> and U|hi-1,2k> = p|hi,2k>.
inline BoundaryReport boundary_phase_check(const SField& field, const StripSpec& strip, int k_from,
                                           int k_to, double tol = 1e-12) {
  require_chiral_strip(field, strip);
  BoundaryReport report{strip, {}};
  const int lo = strip.lo, hi = strip.hi;
  for (int k = k_from; k <= k_to; ++k) {
    const Window w{lo - 1, hi + 1, 2 * k - 3, 2 * k + 3};
    const Network net(field, w, Closure::open);
    auto verify = [&](const char* name, LatticeSite from, LatticeSite to) {
      const StateVector img = net.apply(StateVector::basis(w, from));
      const cplx p = img.at(to);
      StateVector rest = img;
      rest.at(to) = 0.0;
      if (rest.norm() > tol || std::abs(std::abs(p) - 1.0) > tol) {
        throw NumericalFailure(std::string("boundary relation '") + name + "' fails at (" +
                               std::to_string(from.j) + "," + std::to_string(from.k) +
                               "): off-target weight " + std::to_string(rest.norm()));
      }
      report.relations.push_back({name, from, to, p});
    };
    verify("left", {lo, 2 * k + 1}, {lo, 2 * k});
    verify("right", {hi, 2 * k}, {hi, 2 * k - 1});
    if (!is_even(strip.n_left)) {
      verify("left_odd_even_row", {lo, 2 * k}, {lo + 1, 2 * k});
      verify("left_odd_odd_row", {lo + 1, 2 * k + 1}, {lo, 2 * k + 1});
    }
    if (!is_even(strip.n_right)) {
      verify("right_odd_odd_row", {hi, 2 * k + 1}, {hi - 1, 2 * k + 1});
      verify("right_odd_even_row", {hi - 1, 2 * k}, {hi, 2 * k});
    }
  }
  return report;
}

}  // namespace ccilab
