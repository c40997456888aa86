#pragma once

// Scattering matrices, scattering fields with chiral phases, strip geometry.

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccilab/common.hpp"

namespace ccilab {

/// One U(2) element in the coordinates (q, (r, t)) of S^1 x S^3.
/// The realized matrix is q * [[r, -t], [conj(t), conj(r)]].
struct ScatterMatrix {
  cplx q{1.0, 0.0};
  cplx r{1.0, 0.0};
  cplx t{0.0, 0.0};

  Eigen::Matrix2cd matrix() const {
    Eigen::Matrix2cd m;
    m << q * r, -q * t, q * std::conj(t), q * std::conj(r);
    return m;
  }

  // Entry (in, out) of the realized matrix: amplitude sent from input port
  // `in` to output port `out`.
  cplx entry(int in, int out) const {
    if (in == 0) return out == 0 ? q * r : -q * t;
    return out == 0 ? q * std::conj(t) : q * std::conj(r);
  }

  bool is_diagonal(double tol = 1e-12) const { return std::abs(t) <= tol; }
  bool is_off_diagonal(double tol = 1e-12) const { return std::abs(r) <= tol; }

  static ScatterMatrix identity() { return {}; }
};

inline constexpr double kScatterInputTolerance = 1e-9;

/// Builds a normalized scattering matrix. Inputs within 1e-9 of the constraint
/// manifold are projected onto it; anything further away is rejected.
inline ScatterMatrix build_scatter(cplx q, cplx r, cplx t) {
  const double qa = std::abs(q);
  const double rt2 = std::norm(r) + std::norm(t);
  if (!std::isfinite(qa) || !std::isfinite(rt2)) {
    throw InvalidInput("scattering parameters must be finite");
  }
  if (std::abs(qa - 1.0) > kScatterInputTolerance) {
    throw InvalidInput("|q| = " + std::to_string(qa) + " is not within 1e-9 of 1");
  }
  if (std::abs(rt2 - 1.0) > kScatterInputTolerance) {
    throw InvalidInput("|r|^2 + |t|^2 = " + std::to_string(rt2) +
                       " is not within 1e-9 of 1");
  }
  const double rt = std::sqrt(rt2);
  return ScatterMatrix{q / qa, r / rt, t / rt};
}

struct LatticeSite {
  int j = 0;
  int k = 0;
  friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
  friend auto operator<=>(const LatticeSite&, const LatticeSite&) = default;
};

/// Address of a scattering node S_{j,k2}; k2 is always even.
struct NodeKey {
  int j = 0;
  int k2 = 0;
  friend bool operator==(const NodeKey&, const NodeKey&) = default;
  friend auto operator<=>(const NodeKey&, const NodeKey&) = default;
};

/// Inclusive rectangle of lattice sites. Linear order is row-major with the
/// height k outer and the column j inner.
struct Window {
  int j0 = 0;
  int j1 = -1;
  int k0 = 0;
  int k1 = -1;

  int columns() const { return std::max(0, j1 - j0 + 1); }
  int rows() const { return std::max(0, k1 - k0 + 1); }
  std::size_t size() const {
    return static_cast<std::size_t>(columns()) * static_cast<std::size_t>(rows());
  }
  bool empty() const { return size() == 0; }
  bool contains(LatticeSite s) const {
    return s.j >= j0 && s.j <= j1 && s.k >= k0 && s.k <= k1;
  }
  std::size_t index(LatticeSite s) const {
    return static_cast<std::size_t>(s.k - k0) * static_cast<std::size_t>(columns()) +
           static_cast<std::size_t>(s.j - j0);
  }
  LatticeSite site(std::size_t idx) const {
    const int nj = columns();
    return {j0 + static_cast<int>(idx % static_cast<std::size_t>(nj)),
            k0 + static_cast<int>(idx / static_cast<std::size_t>(nj))};
  }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Geometry of the invariant interface strip between the two chiral phases.
struct StripSpec {
  int n_left = 0;
  int n_right = 0;
  int lo = 0;  // largest even integer <= n_left
  int hi = 0;  // smallest even integer >= n_right

  static StripSpec from_bounds(int n_left, int n_right) {
    if (n_left > n_right) {
      throw InvalidInput("strip bounds require n_left <= n_right");
    }
    return {n_left, n_right, floor_even(n_left), ceil_even(n_right)};
  }

  int width() const { return hi - lo + 1; }
  int p_left() const { return lo / 2; }
  int p_right() const { return hi / 2; }
  bool contains_column(int j) const { return j >= lo && j <= hi; }
  Window window(int k0, int k1) const { return {lo, hi, k0, k1}; }
  friend bool operator==(const StripSpec&, const StripSpec&) = default;
};

// ---------------------------------------------------------------------------
// Counter-based randomness: every draw is a pure function of (seed, site,
// draw index), so materializing windows in any order gives identical fields.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class SiteStream {
 public:
  SiteStream(std::uint64_t seed, int j, int k2) noexcept
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(
                                                           static_cast<std::int64_t>(j))) ^
                        static_cast<std::uint64_t>(static_cast<std::int64_t>(k2)))) {}

  std::uint64_t next_u64() noexcept { return splitmix64(key_ ^ splitmix64(++counter_)); }

  // Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal pair by Box-Muller; std::normal_distribution is not
  // reproducible across standard libraries.
  std::pair<double, double> gaussian_pair() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    return {rad * std::cos(kTwoPi * u2), rad * std::sin(kTwoPi * u2)};
  }

  cplx phase() noexcept { return unit_phase(kTwoPi * uniform()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Haar-distributed parameters: q uniform on S^1, (r, t) uniform on S^3.
inline ScatterMatrix draw_haar_scatter(SiteStream& stream) {
  const cplx q = stream.phase();
  const auto [a, b] = stream.gaussian_pair();
  const auto [c, d] = stream.gaussian_pair();
  const double n = std::sqrt(a * a + b * b + c * c + d * d);
  return ScatterMatrix{q, cplx(a, b) / n, cplx(c, d) / n};
}

// ---------------------------------------------------------------------------

struct ScatterOverride {
  int j = 0;
  int k2 = 0;
  cplx q{1.0, 0.0};
  cplx r{1.0, 0.0};
  cplx t{0.0, 0.0};
};

/// Declarative description of a scattering field.
struct ModelConfig {
  int n_left = 0;
  int n_right = 0;
  std::uint64_t seed = 0;
  bool deterministic_phases = false;
  // Number of scattering rows per vertical period; 0 means aperiodic and
  // 1 means S_{j,2k} = S_j for all k.
  unsigned vertical_period = 0;
  std::vector<ScatterOverride> overrides;
};

enum class Chirality { left, right };

/// The map (j, 2k) -> U(2). Columns j < n_left are off-diagonal (left phase),
/// columns j >= n_right are diagonal (right phase); the interface in between
/// is drawn from the seeded Haar generator. Lookups resolve through local
/// overrides, then periodic overrides, then the chiral default or generator.
class SField {
 public:
  explicit SField(ModelConfig config) : config_(std::move(config)) {
    if (config_.n_left > config_.n_right) {
      throw InvalidInput("model requires n_left <= n_right (got " +
                         std::to_string(config_.n_left) + " > " +
                         std::to_string(config_.n_right) + ")");
    }
    if (config_.vertical_period > (1u << 20)) {
      throw InvalidInput("vertical_period out of range");
    }
    for (const auto& o : config_.overrides) {
      if (!is_even(o.k2)) {
        throw InvalidInput("override row k2 = " + std::to_string(o.k2) + " must be even");
      }
      const ScatterMatrix s = checked_chiral(o.j, o.k2, build_scatter(o.q, o.r, o.t));
      const NodeKey key{o.j, reduce_row(o.k2)};
      if (!periodic_overrides_.emplace(key, s).second) {
        throw InvalidInput("duplicate override at j = " + std::to_string(o.j) +
                           ", k2 = " + std::to_string(o.k2));
      }
    }
  }

  /// A field that is entirely in one chiral phase on every column of
  /// practical interest (|j| < 2^28).
  static SField pure_phase(Chirality chirality, std::uint64_t seed,
                           bool deterministic_phases = false, unsigned vertical_period = 0) {
    ModelConfig c;
    const int bound = chirality == Chirality::left ? (1 << 28) : -(1 << 28);
    c.n_left = c.n_right = bound;
    c.seed = seed;
    c.deterministic_phases = deterministic_phases;
    c.vertical_period = vertical_period;
    return SField(std::move(c));
  }

  ScatterMatrix at(int j, int k2) const {
    if (!is_even(k2)) {
      throw InvalidInput("scattering rows are even; got k2 = " + std::to_string(k2));
    }
    if (auto it = local_overrides_.find({j, k2}); it != local_overrides_.end()) {
      return it->second;
    }
    const int row = reduce_row(k2);
    if (auto it = periodic_overrides_.find({j, row}); it != periodic_overrides_.end()) {
      return it->second;
    }
    return generated(j, row);
  }
  ScatterMatrix at(NodeKey key) const { return at(key.j, key.k2); }

  /// Copy with S_{j,k2} replaced at exactly that node (no periodic images).
  /// Chirality is enforced.
  SField with_local_override(NodeKey key, const ScatterMatrix& s) const {
    if (!is_even(key.k2)) throw InvalidInput("override row must be even");
    SField copy = *this;
    copy.local_overrides_[key] = copy.checked_chiral(key.j, key.k2, s);
    return copy;
  }

  /// Copy with the column j replaced on every row. Requires a translation
  /// invariant field (vertical period 1).
  SField with_column(int j, const ScatterMatrix& s) const {
    if (!translation_invariant()) {
      throw InvalidInput("with_column requires a translation invariant field");
    }
    SField copy = *this;
    copy.periodic_overrides_[{j, 0}] = copy.checked_chiral(j, 0, s);
    return copy;
  }

  int n_left() const { return config_.n_left; }
  int n_right() const { return config_.n_right; }
  std::uint64_t seed() const { return config_.seed; }
  StripSpec strip() const { return StripSpec::from_bounds(config_.n_left, config_.n_right); }
  const ModelConfig& config() const { return config_; }

  /// Effective vertical period in rows; local overrides break periodicity.
  unsigned vertical_period() const {
    return local_overrides_.empty() ? config_.vertical_period : 0u;
  }
  unsigned base_period() const { return config_.vertical_period; }
  bool translation_invariant() const { return vertical_period() == 1; }

  bool in_left_phase(int j) const { return j < config_.n_left; }
  bool in_right_phase(int j) const { return j >= config_.n_right; }

 private:
  int reduce_row(int k2) const {
    if (config_.vertical_period == 0) return k2;
    const int p = static_cast<int>(config_.vertical_period);
    return 2 * floor_mod(k2 / 2, p);
  }

  ScatterMatrix checked_chiral(int j, int k2, ScatterMatrix s) const {
    if (in_left_phase(j)) {
      if (std::abs(s.r) > 1e-12) {
        throw ChiralityViolation(j, k2, "site (j=" + std::to_string(j) + ", k2=" +
                                            std::to_string(k2) +
                                            ") lies in the left phase but r != 0");
      }
      s.r = 0.0;
      s.t /= std::abs(s.t);
    }
    if (in_right_phase(j)) {
      if (std::abs(s.t) > 1e-12) {
        throw ChiralityViolation(j, k2, "site (j=" + std::to_string(j) + ", k2=" +
                                            std::to_string(k2) +
                                            ") lies in the right phase but t != 0");
      }
      s.t = 0.0;
      s.r /= std::abs(s.r);
    }
    return s;
  }

  ScatterMatrix generated(int j, int row) const {
    SiteStream stream(config_.seed, j, row);
    if (in_left_phase(j) || in_right_phase(j)) {
      const cplx q = config_.deterministic_phases ? cplx(1.0, 0.0) : stream.phase();
      return in_left_phase(j) ? ScatterMatrix{q, 0.0, 1.0} : ScatterMatrix{q, 1.0, 0.0};
    }
    return draw_haar_scatter(stream);
  }

  ModelConfig config_;
  std::map<NodeKey, ScatterMatrix> periodic_overrides_;
  std::map<NodeKey, ScatterMatrix> local_overrides_;
};

inline SField field_from_spec(const ModelConfig& config) { return SField(config); }

/// sup over the scattering nodes inside `window` of
/// |q - q'| + sqrt(|r - r'|^2 + |t - t'|^2).
inline double field_distance(const SField& a, const SField& b, const Window& window) {
  const int k2_first = ceil_even(window.k0);
  if (window.columns() == 0 || k2_first > window.k1) {
    throw InvalidInput("field_distance: window contains no scattering node");
  }
  double sup = 0.0;
  for (int j = window.j0; j <= window.j1; ++j) {
    for (int k2 = k2_first; k2 <= window.k1; k2 += 2) {
      const ScatterMatrix s = a.at(j, k2);
      const ScatterMatrix u = b.at(j, k2);
      const double d =
          std::abs(s.q - u.q) + std::sqrt(std::norm(s.r - u.r) + std::norm(s.t - u.t));
      sup = std::max(sup, d);
    }
  }
  return sup;
}

}  // namespace ccilab
