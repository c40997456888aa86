#pragma once

// Shared generators and independent oracles for the unit tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ccilab/ccilab.hpp"

namespace testing_support {

using namespace ccilab;

// Hand-rolled generator; reproducible across standard libraries.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : stream_(seed, 0x5eed, 0) {}

  double uniform() { return stream_.uniform(); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }
  double normal() { return stream_.gaussian_pair().first; }
  cplx complex_normal() {
    const auto [a, b] = stream_.gaussian_pair();
    return {a, b};
  }
  cplx phase() { return stream_.phase(); }
  ScatterMatrix haar() { return draw_haar_scatter(stream_); }

  CVector vector(Eigen::Index n) {
    CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_normal();
    return v / v.norm();
  }
  StateVector state(const Window& w) { return StateVector(w, vector(static_cast<Eigen::Index>(w.size()))); }

  CMatrix haar_unitary(int n) {
    CMatrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = complex_normal();
    Eigen::HouseholderQR<CMatrix> qr(a);
    return qr.householderQ() * CMatrix::Identity(n, n);
  }

 private:
  SiteStream stream_;
};

inline ModelConfig interface_config(int n_left, int n_right, std::uint64_t seed,
                                    unsigned period = 0) {
  ModelConfig c;
  c.n_left = n_left;
  c.n_right = n_right;
  c.seed = seed;
  c.vertical_period = period;
  return c;
}

// A random interface of the given width (hi - lo + 1) with a random offset and
// random parity of n_left / n_right.
inline SField random_interface(Gen& g, int width, std::uint64_t seed, unsigned period = 0) {
  const int lo = 2 * g.integer(-3, 3);
  const int hi = lo + width - 1;
  int n_left = lo, n_right = hi;
  if (width >= 3 && g.uniform() < 0.5) n_left = lo + 1;
  if (width >= 3 && g.uniform() < 0.5) n_right = hi - 1;
  if (n_left > n_right) n_left = n_right;
  return SField(interface_config(n_left, n_right, seed, period));
}

// U_CC on a window straight from the node equations
//   (U|2j,2k>, U|2j+1,2k-1>)^T = S_{2j,2k} (|2j,2k-1>, |2j+1,2k>)^T
//   (U|2j+1,2k>, U|2j+2,2k+1>)^T = S_{2j+1,2k} (|2j+2,2k>, |2j+1,2k+1>)^T
// with heights wrapped on a torus when requested and out-of-window images
// dropped otherwise.
inline CMatrix reference_dense(const SField& f, const Window& w, bool torus) {
  const auto n = static_cast<Eigen::Index>(w.size());
  CMatrix m = CMatrix::Zero(n, n);
  const int h = w.rows();
  auto wrap = [&](int k) { return torus ? w.k0 + floor_mod(k - w.k0, h) : k; };
  auto put = [&](int jf, int kf, int jt, int kt, cplx v) {
    const LatticeSite from{jf, wrap(kf)}, to{jt, wrap(kt)};
    if (!w.contains(from) || !w.contains(to)) return;
    m(static_cast<Eigen::Index>(w.index(to)), static_cast<Eigen::Index>(w.index(from))) += v;
  };
  for (int j = w.j0 - 1; j <= w.j1 + 1; ++j) {
    for (int k = w.k0 - 2; k <= w.k1 + 2; ++k) {
      if (floor_mod(k, 2) != 0) continue;
      const int row = wrap(k);
      if (torus && floor_mod(row, 2) != 0) continue;
      if (torus && (k < w.k0 || k > w.k1)) continue;  // each torus node once
      const Eigen::Matrix2cd s = f.at(j, row).matrix();
      if (is_even(j)) {
        put(j, k, j, k - 1, s(0, 0));
        put(j, k, j + 1, k, s(0, 1));
        put(j + 1, k - 1, j, k - 1, s(1, 0));
        put(j + 1, k - 1, j + 1, k, s(1, 1));
      } else {
        put(j, k, j + 1, k, s(0, 0));
        put(j, k, j, k + 1, s(0, 1));
        put(j + 1, k + 1, j + 1, k, s(1, 0));
        put(j + 1, k + 1, j, k + 1, s(1, 1));
      }
    }
  }
  return m;
}

inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace testing_support
