#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace ccilab;
using testing_support::Gen;
using testing_support::max_abs;
using Catch::Matchers::WithinAbs;

namespace {

SField periodic_interface(Gen& g, int width, std::uint64_t seed) {
  return testing_support::random_interface(g, width, seed, 1);
}

FiberKernel scalar_taps(std::map<int, cplx> taps) {
  std::map<int, CMatrix> m;
  for (const auto& [k, v] : taps) m.emplace(k, CMatrix::Constant(1, 1, v));
  return FiberKernel(1, std::move(m));
}

// W1 diag(z^a_1, ..., z^a_d) W2: winding sum a_i under the z^k <-> V(k) convention.
FiberKernel random_winding_kernel(Gen& g, const std::vector<int>& powers) {
  const int d = static_cast<int>(powers.size());
  const CMatrix w1 = g.haar_unitary(d), w2 = g.haar_unitary(d);
  std::map<int, CMatrix> taps;
  for (int i = 0; i < d; ++i) {
    auto [it, fresh] = taps.try_emplace(powers[static_cast<std::size_t>(i)], CMatrix::Zero(d, d));
    it->second += w1.col(i) * w2.row(i);
  }
  return FiberKernel(d, std::move(taps));
}

}  // namespace

TEST_CASE("fiber kernel reproduces U on strip states", "[fiber][oracle]") {
  Gen g(41);
  for (int trial = 0; trial < 6; ++trial) {
    const SField f = periodic_interface(g, 1 + 2 * g.integer(0, 4), 1300 + trial);
    const StripSpec s = f.strip();
    const FiberKernel k = fiber_kernel(f, s);
    CHECK(k.support_radius() <= 2);
    for (int i = 0; i < 20; ++i) {
      const Window w = s.window(-9, 10);
      StateVector psi(w, CVector::Zero(static_cast<Eigen::Index>(w.size())));
      for (int j = s.lo; j <= s.hi; ++j)
        for (int h = -5; h <= 6; ++h) psi.at({j, h}) = g.complex_normal();
      const auto lhs = k.apply(regroup(psi, s));
      const auto rhs = regroup(apply_u(f, psi), s);
      double worst = 0.0;
      for (const auto& [cell, v] : lhs) {
        const auto it = rhs.find(cell);
        const CVector other = it == rhs.end() ? CVector::Zero(v.size()) : it->second;
        worst = std::max(worst, (v - other).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-12);
    }
  }
}

TEST_CASE("fiber kernel examples", "[fiber]") {
  SECTION("sharp interface has two single-entry taps") {
    const SField f(testing_support::interface_config(0, 0, 3, 1));
    const FiberKernel k = fiber_kernel(f, f.strip());
    REQUIRE(k.taps().size() == 2);
    REQUIRE(k.taps().count(0) == 1);
    REQUIRE(k.taps().count(-1) == 1);
    for (const auto& [z, m] : k.taps()) {
      CHECK((m.array().abs() > 0.0).count() == 1);
      CHECK_THAT(m.cwiseAbs().maxCoeff(), WithinAbs(1.0, 1e-15));
    }
    CHECK(winding_exact(k) == -1);
  }
  SECTION("width-3 symbol is unitary at 32 points") {
    const SField f(testing_support::interface_config(1, 3, 8, 1));
    const FiberKernel k = fiber_kernel(f, f.strip());
    for (int m = 0; m < 32; ++m) CHECK(unitarity_defect(k.symbol(kTwoPi * m / 32)) <= 1e-10);
  }
  SECTION("preconditions") {
    const SField aperiodic(testing_support::interface_config(0, 2, 1));
    CHECK_THROWS_AS(fiber_kernel(aperiodic, aperiodic.strip()), InvalidInput);
    const SField plaquettes = SField::pure_phase(Chirality::right, 1, false, 1);
    CHECK_THROWS_AS(fiber_kernel(plaquettes, StripSpec::from_bounds(0, 2)), InvalidInput);
  }
}

TEST_CASE("winding number examples", "[fiber][winding]") {
  std::map<int, CMatrix> shift3{{1, CMatrix::Identity(3, 3)}};
  CHECK(winding_exact(FiberKernel(3, shift3)) == 3);
  std::map<int, CMatrix> shift2{{1, CMatrix::Identity(2, 2)}};
  CHECK(winding_phase(FiberKernel(2, shift2), 64) == 2);
  Gen g(42);
  std::map<int, CMatrix> constant{{0, g.haar_unitary(4)}};
  CHECK(winding_exact(FiberKernel(4, constant)) == 0);
  CHECK(winding_phase(FiberKernel(4, constant), 64) == 0);

  CHECK_THROWS_AS(winding_exact(scalar_taps({{1, 0.5}})), NumericalFailure);
  CHECK_THROWS_AS(winding_phase(scalar_taps({{1, 1.0}}), 32), InvalidInput);
  CHECK_THROWS_AS(winding_phase(scalar_taps({{340, 1.0}}), 64), NumericalFailure);
}

TEST_CASE("exact and phase windings agree", "[fiber][winding][property]") {
  Gen g(43);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = g.integer(1, 4);
    std::vector<int> powers;
    int total = 0;
    for (int i = 0; i < d; ++i) {
      powers.push_back(g.integer(-2, 2));
      total += powers.back();
    }
    const FiberKernel k = random_winding_kernel(g, powers);
    CHECK(winding_exact(k) == total);
    CHECK(winding_phase(k, 64) == total);
    CHECK_THAT(kitaev_trace(k, g.integer(-3, 3)), WithinAbs(total, 1e-9));
    const FiberKernel c = k.conjugated(g.haar_unitary(d));
    CHECK(winding_phase(c, 64) == total);
    CHECK(winding_exact(c) == total);
  }
}

TEST_CASE("interface kernels wind once downward", "[fiber][winding]") {
  Gen g(44);
  for (int trial = 0; trial < 10; ++trial) {
    const SField f = periodic_interface(g, 1 + 2 * g.integer(0, 5), 1400 + trial);
    const FiberKernel k = fiber_kernel(f, f.strip());
    CHECK(winding_exact(k) == -1);
    CHECK(winding_phase(k, 64) == -1);
    CHECK_THAT(kitaev_trace(k, 0), WithinAbs(-1.0, 1e-10));
    CHECK_THAT(kitaev_trace(k.power(2), 1), WithinAbs(-2.0, 1e-9));
    CHECK_THAT(winding_sum(k), WithinAbs(-1.0, 1e-9));
  }
}

TEST_CASE("quantum-walk coins", "[fiber][qw]") {
  const double y = 0.37;
  SECTION("printed examples") {
    const Eigen::Matrix2cd even = qw_coin({1.0, 1.0, 0.0}, 0, y);
    Eigen::Matrix2cd expect;
    expect << 0.0, unit_phase(y), unit_phase(-y), 0.0;
    CHECK((even - expect).norm() <= 1e-15);
    const Eigen::Matrix2cd odd = qw_coin({1.0, 1.0, 0.0}, 1, y);
    CHECK((odd - Eigen::Matrix2cd::Identity()).norm() <= 1e-15);
  }
  SECTION("random periodic field") {
    Gen g(45);
    const SField f = periodic_interface(g, 7, 1500);
    const StripSpec s = f.strip();
    const auto [n0, n1] = strip_line_range(s);
    const QuantumWalk walk = qw_coins(f);
    for (int m = 0; m < 16; ++m) {
      const double yy = kTwoPi * m / 16;
      const QWFiber fib = walk(yy);
      for (int j = s.lo - 2; j <= s.hi + 2; ++j) CHECK(unitarity_defect(fib.coin(j)) <= 1e-12);
      const CMatrix u = fib.matrix(n0, n1);
      CHECK(unitarity_defect(u) <= 1e-12);
      CHECK(max_abs(u - mqw_strip(f, s, yy).matrix) <= 1e-15);
    }
  }
  SECTION("Bloch waves on a torus reproduce U_QW") {
    // psi(j,2k) = e^{-iky} phi(2j), psi(j,2k+1) = e^{-iky} phi(2j-1) is mapped
    // by U to the Bloch wave of U_QW(y) phi.
    Gen g(46);
    const SField f = periodic_interface(g, 5, 1600);
    const StripSpec s = f.strip();
    const auto [n0, n1] = strip_line_range(s);
    const int rows = 6;
    const Window w = s.window(0, 2 * rows - 1);
    const Network net(f, w, Closure::torus);
    for (int m = 0; m < rows; ++m) {
      const double yy = kTwoPi * m / rows;
      const CVector phi = g.vector(n1 - n0 + 1);
      auto bloch = [&](const CVector& v) {
        StateVector psi(w, CVector::Zero(static_cast<Eigen::Index>(w.size())));
        for (int j = s.lo; j <= s.hi; ++j) {
          for (int k = 0; k < rows; ++k) {
            psi.at({j, 2 * k}) = unit_phase(-k * yy) * v(2 * j - n0);
            psi.at({j, 2 * k + 1}) = unit_phase(-k * yy) * v(2 * j - 1 - n0);
          }
        }
        return psi;
      };
      const CVector uphi = qw_coins(f)(yy).matrix(n0, n1) * phi;
      CHECK((net.apply(bloch(phi)).amplitudes() - bloch(uphi).amplitudes()).norm() <= 1e-12);
    }
  }
}

TEST_CASE("five-diagonal form", "[fiber][mqw]") {
  Gen g(47);
  SECTION("strip restriction is unitary and equivalent to the symbol") {
    for (int trial = 0; trial < 6; ++trial) {
      const SField f = periodic_interface(g, 1 + 2 * g.integer(0, 5), 1700 + trial);
      const StripSpec s = f.strip();
      const FiberKernel k = fiber_kernel(f, s);
      for (int m = 0; m < 16; ++m) {
        const double y = kTwoPi * (m + 0.25) / 16;
        const MQWMatrix mq = mqw_strip(f, s, y);
        CHECK(mq.closed);
        CHECK(unitarity_defect(mq.matrix) <= 1e-10);
        CHECK(mq.matrix.rows() == 2 * s.width());
        // opposite Fourier orientation of the two pictures
        CHECK(multiset_distance(unitary_eigenvalues(mq.matrix), unitary_eigenvalues(k.symbol(-y))) <= 1e-9);
        for (Eigen::Index r = 0; r < mq.matrix.rows(); ++r)
          for (Eigen::Index c = 0; c < mq.matrix.cols(); ++c)
            if (mq.matrix(r, c) != cplx{}) CHECK(std::abs(r - c) <= 2);
      }
    }
  }
  SECTION("diagonal phase gives a phase-decorated permutation") {
    const SField f = SField::pure_phase(Chirality::right, 0, true, 1);
    const MQWMatrix mq = mqw_matrix(f, 0.9, -20, 20);
    for (Eigen::Index r = 2; r < mq.matrix.rows() - 2; ++r) {
      CHECK((mq.matrix.row(r).array().abs() > 0.0).count() == 1);
      CHECK_THAT(mq.matrix.row(r).cwiseAbs().maxCoeff(), WithinAbs(1.0, 1e-15));
    }
  }
}

TEST_CASE("phase gauge", "[fiber][gauge]") {
  Gen g(48);
  SECTION("random interfaces") {
    for (int trial = 0; trial < 6; ++trial) {
      const SField f = periodic_interface(g, 1 + 2 * g.integer(0, 5), 1800 + trial);
      const StripSpec s = f.strip();
      const GaugeTransform gt = gauge_normalize(f, s.lo, s.hi);
      for (int j = s.lo; j <= s.hi; ++j) {
        const ScatterMatrix a = gt.field.at(j, 0);
        if (is_even(j)) {
          CHECK(std::abs(a.t.real()) <= 1e-15);
          CHECK(a.t.imag() >= 0.0);
        } else {
          CHECK(std::abs(a.r.imag()) <= 1e-15);
          CHECK(a.r.real() >= 0.0);
        }
      }
      const auto [n0, n1] = strip_line_range(s);
      REQUIRE(gt.n0 == n0);
      const CVector d = gt.phases.segment(0, n1 - n0 + 1);
      for (int m = 0; m < 8; ++m) {
        const double y = kTwoPi * m / 8 + 0.1;
        const CMatrix before = mqw_strip(f, s, y).matrix, after = mqw_strip(gt.field, s, y).matrix;
        CHECK(max_abs(d.asDiagonal() * before * d.conjugate().asDiagonal() - after) <= 1e-12);
        CHECK(multiset_distance(unitary_eigenvalues(before), unitary_eigenvalues(after)) <= 1e-10);
      }
      const cplx d0 = mqw_strip(gt.field, s, 0.0).matrix.determinant();
      for (int m = 1; m < 256; ++m) {
        const double y = kTwoPi * m / 256;
        CHECK(std::abs(mqw_strip(gt.field, s, y).matrix.determinant() * unit_phase(y) - d0) <= 1e-10);
      }
      const FiberKernel k = fiber_kernel(gt.field, s);
      CHECK(winding_exact(k) == -1);
      CHECK(winding_phase(k, 64) == -1);
      CHECK(band_structure(k, 128).coverage.covers_circle);
    }
  }
  SECTION("already normalized field needs no conjugation") {
    ModelConfig c = testing_support::interface_config(0, 4, 5, 1);
    const double a = 0.6, b = 0.8;
    c.overrides = {{0, 0, 1.0, a, cplx(0.0, b)}, {1, 0, kI, a, cplx(0.3, 0.4) / 0.5 * b},
                   {2, 0, 1.0, cplx(0.0, a), cplx(0.0, b)}, {3, 0, 1.0, b, cplx(0.0, -a)}};
    const SField f(c);
    const StripSpec s = f.strip();
    const GaugeTransform gt = gauge_normalize(f, s.lo, s.hi);
    CHECK((gt.phases.array() - cplx(1.0, 0.0)).abs().maxCoeff() <= 1e-15);
  }
  SECTION("a phase on r_{2j+1} is removed") {
    ModelConfig c = testing_support::interface_config(0, 2, 5, 1);
    c.overrides = {{1, 0, 1.0, unit_phase(1.1) * 0.6, 0.8}};
    const SField f(c);
    const GaugeTransform gt = gauge_normalize(f, 0, 2);
    CHECK(std::abs(gt.field.at(1, 0).r - 0.6) <= 1e-15);
  }
}

TEST_CASE("band structure", "[fiber][bands]") {
  SECTION("square-root branches of [[0,1],[e^{iy},0]]") {
    CMatrix v0 = CMatrix::Zero(2, 2), vm1 = CMatrix::Zero(2, 2);
    v0(0, 1) = 1.0;
    vm1(1, 0) = 1.0;
    const FiberKernel k(2, {{0, v0}, {-1, vm1}});
    const BandStructure b = band_structure(k, 128);
    REQUIRE(b.phases.front().size() == 2);
    CHECK(b.coverage.covers_circle);
    CHECK(b.degeneracies.empty());
    // each branch follows +-e^{iy/2} and ends where the other started
    const auto& first = b.phases.front();
    const auto& last = b.phases.back();
    CHECK(std::abs(unit_phase(last[0]) - unit_phase(first[1])) <= 1e-9);
    CHECK(std::abs(unit_phase(last[1]) - unit_phase(first[0])) <= 1e-9);
    for (std::size_t i = 0; i < b.y.size(); ++i) {
      const cplx z = unit_phase(b.phases[i][0]);
      CHECK(std::min(std::abs(z - unit_phase(b.y[i] / 2)), std::abs(z + unit_phase(b.y[i] / 2))) <= 1e-9);
    }
  }
  SECTION("sharp interface covers the circle") {
    const SField f(testing_support::interface_config(0, 0, 3, 1));
    const BandStructure b = band_structure(fiber_kernel(f, f.strip()), 128);
    CHECK(b.coverage.covers_circle);
    CHECK(b.coverage.largest_gap <= 1e-10);
    CHECK(b.coverage.surrogate);
  }
  SECTION("flat bands leave a gap") {
    CMatrix v0 = CMatrix::Zero(2, 2);
    v0(0, 0) = 1.0;
    v0(1, 1) = kI;
    const BandStructure b = band_structure(FiberKernel(2, {{0, v0}}), 128);
    CHECK_FALSE(b.coverage.covers_circle);
    CHECK_THAT(b.coverage.largest_gap, WithinAbs(1.5 * kPi, 1e-12));
  }
  SECTION("random periodic interfaces") {
    Gen g(49);
    for (int trial = 0; trial < 4; ++trial) {
      const SField f = periodic_interface(g, 1 + 2 * g.integer(1, 5), 1900 + trial);
      const FiberKernel k = fiber_kernel(f, f.strip());
      const BandStructure b = band_structure(k, 256);
      CHECK(b.coverage.covers_circle);
      CHECK(b.coverage.max_step < kPi / 4);
      CHECK(b.coverage.max_step <= b.coverage.step_bound + 1e-12);
      for (const auto& row : b.phases) {
        REQUIRE(static_cast<int>(row.size()) == k.dim());
        for (double p : row) {
          CHECK(p >= 0.0);
          CHECK(p < kTwoPi);
        }
      }
    }
  }
  SECTION("grid precondition") {
    std::map<int, CMatrix> id{{0, CMatrix::Identity(1, 1)}};
    CHECK_THROWS_AS(band_structure(FiberKernel(1, id), 64), InvalidInput);
  }
}
