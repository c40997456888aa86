#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ccilab/common.hpp"

namespace ccilab {

inline constexpr double kUnitaryTolerance = 1e-10;

/// max-norm of M^* M - I.
inline double unitarity_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  if (m.size() == 0) return 0.0;
  const CMatrix g = m.adjoint() * m - CMatrix::Identity(m.rows(), m.cols());
  return g.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline double operator_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

inline int numerical_rank(const CMatrix& m, double tol = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  return static_cast<int>((s.array() > tol).count());
}

// Principal argument mapped to [0, 2pi).
inline double phase_0_2pi(cplx z) {
  double a = std::arg(z);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

// Representative of an angle difference in (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

struct UnitaryEigen {
  CVector values;    // radially projected onto the unit circle
  CMatrix vectors;   // unit-norm columns
  double max_residual = 0.0;
};

/// Eigen-decomposition of a matrix certified unitary to 1e-10. Eigenvalues are
/// projected onto S^1 for reporting.
inline UnitaryEigen unitary_eigen(const CMatrix& m, bool with_vectors = true) {
  const double defect = unitarity_defect(m);
  if (!(defect <= kUnitaryTolerance)) {
    throw NumericalFailure("matrix is not unitary to 1e-10 (defect " +
                           std::to_string(defect) + ")");
  }
  UnitaryEigen out;
  if (m.size() == 0) return out;
  Eigen::ComplexEigenSolver<CMatrix> solver(m, with_vectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("complex eigen-solver did not converge");
  }
  out.values = solver.eigenvalues();
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    out.values(i) /= std::abs(out.values(i));
  }
  if (with_vectors) {
    out.vectors = solver.eigenvectors();
    for (Eigen::Index i = 0; i < out.vectors.cols(); ++i) {
      out.vectors.col(i).normalize();
      const double res =
          (m * out.vectors.col(i) - solver.eigenvalues()(i) * out.vectors.col(i)).norm();
      out.max_residual = std::max(out.max_residual, res);
    }
  }
  return out;
}

inline CVector unitary_eigenvalues(const CMatrix& m) { return unitary_eigen(m, false).values; }

inline std::vector<double> sorted_phases(const CVector& values) {
  std::vector<double> ph(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) ph[static_cast<std::size_t>(i)] = phase_0_2pi(values(i));
  std::sort(ph.begin(), ph.end());
  return ph;
}

/// Greedy matching distance between two eigenvalue multisets on S^1: pairs are
/// formed by increasing chordal distance. Returns the worst matched distance.
inline double multiset_distance(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) return INFINITY;
  const auto n = static_cast<std::size_t>(a.size());
  struct Pair {
    double d;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      pairs.push_back({std::abs(a(static_cast<Eigen::Index>(i)) - b(static_cast<Eigen::Index>(j))), i, j});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.d < y.d; });
  std::vector<bool> ua(n, false), ub(n, false);
  double worst = 0.0;
  std::size_t matched = 0;
  for (const auto& p : pairs) {
    if (ua[p.i] || ub[p.j]) continue;
    ua[p.i] = ub[p.j] = true;
    worst = std::max(worst, p.d);
    if (++matched == n) break;
  }
  return worst;
}

}  // namespace ccilab
