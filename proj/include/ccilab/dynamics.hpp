#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ccilab/operator.hpp"

namespace ccilab {

struct TransportRecord {
  int t = 0;
  double mean_k = 0.0;
  double var_k = 0.0;
  double upper_weight = 0.0;  // <psi_t, Q psi_t>, Q = chi(k >= cut)
  int jmin = 0, jmax = 0, kmin = 0, kmax = 0;
};

struct TransportTrace {
  int cut = 1;
  std::vector<TransportRecord> records;
};

struct EvolveResult {
  TransportTrace trace;
  StateVector final_state;
};

inline constexpr double kNormDrift = 1e-10;
inline constexpr double kSupportThreshold = 1e-30;

inline TransportRecord transport_record(const StateVector& psi, int t, int cut) {
  const Window& w = psi.window();
  TransportRecord rec;
  rec.t = t;
  rec.jmin = rec.kmin = std::numeric_limits<int>::max();
  rec.jmax = rec.kmax = std::numeric_limits<int>::min();
  double total = 0.0, m1 = 0.0, upper = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const cplx a = psi.amplitudes()(static_cast<Eigen::Index>(i));
    const double p = std::norm(a);
    if (std::abs(a) <= kSupportThreshold) continue;
    const LatticeSite s = w.site(i);
    total += p;
    if (s.k >= cut) upper += p;
    rec.jmin = std::min(rec.jmin, s.j);
    rec.jmax = std::max(rec.jmax, s.j);
    rec.kmin = std::min(rec.kmin, s.k);
    rec.kmax = std::max(rec.kmax, s.k);
  }
  if (total == 0.0) throw InvalidInput("transport_record: state is zero");
  // offsets from kmin keep single-row states exact
  for (std::size_t i = 0; i < w.size(); ++i) {
    const cplx a = psi.amplitudes()(static_cast<Eigen::Index>(i));
    if (std::abs(a) > kSupportThreshold) m1 += std::norm(a) * (w.site(i).k - rec.kmin);
  }
  rec.mean_k = rec.kmin + m1 / total;
  double m2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const cplx a = psi.amplitudes()(static_cast<Eigen::Index>(i));
    if (std::abs(a) <= kSupportThreshold) continue;
    const double dk = w.site(i).k - rec.mean_k;
    m2 += std::norm(a) * dk * dk;
  }
  rec.var_k = m2 / total;
  rec.upper_weight = upper / total;
  return rec;
}

/// psi_{t+1} = U psi_t for t < steps on the (open) window of psi0. Raises
/// WindowLeak as soon as amplitude would leave the window.
inline EvolveResult evolve(const SField& field, const StateVector& psi0, int steps, int cut = 1) {
  if (steps < 0) throw InvalidInput("evolve: steps must be >= 0");
  const Network net(field, psi0.window(), Closure::open);
  const double n0 = psi0.norm();
  EvolveResult out{TransportTrace{cut, {}}, psi0};
  out.trace.records.reserve(static_cast<std::size_t>(steps) + 1);
  out.trace.records.push_back(transport_record(psi0, 0, cut));
  for (int t = 1; t <= steps; ++t) {
    out.final_state = net.apply(out.final_state);
    const double drift = std::abs(out.final_state.norm() - n0);
    if (drift > kNormDrift) {
      throw NumericalFailure("evolve: norm drifted by " + std::to_string(drift) + " at t = " +
                             std::to_string(t));
    }
    out.trace.records.push_back(transport_record(out.final_state, t, cut));
  }
  return out;
}

struct Autocorrelation {
  std::vector<cplx> a;         // a_n = <psi0, U^n psi0>, n = 0..T
  std::vector<double> spectrum; // |sum_n a_n e^{-2 pi i m n / (T+1)}|, m = 0..T
};

inline Autocorrelation autocorrelation_spectrum(const SField& field, const StateVector& psi0,
                                                int steps) {
  if (steps < 0) throw InvalidInput("autocorrelation_spectrum: steps must be >= 0");
  const Network net(field, psi0.window(), Closure::open);
  Autocorrelation out;
  StateVector psi = psi0;
  out.a.push_back(psi0.dot(psi));
  for (int n = 1; n <= steps; ++n) {
    psi = net.apply(psi);
    out.a.push_back(psi0.dot(psi));
  }
  const auto len = out.a.size();
  for (std::size_t m = 0; m < len; ++m) {
    cplx s{};
    for (std::size_t n = 0; n < len; ++n) {
      s += out.a[n] * unit_phase(-kTwoPi * static_cast<double>((m * n) % len) / static_cast<double>(len));
    }
    out.spectrum.push_back(std::abs(s));
  }
  return out;
}

}  // namespace ccilab
