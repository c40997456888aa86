#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ccilab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

/// Base class for every error raised by the library. `kind()` is the stable
/// machine-readable tag used in CLI error reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view kind() const noexcept { return "error"; }
};

/// Malformed configuration or violated precondition on an argument.
class InvalidInput : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "invalid_input"; }
};

/// A scattering matrix contradicts the chiral phase of its column.
class ChiralityViolation : public Error {
 public:
  ChiralityViolation(int j, int k2, const std::string& what)
      : Error(what), j_(j), k2_(k2) {}
  std::string_view kind() const noexcept override { return "chirality_violation"; }
  int j() const noexcept { return j_; }
  int k2() const noexcept { return k2_; }

 private:
  int j_;
  int k2_;
};

/// Amplitude would be transported out of a finite open window.
class WindowLeak : public Error {
 public:
  WindowLeak(int j, int k, const std::string& what) : Error(what), j_(j), k_(k) {}
  std::string_view kind() const noexcept override { return "window_leak"; }
  int j() const noexcept { return j_; }
  int k() const noexcept { return k_; }

 private:
  int j_;
  int k_;
};

/// A numerical certificate (unitarity, eigen residual, rounding) failed.
class NumericalFailure : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "numerical_failure"; }
};

// Floor division and modulo for possibly negative lattice coordinates.
constexpr int floor_div(int a, int b) noexcept {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

constexpr int floor_mod(int a, int b) noexcept { return a - b * floor_div(a, b); }

constexpr bool is_even(int n) noexcept { return (n & 1) == 0; }

// Largest even integer <= n and smallest even integer >= n.
constexpr int floor_even(int n) noexcept { return n - floor_mod(n, 2); }
constexpr int ceil_even(int n) noexcept { return n + floor_mod(n, 2); }

inline cplx unit_phase(double angle) { return std::polar(1.0, angle); }

}  // namespace ccilab
