#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qst {

using cxd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

// Error codes mirror the failure modes of the public operations. The CLI
// maps ConfigError-class codes to exit code 2 and numerical failures to 3.
enum class ErrorCode {
  InvalidDimension,
  InvalidArgument,
  InvalidObservable,
  InvalidState,
  OutOfSpace,
  DegenerateFactor,
  DegenerateProjection,
  DegenerateState,
  DegenerateNormalization,
  DimensionMismatch,
  ShapeError,
  NumericalFailure,
  ConfigError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

// Numerical tolerances used by state validation and the analytic oracles.
// Defaults satisfy double precision with a wide margin at the cutoffs used
// in this project (dim <= 128); callers may tighten or loosen per instance.
struct Tolerances {
  double hermiticity = 1e-10;
  double trace = 1e-10;
  double min_eigenvalue = -1e-9;
  double ket_norm = 1e-10;
  double observable_hermiticity = 1e-8;
  double imaginary_expectation = 1e-8;
  double matrix_exp = 1e-12;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances t{};
  return t;
}

// Deterministic 64-bit RNG. Every stochastic routine takes a seed or an
// Rng explicitly; nothing draws from global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller on fresh uniforms.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // rejection to avoid modulo bias
    std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Derive an independent stream (for per-sample / per-epoch seeding).
  Rng fork(std::uint64_t salt) {
    std::uint64_t s = next_u64();
    return Rng(s ^ (salt * 0xd1342543de82ef95ULL));
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qst
