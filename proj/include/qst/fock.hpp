#pragma once

#include <string>

#include "qst/common.hpp"

// Complex linear algebra and bosonic primitives in a truncated Fock space.
// All values are immutable after construction and safe to share between
// threads; none of the operations keep internal state.

namespace qst {

/// Normalized pure state in the truncated Fock basis.
class Ket {
 public:
  static Ket from(CVector amplitudes,
                  const Tolerances& tol = default_tolerances());
  // Normalizes instead of validating; fails on (near-)zero norm.
  static Ket normalized(CVector amplitudes);

  int dim() const { return static_cast<int>(v_.size()); }
  const CVector& vector() const { return v_; }

 private:
  explicit Ket(CVector v) : v_(std::move(v)) {}
  CVector v_;
};

/// Hermitian, PSD, unit-trace description of a (possibly mixed) state.
class DensityMatrix {
 public:
  // Validates hermiticity, trace and spectrum against `tol`.
  static DensityMatrix from(CMatrix m,
                            const Tolerances& tol = default_tolerances());
  // For matrices physical by construction; symmetrizes and fixes the trace
  // exactly but skips the O(dim^3) spectrum check.
  static DensityMatrix trusted(CMatrix m);
  static DensityMatrix pure(const Ket& k);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }

  std::string to_json() const;
  static DensityMatrix from_json(const std::string& text,
                                 const Tolerances& tol = default_tolerances());

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

/// Lower-triangular complex factor with a real diagonal: T^H T / tr is a
/// physical density matrix for any such T.
class CholeskyFactor {
 public:
  static CholeskyFactor from(CMatrix m,
                             const Tolerances& tol = default_tolerances());
  // Zeroes the strict upper triangle and the diagonal imaginary parts.
  static CholeskyFactor project(const CMatrix& m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }

 private:
  explicit CholeskyFactor(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

// Matrix elements <n-1|a|n> = sqrt(n).
CMatrix annihilation(int dim);
CMatrix creation(int dim);
CMatrix number_operator(int dim);
// diag((-1)^n)
CMatrix parity(int dim);

// D(alpha) = exp(alpha a^dag - alpha^* a) on the truncated space, computed
// with a Pade scaling-and-squaring matrix exponential.
CMatrix displacement(cxd alpha, int dim);

// First `len` Fock amplitudes of the (infinite-dimensional) coherent state
// |alpha>: e^{-|alpha|^2/2} alpha^n / sqrt(n!). Not renormalized, so
// quadratic forms against in-cutoff states are exact.
CVector coherent_column(cxd alpha, int len);

// First `len` Fock amplitudes of the displaced Fock state D(beta)|n>,
// computed exactly via u_n = (a^dag - beta^*) u_{n-1} / sqrt(n).
CVector displaced_fock_column(cxd beta, int n, int len);

// rho = T^H T / tr(T^H T)
DensityMatrix density_from_cholesky(const CholeskyFactor& t);

// Re tr(O rho) for Hermitian O; fails when the imaginary part exceeds tol.
double expectation(const DensityMatrix& rho, const CMatrix& obs,
                   const Tolerances& tol = default_tolerances());

// Uhlmann fidelity [tr sqrt(sqrt(rho) sigma sqrt(rho))]^2, clipped to [0, 1].
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

double purity(const DensityMatrix& rho);

// 0.5 * tr|rho - sigma| (used by test oracles).
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

// Embeds rho into a larger cutoff, padding with zeros.
DensityMatrix embed(const DensityMatrix& rho, int dim);

// Hermitian PSD square root with eigenvalues clamped at zero.
CMatrix psd_sqrt(const CMatrix& m);

bool is_hermitian(const CMatrix& m, double tol);

// Emitted (to stderr) when a requested state's mean photon number exceeds
// dim/2; see also states::mean_photon.
void warn_truncation(const std::string& what, double mean_photon, int dim);

}  // namespace qst
