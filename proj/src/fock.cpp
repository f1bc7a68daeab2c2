#include "qst/fock.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace qst {

namespace {

void require_dim(int dim) {
  require(dim >= 2, ErrorCode::InvalidDimension,
          "Fock-space dimension must be at least 2, got " +
              std::to_string(dim));
}

void require_finite(const CMatrix& m, const std::string& what) {
  require(m.allFinite(), ErrorCode::InvalidArgument,
          what + " contains non-finite entries");
}

}  // namespace

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

Ket Ket::from(CVector amplitudes, const Tolerances& tol) {
  require(amplitudes.size() >= 2, ErrorCode::InvalidDimension,
          "Ket needs dimension >= 2");
  require(amplitudes.allFinite(), ErrorCode::InvalidArgument,
          "Ket amplitudes must be finite");
  const double norm2 = amplitudes.squaredNorm();
  require(std::abs(norm2 - 1.0) <= tol.ket_norm * 10 + 1e-10,
          ErrorCode::InvalidState,
          "Ket norm^2 deviates from 1 by " + std::to_string(norm2 - 1.0));
  return Ket(std::move(amplitudes));
}

Ket Ket::normalized(CVector amplitudes) {
  require(amplitudes.size() >= 2, ErrorCode::InvalidDimension,
          "Ket needs dimension >= 2");
  const double n = amplitudes.norm();
  require(n > 1e-150, ErrorCode::DegenerateState,
          "cannot normalize a zero ket");
  amplitudes /= n;
  return Ket(std::move(amplitudes));
}

DensityMatrix DensityMatrix::from(CMatrix m, const Tolerances& tol) {
  require(m.rows() == m.cols(), ErrorCode::InvalidDimension,
          "density matrix must be square");
  require(m.rows() >= 2, ErrorCode::InvalidDimension,
          "density matrix needs dimension >= 2");
  require_finite(m, "density matrix");
  require(is_hermitian(m, tol.hermiticity), ErrorCode::InvalidState,
          "density matrix is not Hermitian within tolerance");
  const double tr = m.trace().real();
  require(std::abs(tr - 1.0) <= tol.trace, ErrorCode::InvalidState,
          "density matrix trace deviates from 1 by " + std::to_string(tr - 1.0));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  const double min_ev = es.eigenvalues().minCoeff();
  require(min_ev >= tol.min_eigenvalue, ErrorCode::InvalidState,
          "density matrix has eigenvalue " + std::to_string(min_ev));
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::trusted(CMatrix m) {
  CMatrix h = 0.5 * (m + m.adjoint());
  const double tr = h.trace().real();
  require(tr > 1e-300, ErrorCode::DegenerateState,
          "trusted density matrix has vanishing trace");
  h /= tr;
  return DensityMatrix(std::move(h));
}

DensityMatrix DensityMatrix::pure(const Ket& k) {
  CMatrix m = k.vector() * k.vector().adjoint();
  return DensityMatrix(std::move(m));
}

CholeskyFactor CholeskyFactor::from(CMatrix m, const Tolerances& tol) {
  require(m.rows() == m.cols() && m.rows() >= 2, ErrorCode::InvalidDimension,
          "Cholesky factor must be square with dimension >= 2");
  require_finite(m, "Cholesky factor");
  for (int r = 0; r < m.rows(); ++r) {
    require(std::abs(m(r, r).imag()) <= tol.hermiticity,
            ErrorCode::InvalidArgument,
            "Cholesky factor diagonal must be real");
    for (int c = r + 1; c < m.cols(); ++c) {
      require(std::abs(m(r, c)) <= tol.hermiticity, ErrorCode::InvalidArgument,
              "Cholesky factor must be lower triangular");
    }
  }
  return CholeskyFactor(std::move(m));
}

CholeskyFactor CholeskyFactor::project(const CMatrix& m) {
  require(m.rows() == m.cols() && m.rows() >= 2, ErrorCode::InvalidDimension,
          "Cholesky factor must be square with dimension >= 2");
  CMatrix t = m.triangularView<Eigen::Lower>();
  for (int r = 0; r < t.rows(); ++r) t(r, r) = cxd(t(r, r).real(), 0.0);
  return CholeskyFactor(std::move(t));
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

CMatrix annihilation(int dim) {
  require_dim(dim);
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

CMatrix creation(int dim) { return annihilation(dim).adjoint(); }

CMatrix number_operator(int dim) {
  require_dim(dim);
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = double(k);
  return n;
}

CMatrix parity(int dim) {
  require_dim(dim);
  CMatrix p = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return p;
}

CMatrix displacement(cxd alpha, int dim) {
  require_dim(dim);
  require(std::isfinite(alpha.real()) && std::isfinite(alpha.imag()),
          ErrorCode::InvalidArgument, "displacement amplitude must be finite");
  if (alpha == cxd(0.0, 0.0)) return CMatrix::Identity(dim, dim);
  CMatrix gen = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) {
    const double s = std::sqrt(double(n));
    gen(n, n - 1) = alpha * s;          // alpha a^dag
    gen(n - 1, n) = -std::conj(alpha) * s;  // -alpha^* a
  }
  return gen.exp();
}

CVector coherent_column(cxd alpha, int len) {
  require(len >= 1, ErrorCode::InvalidDimension, "coherent column length");
  CVector v(len);
  // amp_n = e^{-|a|^2/2} a^n / sqrt(n!) built up multiplicatively
  cxd amp = std::exp(cxd(-0.5 * std::norm(alpha), 0.0));
  v(0) = amp;
  for (int n = 1; n < len; ++n) {
    amp *= alpha / std::sqrt(double(n));
    v(n) = amp;
  }
  return v;
}

CVector displaced_fock_column(cxd beta, int n, int len) {
  require(n >= 0, ErrorCode::InvalidArgument, "photon index must be >= 0");
  require(len >= 1, ErrorCode::InvalidDimension, "column length");
  // Work with n extra rows so each raising step sees exact lower entries.
  const int work = len + n;
  CVector u = coherent_column(beta, work);
  const cxd bconj = std::conj(beta);
  CVector next(work);
  for (int k = 1; k <= n; ++k) {
    next.setZero();
    for (int m = 0; m < work; ++m) {
      cxd val = -bconj * u(m);
      if (m > 0) val += std::sqrt(double(m)) * u(m - 1);
      next(m) = val / std::sqrt(double(k));
    }
    u.swap(next);
  }
  return u.head(len);
}

// ---------------------------------------------------------------------------
// Density-matrix operations
// ---------------------------------------------------------------------------

DensityMatrix density_from_cholesky(const CholeskyFactor& t) {
  const CMatrix& m = t.matrix();
  CMatrix prod = m.adjoint() * m;
  const double tr = prod.trace().real();
  require(tr > 1e-30, ErrorCode::DegenerateFactor,
          "Cholesky factor has vanishing tr(T^H T)");
  prod /= tr;
  // T^H T is Hermitian PSD by construction; symmetrize roundoff only.
  return DensityMatrix::trusted(std::move(prod));
}

double expectation(const DensityMatrix& rho, const CMatrix& obs,
                   const Tolerances& tol) {
  require(obs.rows() == rho.dim() && obs.cols() == rho.dim(),
          ErrorCode::DimensionMismatch,
          "observable dimension does not match state");
  require(is_hermitian(obs, tol.observable_hermiticity),
          ErrorCode::InvalidObservable, "observable is not Hermitian");
  const cxd tr = (obs * rho.matrix()).trace();
  require(std::abs(tr.imag()) <= tol.imaginary_expectation,
          ErrorCode::NumericalFailure,
          "expectation value has imaginary part " + std::to_string(tr.imag()));
  return tr.real();
}

CMatrix psd_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
          "eigendecomposition failed");
  // Eigenvalues below the relative noise floor would contribute
  // sqrt(eps)-sized spurious terms; zero them before the square root.
  const double floor = es.eigenvalues().cwiseAbs().maxCoeff() * 1e-13;
  RVector ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev(i) = ev(i) > floor ? ev(i) : 0.0;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require(rho.dim() == sigma.dim(), ErrorCode::DimensionMismatch,
          "fidelity requires equal dimensions");
  const CMatrix sr = psd_sqrt(rho.matrix());
  const CMatrix inner = sr * sigma.matrix() * sr;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()),
                                            Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
          "eigendecomposition failed in fidelity");
  const double floor = es.eigenvalues().cwiseAbs().maxCoeff() * 1e-13;
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev > floor) s += std::sqrt(ev);
  }
  double f = s * s;
  require(f <= 1.0 + 1e-9, ErrorCode::NumericalFailure,
          "fidelity exceeded 1 by more than 1e-9");
  return std::clamp(f, 0.0, 1.0);
}

double purity(const DensityMatrix& rho) {
  return (rho.matrix() * rho.matrix()).trace().real();
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require(rho.dim() == sigma.dim(), ErrorCode::DimensionMismatch,
          "trace distance requires equal dimensions");
  CMatrix diff = rho.matrix() - sigma.matrix();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

DensityMatrix embed(const DensityMatrix& rho, int dim) {
  require(dim >= rho.dim(), ErrorCode::InvalidDimension,
          "embedding target must not be smaller");
  if (dim == rho.dim()) return rho;
  CMatrix big = CMatrix::Zero(dim, dim);
  big.topLeftCorner(rho.dim(), rho.dim()) = rho.matrix();
  return DensityMatrix::trusted(std::move(big));
}

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

void warn_truncation(const std::string& what, double mean_photon, int dim) {
  std::cerr << "warning: " << what << " has mean photon number " << mean_photon
            << " above half the cutoff " << dim
            << "; expect truncation artefacts\n";
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string DensityMatrix::to_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  auto grid = [&](auto pick) {
    std::vector<std::vector<double>> rows(dim());
    for (int r = 0; r < dim(); ++r) {
      rows[r].resize(dim());
      for (int c = 0; c < dim(); ++c) rows[r][c] = pick(m_(r, c));
    }
    return rows;
  };
  j["re"] = grid([](cxd v) { return v.real(); });
  j["im"] = grid([](cxd v) { return v.imag(); });
  return j.dump();
}

DensityMatrix DensityMatrix::from_json(const std::string& text,
                                       const Tolerances& tol) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::IoError, std::string("bad density-matrix JSON: ") + e.what());
  }
  require(j.contains("dim") && j.contains("re") && j.contains("im"),
          ErrorCode::IoError, "density-matrix JSON needs dim/re/im");
  const int dim = j["dim"].get<int>();
  require(dim >= 2, ErrorCode::InvalidDimension, "bad dim in JSON");
  CMatrix m(dim, dim);
  const auto& re = j["re"];
  const auto& im = j["im"];
  require(static_cast<int>(re.size()) == dim &&
              static_cast<int>(im.size()) == dim,
          ErrorCode::IoError, "re/im row count mismatch");
  for (int r = 0; r < dim; ++r) {
    require(static_cast<int>(re[r].size()) == dim &&
                static_cast<int>(im[r].size()) == dim,
            ErrorCode::IoError, "re/im column count mismatch");
    for (int c = 0; c < dim; ++c)
      m(r, c) = cxd(re[r][c].get<double>(), im[r][c].get<double>());
  }
  return DensityMatrix::from(std::move(m), tol);
}

}  // namespace qst
