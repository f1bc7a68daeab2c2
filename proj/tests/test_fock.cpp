#include <doctest.h>

#include "qst/fock.hpp"
#include "support/oracles.hpp"

using namespace qst;

TEST_CASE("annihilation matrix elements") {
  const CMatrix a3 = annihilation(3);
  CHECK(a3(0, 1).real() == doctest::Approx(1.0));
  CHECK(std::abs(a3(1, 0)) == 0.0);

  const CMatrix a4 = annihilation(4);
  CHECK(a4(2, 3).real() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (c != r + 1) CHECK(std::abs(a4(r, c)) == 0.0);

  CHECK_THROWS_AS(annihilation(1), Error);
}

TEST_CASE("truncated commutator [a, a^dag]") {
  const int dim = 8;
  const CMatrix a = annihilation(dim);
  const CMatrix comm = a * a.adjoint() - a.adjoint() * a;
  for (int n = 0; n < dim - 1; ++n)
    CHECK(comm(n, n).real() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(comm(7, 7).real() == doctest::Approx(-7.0).epsilon(1e-14));
}

TEST_CASE("displacement of zero is the identity") {
  const CMatrix d = displacement(cxd(0, 0), 8);
  CHECK((d - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("displacement column 0 matches the coherent power series") {
  const CMatrix d = displacement(cxd(1.0, 0.0), 32);
  for (int n = 0; n < 24; ++n) {
    const cxd expected = oracles::coherent_amplitude(cxd(1.0, 0.0), n);
    CHECK(std::abs(d(n, 0) - expected) < 1e-8);
  }
}

TEST_CASE("displacement is unitary at a safe cutoff") {
  const cxd alpha(1.0, 0.5);
  const CMatrix prod = displacement(alpha, 32) * displacement(-alpha, 32);
  CHECK((prod - CMatrix::Identity(32, 32)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("displacement rejects non-finite amplitudes") {
  CHECK_THROWS_AS(
      displacement(cxd(std::numeric_limits<double>::infinity(), 0), 8), Error);
}

TEST_CASE("displacement composition picks up the BCH phase") {
  const int dim = 32;
  Rng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const cxd a(rng.uniform(-1, 1) * 0.7, rng.uniform(-1, 1) * 0.7);
    const cxd b(rng.uniform(-1, 1) * 0.7, rng.uniform(-1, 1) * 0.7);
    const cxd phase = std::exp(cxd(0.0, std::imag(a * std::conj(b))));
    const CMatrix lhs = displacement(a, dim) * displacement(b, dim);
    const CMatrix rhs = phase * displacement(a + b, dim);
    // compare on the well-truncated block
    CHECK((lhs - rhs).topLeftCorner(16, 16).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("parity") {
  const CMatrix p2 = parity(2);
  CHECK(p2(0, 0).real() == 1.0);
  CHECK(p2(1, 1).real() == -1.0);

  CVector one = CVector::Zero(8);
  one(1) = 1.0;
  const auto fock1 = DensityMatrix::pure(Ket::from(one));
  CHECK(expectation(fock1, parity(8)) == doctest::Approx(-1.0));

  // coherent parity e^{-2|alpha|^2}
  const auto coh = DensityMatrix::pure(Ket::normalized(coherent_column(1.0, 32)));
  CHECK(expectation(coh, parity(32)) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
}

TEST_CASE("displaced Fock columns agree with the matrix exponential") {
  const cxd beta(0.7, -0.4);
  for (int n : {0, 1, 3}) {
    const CVector u = displaced_fock_column(beta, n, 24);
    const CMatrix d = displacement(beta, 48);
    for (int m = 0; m < 24; ++m) CHECK(std::abs(u(m) - d(m, n)) < 1e-9);
  }
}

TEST_CASE("density_from_cholesky basics") {
  const auto id = CholeskyFactor::from(CMatrix::Identity(4, 4));
  const auto rho = density_from_cholesky(id);
  CHECK((rho.matrix() - CMatrix::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() <
        1e-15);

  CMatrix t = CMatrix::Zero(4, 4);
  t(0, 0) = 5.0;
  const auto pure0 = density_from_cholesky(CholeskyFactor::from(t));
  CHECK(pure0.matrix()(0, 0).real() == doctest::Approx(1.0));
  CHECK(pure0.matrix().cwiseAbs().sum() == doctest::Approx(1.0));

  CHECK_THROWS_AS(density_from_cholesky(CholeskyFactor::from(CMatrix::Zero(4, 4))),
                  Error);
}

TEST_CASE("density_from_cholesky yields physical states for random factors") {
  Rng rng(42);
  for (int dim : {4, 8, 16, 32}) {
    for (int trial = 0; trial < 25; ++trial) {
      CMatrix t = CMatrix::Zero(dim, dim);
      for (int r = 0; r < dim; ++r) {
        t(r, r) = rng.normal();
        for (int c = 0; c < r; ++c) t(r, c) = cxd(rng.normal(), rng.normal());
      }
      const auto rho = density_from_cholesky(CholeskyFactor::project(t));
      CHECK(std::abs(rho.matrix().trace().real() - 1.0) < 1e-12);
      CHECK(is_hermitian(rho.matrix(), 1e-12));
      Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix(),
                                                Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
  }
}

TEST_CASE("expectation basics and errors") {
  const auto coh = DensityMatrix::pure(Ket::normalized(coherent_column(2.0, 32)));
  CHECK(expectation(coh, CMatrix::Identity(32, 32)) == doctest::Approx(1.0));
  CHECK(expectation(coh, number_operator(32)) ==
        doctest::Approx(4.0).epsilon(1e-6));

  CVector three = CVector::Zero(8);
  three(3) = 1.0;
  CHECK(expectation(DensityMatrix::pure(Ket::from(three)), parity(8)) ==
        doctest::Approx(-1.0));

  CHECK_THROWS_AS(expectation(coh, CMatrix::Identity(8, 8)), Error);
  CMatrix bad = CMatrix::Zero(32, 32);
  bad(0, 1) = 1.0;  // not Hermitian
  CHECK_THROWS_AS(expectation(coh, bad), Error);
}

TEST_CASE("expectation is linear") {
  Rng rng(3);
  CMatrix t = CMatrix::Zero(8, 8);
  for (int r = 0; r < 8; ++r) {
    t(r, r) = rng.normal();
    for (int c = 0; c < r; ++c) t(r, c) = cxd(rng.normal(), rng.normal());
  }
  const auto rho = density_from_cholesky(CholeskyFactor::project(t));
  const CMatrix a = number_operator(8);
  const CMatrix b = parity(8);
  const double x = 1.7, y = -0.3;
  const CMatrix combo = x * a + y * b;
  CHECK(std::abs(expectation(rho, combo) -
                 (x * expectation(rho, a) + y * expectation(rho, b))) < 1e-10);
}

TEST_CASE("fidelity basics") {
  const auto rho = DensityMatrix::pure(Ket::normalized(coherent_column(1.0, 16)));
  CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-8));

  CVector v0 = CVector::Zero(4), v1 = CVector::Zero(4);
  v0(0) = 1.0;
  v1(1) = 1.0;
  const auto f0 = DensityMatrix::pure(Ket::from(v0));
  const auto f1 = DensityMatrix::pure(Ket::from(v1));
  CHECK(fidelity(f0, f1) < 1e-10);
}

TEST_CASE("fidelity equals squared overlap for pure states") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    CVector psi(8), phi(8);
    for (int i = 0; i < 8; ++i) {
      psi(i) = cxd(rng.normal(), rng.normal());
      phi(i) = cxd(rng.normal(), rng.normal());
    }
    psi.normalize();
    phi.normalize();
    const double f = fidelity(DensityMatrix::pure(Ket::from(psi)),
                              DensityMatrix::pure(Ket::from(phi)));
    CHECK(std::abs(f - oracles::pure_overlap(psi, phi)) < 1e-8);
  }
}

TEST_CASE("fidelity is symmetric and monotone under mixing") {
  Rng rng(5);
  auto sample = [&](int dim) {
    CMatrix t = CMatrix::Zero(dim, dim);
    for (int r = 0; r < dim; ++r) {
      t(r, r) = rng.normal();
      for (int c = 0; c < r; ++c) t(r, c) = cxd(rng.normal(), rng.normal());
    }
    return density_from_cholesky(CholeskyFactor::project(t));
  };
  const auto rho = sample(8);
  const auto sigma = sample(8);
  CHECK(std::abs(fidelity(rho, sigma) - fidelity(sigma, rho)) < 1e-8);

  double prev = 2.0;
  for (double s : {0.0, 0.25, 0.5}) {
    const auto mix = DensityMatrix::trusted((1.0 - s) * rho.matrix() +
                                            s * sigma.matrix());
    const double f = fidelity(rho, mix);
    CHECK(f <= prev + 1e-9);
    prev = f;
  }
}

TEST_CASE("density matrix validation rejects unphysical input") {
  CMatrix m = CMatrix::Identity(4, 4);
  m(0, 0) = 1.5;
  m(1, 1) = -0.5;
  m /= m.trace().real();
  CHECK_THROWS_AS(DensityMatrix::from(m), Error);  // negative eigenvalue

  CMatrix nh = CMatrix::Identity(4, 4) / 4.0;
  nh(0, 1) = cxd(0.3, 0.0);  // not Hermitian
  CHECK_THROWS_AS(DensityMatrix::from(nh), Error);
}

TEST_CASE("density matrix JSON round-trip is exact") {
  Rng rng(19);
  CMatrix t = CMatrix::Zero(6, 6);
  for (int r = 0; r < 6; ++r) {
    t(r, r) = rng.normal();
    for (int c = 0; c < r; ++c) t(r, c) = cxd(rng.normal(), rng.normal());
  }
  const auto rho = density_from_cholesky(CholeskyFactor::project(t));
  const auto back = DensityMatrix::from_json(rho.to_json());
  CHECK((rho.matrix() - back.matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cholesky factor validation") {
  CMatrix t = CMatrix::Zero(4, 4);
  t(0, 1) = 1.0;  // upper triangle
  CHECK_THROWS_AS(CholeskyFactor::from(t), Error);
  CMatrix t2 = CMatrix::Zero(4, 4);
  t2(0, 0) = cxd(1.0, 0.5);  // complex diagonal
  CHECK_THROWS_AS(CholeskyFactor::from(t2), Error);
  CHECK_NOTHROW(CholeskyFactor::project(t2));
}
