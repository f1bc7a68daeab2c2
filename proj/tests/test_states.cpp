#include <doctest.h>

#include "qst/states.hpp"
#include "support/oracles.hpp"

using namespace qst;

namespace {

double overlap2(const DensityMatrix& a, const DensityMatrix& b) {
  return (a.matrix() * b.matrix()).trace().real();
}

}  // namespace

TEST_CASE("fock states") {
  const auto vac = make_fock(0, 8);
  CHECK(vac.matrix()(0, 0).real() == 1.0);
  CHECK(mean_photon(make_fock(1, 32)) == doctest::Approx(1.0));
  CHECK(mean_photon(make_fock(5, 32)) == doctest::Approx(5.0));
  CHECK_THROWS_AS(make_fock(8, 8), Error);
}

TEST_CASE("fock(10) is nearly a large 4-component cat") {
  const int cutoff = 64;
  // the paper's printed overlap values follow the tr-sqrt (amplitude)
  // convention; fidelity() itself is the squared quantity
  const double f = std::sqrt(
      fidelity(make_fock(10, cutoff), make_cat(cxd(3.0, 0.0), 4, 0, cutoff)));
  CHECK(f > 0.996);
  CHECK(f == doctest::Approx(0.99689).epsilon(1e-4));
}

TEST_CASE("coherent states") {
  const auto vac = make_coherent(cxd(0, 0), 16);
  CHECK(vac.matrix()(0, 0).real() == doctest::Approx(1.0));

  CHECK(mean_photon(make_coherent(cxd(2.0, 0.0), 32)) ==
        doctest::Approx(4.0).epsilon(1e-6));
  CHECK(mean_photon(make_coherent(cxd(1.5, 0.0), 32)) ==
        doctest::Approx(2.25).epsilon(1e-6));

  // Poisson(1) photon distribution
  const auto rho = make_coherent(cxd(1.0, 0.0), 32);
  CHECK(rho.matrix()(0, 0).real() ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(rho.matrix()(1, 1).real() ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("thermal states") {
  const auto vac = make_thermal(0.0, 8);
  CHECK(vac.matrix()(0, 0).real() == 1.0);

  const auto rho = make_thermal(1.0, 32);
  CHECK(rho.matrix()(0, 0).real() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rho.matrix()(1, 1).real() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(mean_photon(rho) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(mean_photon(make_thermal(3.0, 128)) ==
        doctest::Approx(3.0).epsilon(1e-4));

  CHECK_THROWS_AS(make_thermal(-0.1, 8), Error);
}

TEST_CASE("num(1.562) code states") {
  const auto mu0 = make_num_1562(0, 8);
  const auto mu1 = make_num_1562(1, 8);
  const double c0_sq = (7.0 - std::sqrt(17.0)) / 6.0;
  CHECK(mu0.matrix()(0, 0).real() == doctest::Approx(c0_sq).epsilon(1e-12));
  CHECK(std::abs(mu0.matrix().trace().real() - 1.0) < 1e-12);
  CHECK(std::abs(mu1.matrix().trace().real() - 1.0) < 1e-12);
  CHECK(overlap2(mu0, mu1) < 1e-15);
  CHECK_THROWS_AS(make_num_1562(2, 8), Error);
}

TEST_CASE("binomial code states") {
  const auto rho = make_binomial(1, 1, 0, 8);
  CHECK(rho.matrix()(0, 0).real() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rho.matrix()(2, 2).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rho.matrix()(4, 4).real() == doctest::Approx(0.25).epsilon(1e-12));

  const auto mu0 = make_binomial(2, 3, 0, 32);
  const auto mu1 = make_binomial(2, 3, 1, 32);
  CHECK(overlap2(mu0, mu1) < 1e-12);

  CHECK_THROWS_AS(make_binomial(3, 9, 0, 32), Error);  // support exceeds cutoff
}

TEST_CASE("binomial amplitudes live on multiples of S+1") {
  const auto rho = make_binomial(2, 4, 0, 32);
  for (int n = 0; n < 32; ++n) {
    if (n % 3 != 0) CHECK(rho.matrix()(n, n).real() < 1e-14);
  }
}

TEST_CASE("binomial(1, 16) is nearly a 2-component cat of alpha = 4") {
  const int cutoff = 64;
  const double f = std::sqrt(fidelity(make_binomial(1, 16, 0, cutoff),
                                       make_cat(cxd(4.0, 0.0), 0, 0, cutoff)));
  CHECK(f > 0.99);
  CHECK(f == doctest::Approx(0.99113).epsilon(1e-4));
}

TEST_CASE("cat states") {
  const auto even = make_cat(cxd(2.0, 0.0), 0, 0, 32);
  for (int n = 1; n < 32; n += 2) CHECK(even.matrix()(n, n).real() < 1e-12);

  const auto odd = make_cat(cxd(2.0, 0.0), 0, 1, 32);
  CHECK(overlap2(even, odd) < 1e-15);

  // S = 0 two-component superposition oracle
  const cxd alpha(2.0, 0.0);
  CVector two = coherent_column(alpha, 32) + coherent_column(-alpha, 32);
  two.normalize();
  const double f = fidelity(even, DensityMatrix::pure(Ket::from(two)));
  CHECK(f == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gkp states") {
  const auto mu0 = make_gkp_finite(0.3, 0, 20, 32);
  const auto mu1 = make_gkp_finite(0.3, 1, 20, 32);
  CHECK(std::abs(mu0.matrix().trace().real() - 1.0) < 1e-12);
  const double ov = overlap2(mu0, mu1);
  CHECK(ov < 0.05);
  // regression fixture from the first verified run
  CHECK(ov == doctest::Approx(6.7735e-07).epsilon(1e-2));

  // strong envelope suppresses everything except the origin
  const auto tight = make_gkp_finite(1.0, 0, 20, 32);
  CHECK(tight.matrix()(0, 0).real() > 0.9);
}

TEST_CASE("random density matrices") {
  const auto a = make_random_density(0.8, 32, 1234);
  const auto b = make_random_density(0.8, 32, 1234);
  CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() == 0.0);

  CHECK(std::abs(a.matrix().trace().real() - 1.0) < 1e-12);
  CHECK(is_hermitian(a.matrix(), 1e-12));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a.matrix(),
                                            Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);

  // full density is generically full rank
  int full_rank = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto rho = make_random_density(1.0, 8, seed);
    Eigen::SelfAdjointEigenSolver<CMatrix> s(rho.matrix(),
                                             Eigen::EigenvaluesOnly);
    if (s.eigenvalues().minCoeff() > 0.0) ++full_rank;
  }
  CHECK(full_rank == 100);
}

TEST_CASE("pure families have unit purity and pass validation") {
  std::vector<DensityMatrix> states;
  states.push_back(make_fock(3, 32));
  states.push_back(make_coherent(cxd(1.2, -0.4), 32));
  states.push_back(make_num_1562(0, 32));
  states.push_back(make_num_1562(1, 32));
  states.push_back(make_binomial(2, 4, 0, 32));
  states.push_back(make_binomial(1, 6, 1, 32));
  states.push_back(make_cat(cxd(1.5, 0.5), 1, 0, 32));
  states.push_back(make_gkp_finite(0.35, 0, 20, 32));
  for (const auto& rho : states) {
    CHECK(purity(rho) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_NOTHROW(DensityMatrix::from(rho.matrix()));
  }
  // mixed families validate too
  CHECK_NOTHROW(DensityMatrix::from(make_thermal(2.5, 32).matrix()));
  CHECK_NOTHROW(DensityMatrix::from(make_random_density(0.8, 16, 7).matrix()));
}

TEST_CASE("logical pairs are orthogonal") {
  CHECK(fidelity(make_num_1562(0, 32), make_num_1562(1, 32)) < 1e-6);
  CHECK(fidelity(make_binomial(2, 4, 0, 32), make_binomial(2, 4, 1, 32)) <
        1e-6);
  CHECK(fidelity(make_cat(cxd(2, 0), 0, 0, 32), make_cat(cxd(2, 0), 0, 1, 32)) <
        1e-6);
}

TEST_CASE("state spec JSON round-trip builds the same state") {
  StateSpec spec;
  spec.family = StateFamily::Cat;
  spec.alpha = cxd(1.7, 0.2);
  spec.S = 1;
  spec.mu = 1;
  spec.cutoff = 32;
  const auto round = StateSpec::from_json(spec.to_json());
  CHECK((spec.build().matrix() - round.build().matrix()).cwiseAbs().maxCoeff() ==
        0.0);

  StateSpec rnd;
  rnd.family = StateFamily::Random;
  rnd.density = 0.8;
  rnd.seed = 99;
  rnd.cutoff = 16;
  const auto round2 = StateSpec::from_json(rnd.to_json());
  CHECK((rnd.build().matrix() - round2.build().matrix()).cwiseAbs().maxCoeff() ==
        0.0);
}
