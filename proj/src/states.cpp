#include "qst/states.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace qst {

namespace {

void check_cutoff(int cutoff) {
  require(cutoff >= 2, ErrorCode::InvalidDimension,
          "cutoff must be at least 2, got " + std::to_string(cutoff));
}

void maybe_warn(const std::string& what, const DensityMatrix& rho) {
  const double n = mean_photon(rho);
  if (n > rho.dim() / 2.0) warn_truncation(what, n, rho.dim());
}

}  // namespace

std::string family_name(StateFamily f) {
  switch (f) {
    case StateFamily::Fock: return "fock";
    case StateFamily::Coherent: return "coherent";
    case StateFamily::Thermal: return "thermal";
    case StateFamily::Num: return "num";
    case StateFamily::Binomial: return "binomial";
    case StateFamily::Cat: return "cat";
    case StateFamily::Gkp: return "gkp";
    case StateFamily::Random: return "random";
  }
  fail(ErrorCode::InvalidArgument, "unknown state family");
}

StateFamily family_from_name(const std::string& name) {
  if (name == "fock") return StateFamily::Fock;
  if (name == "coherent") return StateFamily::Coherent;
  if (name == "thermal") return StateFamily::Thermal;
  if (name == "num") return StateFamily::Num;
  if (name == "binomial") return StateFamily::Binomial;
  if (name == "cat") return StateFamily::Cat;
  if (name == "gkp") return StateFamily::Gkp;
  if (name == "random") return StateFamily::Random;
  fail(ErrorCode::ConfigError, "unknown state family '" + name + "'");
}

DensityMatrix make_fock(int n, int cutoff) {
  check_cutoff(cutoff);
  require(n >= 0, ErrorCode::InvalidArgument, "photon number must be >= 0");
  require(n < cutoff, ErrorCode::OutOfSpace,
          "fock(" + std::to_string(n) + ") does not fit in cutoff " +
              std::to_string(cutoff));
  CVector v = CVector::Zero(cutoff);
  v(n) = 1.0;
  return DensityMatrix::pure(Ket::from(std::move(v)));
}

DensityMatrix make_coherent(cxd alpha, int cutoff) {
  check_cutoff(cutoff);
  require(std::isfinite(alpha.real()) && std::isfinite(alpha.imag()),
          ErrorCode::InvalidArgument, "alpha must be finite");
  CVector v = coherent_column(alpha, cutoff);
  auto rho = DensityMatrix::pure(Ket::normalized(std::move(v)));
  if (std::norm(alpha) > cutoff / 2.0)
    warn_truncation("coherent state", std::norm(alpha), cutoff);
  return rho;
}

DensityMatrix make_thermal(double n_th, int cutoff) {
  check_cutoff(cutoff);
  require(n_th >= 0.0 && std::isfinite(n_th), ErrorCode::InvalidArgument,
          "thermal occupation must be >= 0");
  CMatrix m = CMatrix::Zero(cutoff, cutoff);
  if (n_th == 0.0) {
    m(0, 0) = 1.0;
    return DensityMatrix::trusted(std::move(m));
  }
  const double q = n_th / (n_th + 1.0);
  double p = 1.0 / (n_th + 1.0);
  double total = 0.0;
  for (int n = 0; n < cutoff; ++n) {
    m(n, n) = p;
    total += p;
    p *= q;
  }
  m /= total;  // renormalize the truncated geometric distribution
  auto rho = DensityMatrix::trusted(std::move(m));
  maybe_warn("thermal state", rho);
  return rho;
}

DensityMatrix make_num_1562(int mu, int cutoff) {
  check_cutoff(cutoff);
  require(cutoff >= 5, ErrorCode::InvalidDimension,
          "num(1.562) needs cutoff >= 5");
  require(mu == 0 || mu == 1, ErrorCode::InvalidArgument,
          "mu must be 0 or 1");
  const double r17 = std::sqrt(17.0);
  CVector v = CVector::Zero(cutoff);
  if (mu == 0) {
    v(0) = std::sqrt((7.0 - r17) / 6.0);
    v(3) = std::sqrt((r17 - 1.0) / 6.0);
  } else {
    v(1) = std::sqrt((9.0 - r17) / 6.0);
    v(4) = std::sqrt((r17 - 3.0) / 6.0);
  }
  return DensityMatrix::pure(Ket::from(std::move(v)));
}

DensityMatrix make_binomial(int S, int N, int mu, int cutoff) {
  check_cutoff(cutoff);
  require(S >= 0 && N >= 1, ErrorCode::InvalidArgument,
          "binomial needs S >= 0 and N >= 1");
  require(mu == 0 || mu == 1, ErrorCode::InvalidArgument, "mu must be 0 or 1");
  require((S + 1) * (N + 1) < cutoff, ErrorCode::OutOfSpace,
          "binomial support (S+1)(N+1) = " + std::to_string((S + 1) * (N + 1)) +
              " exceeds cutoff " + std::to_string(cutoff));
  CVector v = CVector::Zero(cutoff);
  // sqrt(C(N+1, m)) built multiplicatively: C(N+1,m) = C(N+1,m-1)*(N+2-m)/m
  double binom = 1.0;
  for (int m = 0; m <= N + 1; ++m) {
    if (m > 0) binom *= double(N + 2 - m) / double(m);
    const double sign = (mu == 1 && m % 2 == 1) ? -1.0 : 1.0;
    v((S + 1) * m) = sign * std::sqrt(binom);
  }
  v /= std::sqrt(std::pow(2.0, N + 1));
  return DensityMatrix::pure(Ket::from(std::move(v)));
}

DensityMatrix make_cat(cxd alpha, int S, int mu, int cutoff) {
  check_cutoff(cutoff);
  require(S >= 0, ErrorCode::InvalidArgument, "cat needs S >= 0");
  require(mu == 0 || mu == 1, ErrorCode::InvalidArgument, "mu must be 0 or 1");
  CVector coh = coherent_column(alpha, cutoff);
  CVector v = CVector::Zero(cutoff);
  const int period = 2 * (S + 1);
  const int offset = (S + 1) * mu;
  for (int n = offset; n < cutoff; n += period) v(n) = coh(n);
  const double norm = v.norm();
  require(norm > 1e-12, ErrorCode::DegenerateProjection,
          "cat projection annihilates the coherent state numerically");
  v /= norm;
  auto rho = DensityMatrix::pure(Ket::from(std::move(v)));
  if (std::norm(alpha) > cutoff / 2.0)
    warn_truncation("cat state", std::norm(alpha), cutoff);
  return rho;
}

DensityMatrix make_gkp_finite(double delta, int mu, int grid_extent,
                              int cutoff) {
  check_cutoff(cutoff);
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::InvalidArgument,
          "gkp needs Delta > 0");
  require(mu == 0 || mu == 1, ErrorCode::InvalidArgument, "mu must be 0 or 1");
  require(grid_extent >= 0, ErrorCode::InvalidArgument,
          "grid extent must be >= 0");
  if (delta < 0.2 || delta > 0.5)
    std::fprintf(stderr,
                 "warning: gkp Delta = %g outside the documented range "
                 "[0.2, 0.5]\n",
                 delta);
  const double root = std::sqrt(kPi / 2.0);
  CVector v = CVector::Zero(cutoff);
  for (int n1 = -grid_extent; n1 <= grid_extent; ++n1) {
    for (int n2 = -grid_extent; n2 <= grid_extent; ++n2) {
      const cxd a(root * (2.0 * n1 + mu), root * n2);
      const double envelope = std::exp(-delta * delta * std::norm(a));
      if (envelope < 1e-18) continue;
      const cxd phase = std::exp(cxd(0.0, -a.real() * a.imag()));
      v += envelope * phase * coherent_column(a, cutoff);
    }
  }
  const double norm = v.norm();
  require(norm > 1e-12, ErrorCode::DegenerateState,
          "gkp superposition has vanishing norm");
  v /= norm;
  return DensityMatrix::pure(Ket::from(std::move(v)));
}

DensityMatrix make_random_density(double density, int cutoff,
                                  std::uint64_t seed) {
  check_cutoff(cutoff);
  require(density > 0.0 && density <= 1.0, ErrorCode::InvalidArgument,
          "density must be in (0, 1]");
  Rng rng(seed);
  CMatrix t = CMatrix::Zero(cutoff, cutoff);
  for (int r = 0; r < cutoff; ++r) {
    t(r, r) = cxd(rng.normal(), 0.0);
    for (int c = 0; c < r; ++c) {
      const cxd g(rng.normal(), rng.normal());
      const bool keep = rng.uniform() < density;
      t(r, c) = keep ? g : cxd(0.0, 0.0);
    }
  }
  return density_from_cholesky(CholeskyFactor::project(t));
}

double mean_photon(const DensityMatrix& rho) {
  double n = 0.0;
  for (int k = 0; k < rho.dim(); ++k) n += k * rho.matrix()(k, k).real();
  return n;
}

// ---------------------------------------------------------------------------
// StateSpec
// ---------------------------------------------------------------------------

DensityMatrix StateSpec::build() const {
  switch (family) {
    case StateFamily::Fock: return make_fock(n, cutoff);
    case StateFamily::Coherent: return make_coherent(alpha, cutoff);
    case StateFamily::Thermal: return make_thermal(n_th, cutoff);
    case StateFamily::Num: return make_num_1562(mu, cutoff);
    case StateFamily::Binomial: return make_binomial(S, N, mu, cutoff);
    case StateFamily::Cat: return make_cat(alpha, S, mu, cutoff);
    case StateFamily::Gkp:
      return make_gkp_finite(delta, mu, grid_extent, cutoff);
    case StateFamily::Random:
      return make_random_density(density, cutoff, seed);
  }
  fail(ErrorCode::InvalidArgument, "unknown state family");
}

std::string StateSpec::to_json() const {
  nlohmann::json j;
  j["family"] = family_name(family);
  j["cutoff"] = cutoff;
  switch (family) {
    case StateFamily::Fock:
      j["n"] = n;
      break;
    case StateFamily::Coherent:
      j["alpha_re"] = alpha.real();
      j["alpha_im"] = alpha.imag();
      break;
    case StateFamily::Thermal:
      j["n_th"] = n_th;
      break;
    case StateFamily::Num:
      j["mu"] = mu;
      break;
    case StateFamily::Binomial:
      j["S"] = S;
      j["N"] = N;
      j["mu"] = mu;
      break;
    case StateFamily::Cat:
      j["alpha_re"] = alpha.real();
      j["alpha_im"] = alpha.imag();
      j["S"] = S;
      j["mu"] = mu;
      break;
    case StateFamily::Gkp:
      j["delta"] = delta;
      j["mu"] = mu;
      j["grid_extent"] = grid_extent;
      break;
    case StateFamily::Random:
      j["density"] = density;
      j["seed"] = seed;
      break;
  }
  return j.dump();
}

StateSpec StateSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad StateSpec JSON: ") + e.what());
  }
  require(j.contains("family") && j.contains("cutoff"), ErrorCode::ConfigError,
          "StateSpec needs family and cutoff");
  StateSpec s;
  s.family = family_from_name(j["family"].get<std::string>());
  s.cutoff = j["cutoff"].get<int>();
  if (j.contains("n")) s.n = j["n"].get<int>();
  if (j.contains("mu")) s.mu = j["mu"].get<int>();
  if (j.contains("S")) s.S = j["S"].get<int>();
  if (j.contains("N")) s.N = j["N"].get<int>();
  if (j.contains("alpha_re") || j.contains("alpha_im"))
    s.alpha = cxd(j.value("alpha_re", 0.0), j.value("alpha_im", 0.0));
  if (j.contains("n_th")) s.n_th = j["n_th"].get<double>();
  if (j.contains("delta")) s.delta = j["delta"].get<double>();
  if (j.contains("grid_extent")) s.grid_extent = j["grid_extent"].get<int>();
  if (j.contains("density")) s.density = j["density"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  return s;
}

}  // namespace qst
