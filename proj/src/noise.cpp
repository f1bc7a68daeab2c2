#include "qst/noise.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "qst/kernels.hpp"
#include "qst/states.hpp"

namespace qst {

DensityMatrix mix_random(const DensityMatrix& rho, double sigma,
                         double density, std::uint64_t seed) {
  require(sigma >= 0.0 && sigma <= 0.5, ErrorCode::InvalidArgument,
          "mixing weight must be in [0, 0.5]");
  if (sigma == 0.0) return rho;
  const DensityMatrix random = make_random_density(density, rho.dim(), seed);
  CMatrix mixed = (1.0 - sigma) * rho.matrix() + sigma * random.matrix();
  return DensityMatrix::trusted(std::move(mixed));
}

DensityMatrix photon_loss(const DensityMatrix& rho, double loss_fraction) {
  require(loss_fraction >= 0.0 && loss_fraction <= 1.0,
          ErrorCode::InvalidArgument, "loss fraction must be in [0, 1]");
  if (loss_fraction == 0.0) return rho;
  const int dim = rho.dim();
  if (loss_fraction == 1.0) return make_fock(0, dim);
  const double eta = 1.0 - loss_fraction;

  // Kraus operators <n-k| A_k |n> = sqrt(C(n,k) eta^{n-k} (1-eta)^k).
  CMatrix out = CMatrix::Zero(dim, dim);
  CMatrix a_k(dim, dim);
  for (int k = 0; k < dim; ++k) {
    a_k.setZero();
    for (int n = k; n < dim; ++n) {
      double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                     std::lgamma(n - k + 1.0);
      double amp = std::exp(0.5 * (log_c + (n - k) * std::log(eta) +
                                   k * std::log1p(-eta)));
      a_k(n - k, n) = amp;
    }
    out.noalias() += a_k * rho.matrix() * a_k.adjoint();
  }
  return DensityMatrix::trusted(std::move(out));
}

std::vector<double> gaussian_kernel(double spacing, double n_th, int* size) {
  require(n_th > 0.0, ErrorCode::InvalidArgument, "n_th must be > 0");
  require(spacing > 0.0, ErrorCode::InvalidArgument, "spacing must be > 0");
  // Identity when the kernel fits inside one pixel.
  if (n_th < 0.5 * spacing * spacing) {
    *size = 1;
    return {1.0};
  }
  // Cut where the envelope falls below 1e-14.
  const int radius = static_cast<int>(
      std::ceil(std::sqrt(n_th * std::log(1e14)) / spacing));
  const int k = 2 * radius + 1;
  std::vector<double> kernel(static_cast<std::size_t>(k) * k);
  double total = 0.0;
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      const double r2 = (x * x + y * y) * spacing * spacing;
      const double v = std::exp(-r2 / n_th);
      kernel[(y + radius) * k + (x + radius)] = v;
      total += v;
    }
  }
  for (double& v : kernel) v /= total;
  *size = k;
  return kernel;
}

std::vector<double> gaussian_convolve_image(const std::vector<double>& image,
                                            int h, int w, double spacing,
                                            double n_th) {
  require(static_cast<int>(image.size()) == h * w, ErrorCode::DimensionMismatch,
          "image size mismatch");
  int k = 0;
  const std::vector<double> kernel = gaussian_kernel(spacing, n_th, &k);
  if (k == 1) return image;
  std::vector<double> out(image.size());
  kernels::image_convolve(image.data(), h, w, kernel.data(), k, k, out.data());
  return out;
}

DataVector gaussian_convolve(const DataVector& data, const PhaseGrid& grid,
                             double n_th) {
  require(grid.layout == PhaseGrid::Layout::Square, ErrorCode::InvalidArgument,
          "Gaussian convolution needs a square grid");
  require(grid.size() == data.size(), ErrorCode::DimensionMismatch,
          "grid / data length mismatch");
  require(grid.nx >= 2, ErrorCode::InvalidArgument, "degenerate grid");
  const double spacing = (grid.hi - grid.lo) / (grid.nx - 1);
  DataVector out = data;
  out.values =
      gaussian_convolve_image(data.values, grid.ny, grid.nx, spacing, n_th);
  return out;
}

std::vector<double> affine_augment(const std::vector<double>& image, int h,
                                   int w, const AffineParams& p) {
  require(static_cast<int>(image.size()) == h * w, ErrorCode::DimensionMismatch,
          "image size mismatch");
  const double th = p.theta_deg * kPi / 180.0;
  const double om = p.omega_deg * kPi / 180.0;
  // Forward map about the center: (x, y) -> A (x, y) + (dx, dy).
  const double a00 = p.sx * std::cos(th);
  const double a01 = -p.sy * std::sin(th + om);
  const double a10 = p.sx * std::sin(th);
  const double a11 = p.sy * std::cos(th + om);
  const double det = a00 * a11 - a01 * a10;
  require(std::abs(det) > 1e-12, ErrorCode::InvalidArgument,
          "affine transform is singular");
  // Inverse of A for output-to-source mapping.
  const double i00 = a11 / det, i01 = -a01 / det;
  const double i10 = -a10 / det, i11 = a00 / det;
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

  std::vector<double> out(image.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ox = x - cx, oy = y - cy;
      if (p.flip_h) ox = -ox;
      if (p.flip_v) oy = -oy;
      const double tx = ox - p.dx, ty = oy - p.dy;
      const double sx = i00 * tx + i01 * ty + cx;
      const double sy = i10 * tx + i11 * ty + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      double acc = 0.0;
      for (int dy2 = 0; dy2 <= 1; ++dy2) {
        for (int dx2 = 0; dx2 <= 1; ++dx2) {
          const int yy = y0 + dy2, xx = x0 + dx2;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const double wgt = (dx2 ? fx : 1.0 - fx) * (dy2 ? fy : 1.0 - fy);
          acc += wgt * image[yy * w + xx];
        }
      }
      out[y * w + x] = acc;
    }
  }
  return out;
}

AffineParams sample_affine_params(int h, int w, Rng& rng) {
  AffineParams p;
  p.theta_deg = rng.uniform(0.0, 180.0);
  p.omega_deg = rng.uniform(0.0, 5.0);
  p.dx = rng.uniform(-0.2, 0.2) * w;
  p.dy = rng.uniform(-0.2, 0.2) * h;
  p.sx = rng.uniform(0.8, 1.2);
  p.sy = rng.uniform(0.8, 1.2);
  p.flip_h = rng.uniform() < 0.5;
  p.flip_v = rng.uniform() < 0.5;
  return p;
}

DataVector additive_gaussian(const DataVector& data, double sigma_g,
                             std::uint64_t seed) {
  require(sigma_g >= 0.0, ErrorCode::InvalidArgument, "sigma must be >= 0");
  DataVector out = data;
  if (sigma_g == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.values) v += sigma_g * rng.normal();
  return out;
}

DataVector pepper(const DataVector& data, double fraction,
                  std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCode::InvalidArgument,
          "pepper fraction must be in [0, 1]");
  DataVector out = data;
  const std::size_t len = out.values.size();
  const std::size_t zeroed =
      static_cast<std::size_t>(std::llround(fraction * double(len)));
  if (zeroed == 0) return out;
  // Partial Fisher-Yates over the index set.
  std::vector<std::size_t> idx(len);
  for (std::size_t i = 0; i < len; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < zeroed; ++i) {
    const std::size_t j = i + rng.below(len - i);
    std::swap(idx[i], idx[j]);
    out.values[idx[i]] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// NoiseSpec
// ---------------------------------------------------------------------------

namespace {

std::string kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::MixRandom: return "mix_random";
    case NoiseKind::PhotonLoss: return "photon_loss";
    case NoiseKind::GaussianConv: return "gaussian_conv";
    case NoiseKind::Affine: return "affine";
    case NoiseKind::AdditiveGaussian: return "additive_gaussian";
    case NoiseKind::Pepper: return "pepper";
  }
  fail(ErrorCode::InvalidArgument, "unknown noise kind");
}

NoiseKind kind_from_name(const std::string& s) {
  if (s == "mix_random") return NoiseKind::MixRandom;
  if (s == "photon_loss") return NoiseKind::PhotonLoss;
  if (s == "gaussian_conv") return NoiseKind::GaussianConv;
  if (s == "affine") return NoiseKind::Affine;
  if (s == "additive_gaussian") return NoiseKind::AdditiveGaussian;
  if (s == "pepper") return NoiseKind::Pepper;
  fail(ErrorCode::ConfigError, "unknown noise kind '" + s + "'");
}

}  // namespace

std::string NoiseSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind);
  switch (kind) {
    case NoiseKind::MixRandom:
      j["sigma"] = sigma;
      j["density"] = density;
      j["seed"] = seed;
      break;
    case NoiseKind::PhotonLoss:
      j["fraction"] = fraction;
      break;
    case NoiseKind::GaussianConv:
      j["n_th"] = n_th;
      break;
    case NoiseKind::Affine:
      j["theta_deg"] = affine.theta_deg;
      j["omega_deg"] = affine.omega_deg;
      j["dx"] = affine.dx;
      j["dy"] = affine.dy;
      j["sx"] = affine.sx;
      j["sy"] = affine.sy;
      j["flip_h"] = affine.flip_h;
      j["flip_v"] = affine.flip_v;
      j["seed"] = seed;
      break;
    case NoiseKind::AdditiveGaussian:
      j["sigma_g"] = sigma_g;
      j["seed"] = seed;
      break;
    case NoiseKind::Pepper:
      j["fraction"] = fraction;
      j["seed"] = seed;
      break;
  }
  return j.dump();
}

NoiseSpec NoiseSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad NoiseSpec JSON: ") + e.what());
  }
  NoiseSpec s;
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.sigma = j.value("sigma", 0.0);
  s.density = j.value("density", 0.8);
  s.fraction = j.value("fraction", 0.0);
  s.n_th = j.value("n_th", 0.0);
  s.sigma_g = j.value("sigma_g", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  s.affine.theta_deg = j.value("theta_deg", 0.0);
  s.affine.omega_deg = j.value("omega_deg", 0.0);
  s.affine.dx = j.value("dx", 0.0);
  s.affine.dy = j.value("dy", 0.0);
  s.affine.sx = j.value("sx", 1.0);
  s.affine.sy = j.value("sy", 1.0);
  s.affine.flip_h = j.value("flip_h", false);
  s.affine.flip_v = j.value("flip_v", false);
  return s;
}

}  // namespace qst
