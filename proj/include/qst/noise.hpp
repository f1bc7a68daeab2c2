#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qst/fock.hpp"
#include "qst/measure.hpp"

// The six corruption channels: two act on states, four on data arrays.
// Every stochastic channel takes its seed explicitly.

namespace qst {

enum class NoiseKind {
  MixRandom,
  PhotonLoss,
  GaussianConv,
  Affine,
  AdditiveGaussian,
  Pepper,
};

struct AffineParams {
  double theta_deg = 0.0;   // rotation
  double omega_deg = 0.0;   // shear
  double dx = 0.0;          // shift, pixels
  double dy = 0.0;
  double sx = 1.0;          // zoom
  double sy = 1.0;
  bool flip_h = false;
  bool flip_v = false;
};

/// Parameters of one channel application; serialized into manifests so every
/// stochastic record carries its seed.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::AdditiveGaussian;
  double sigma = 0.0;       // MixRandom weight, in [0, 0.5]
  double density = 0.8;     // MixRandom random-state density
  double fraction = 0.0;    // PhotonLoss / Pepper
  double n_th = 0.0;        // GaussianConv
  double sigma_g = 0.0;     // AdditiveGaussian
  AffineParams affine;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static NoiseSpec from_json(const std::string& text);
};

// rho_mixed = (1 - sigma) rho + sigma rho_random
DensityMatrix mix_random(const DensityMatrix& rho, double sigma,
                         double density, std::uint64_t seed);

// Amplitude-damping channel with eta = 1 - loss_fraction; mean photon
// number scales exactly by eta.
DensityMatrix photon_loss(const DensityMatrix& rho, double loss_fraction);

// Discrete convolution with the sampled thermal kernel
// P(beta) = exp(-|beta|^2 / n_th) / (pi n_th), renormalized to unit discrete
// mass, zero padded. Sub-pixel kernels (n_th < spacing^2 / 2) degenerate to
// the identity.
DataVector gaussian_convolve(const DataVector& data, const PhaseGrid& grid,
                             double n_th);

// Same-size variant on a raw image buffer (used by the network layer).
std::vector<double> gaussian_convolve_image(const std::vector<double>& image,
                                            int h, int w, double spacing,
                                            double n_th);
// The sampled, renormalized kernel itself (odd extent, centered).
std::vector<double> gaussian_kernel(double spacing, double n_th, int* size);

// Inverse-mapped bilinear resampling about the image center, zero fill.
std::vector<double> affine_augment(const std::vector<double>& image, int h,
                                   int w, const AffineParams& params);

// Parameters drawn from the augmentation ranges: theta in [0,180] deg,
// shear in [0,5] deg, shifts up to 20% of the image, zoom in [0.8,1.2],
// and independent horizontal/vertical flips.
AffineParams sample_affine_params(int h, int w, Rng& rng);

DataVector additive_gaussian(const DataVector& data, double sigma_g,
                             std::uint64_t seed);

// Zeroes exactly round(fraction * len) distinct positions.
DataVector pepper(const DataVector& data, double fraction, std::uint64_t seed);

}  // namespace qst
