#pragma once

#include <memory>
#include <optional>

#include "qst/nn/adam.hpp"
#include "qst/states.hpp"

namespace qst {

/// Data plus the measurement description it came from. Known noise, when
/// present, is appended to the generator as a fixed layer.
struct ReconstructionProblem {
  DataVector data;  // aligned with ops; unit-max normalized by convention
  std::shared_ptr<const MeasurementSet> ops;
  int cutoff = 0;
  std::optional<double> known_noise_sigma;  // additive Gaussian, per step
  std::optional<double> known_conv_nth;     // fixed thermal convolution

  void validate() const;
};

ReconstructionProblem make_problem(const DensityMatrix& rho,
                                   std::shared_ptr<const MeasurementSet> ops);

enum class FitLoss { L1, L2, CrossEntropy, KL };
FitLoss fit_loss_from_name(const std::string& name);
std::string fit_loss_name(FitLoss loss);

struct FitReport {
  std::vector<double> fidelity_trace;  // filled when a true state is given
  std::vector<double> loss_trace;
  std::vector<double> disc_loss_trace;  // QST-CGAN only
  int iterations = 0;
  std::string stop_reason;  // "converged" or "max_iters"
  bool disc_saturated = false;
  bool probability_floor_hit = false;  // iMLE floored a tiny p_i
  std::optional<DensityMatrix> state;

  // First iteration whose fidelity reaches `threshold`, or -1.
  int iterations_to_fidelity(double threshold) const;
  std::string to_json() const;
};

/// Sliding stop rule: means of consecutive 100-iteration windows; stop once
/// the last five window means all sit within the tolerance of each other.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(int window = 100, int windows_needed = 5,
                              double tol = 1e-5)
      : window_(window), needed_(windows_needed), tol_(tol) {}

  bool push(double value);
  int consumed() const { return count_; }

 private:
  int window_, needed_;
  double tol_;
  int count_ = 0;
  double accum_ = 0.0;
  std::vector<double> means_;
};

// Fixed-point likelihood iteration rho <- N[R rho R], R = sum (d_i/p_i) O_i.
FitReport imle(const ReconstructionProblem& problem, int max_iters,
               double tol = 1e-5,
               const std::optional<DensityMatrix>& true_state = std::nullopt);

// Optimizer settings for the raw-tensor fit. The long-memory second moment
// is what lets the quadratic losses traverse the nearly flat data-fit
// valley of the Cholesky parameterization.
inline nn::AdamConfig cholesky_default_adam() {
  nn::AdamConfig a;
  a.lr0 = 0.01;
  a.beta1 = 0.5;
  a.beta2 = 0.99;
  a.schedule = false;
  return a;
}

// Direct Cholesky parameterization trained by Adam under a standard loss:
// raw [N,N,2] tensor -> density matrix -> expectations (-> known noise)
// -> unit-max normalization -> loss against the data.
FitReport cholesky_fit(const ReconstructionProblem& problem, FitLoss loss,
                       int max_iters,
                       const nn::AdamConfig& adam = cholesky_default_adam(),
                       std::uint64_t seed = 0,
                       const std::optional<DensityMatrix>& true_state =
                           std::nullopt,
                       double tol = 1e-5);

// Generator of the adversarial reconstructor: dense from the data vector,
// reshape to (cutoff/2, cutoff/2, 2), transpose-convolution stack to
// (cutoff, cutoff, 2), density-matrix and expectation layers, optional
// known-noise tail, unit-max normalization.
nn::NetworkGraph build_generator(const ReconstructionProblem& problem,
                                 std::uint64_t seed);

// Discriminator: concatenation of the data with the compared statistics,
// dense 128, 128, 64, 64 with LeakyReLU between; the last layer is linear
// and the similarity score is the mean elementwise sigmoid of its outputs.
nn::NetworkGraph build_discriminator(int n_ops, std::uint64_t seed);

struct CganConfig {
  double lambda_l1 = 1.0;
  double lambda_gp = 10.0;
  nn::AdamConfig adam{};  // generator optimizer
  // The discriminator keeps its own moments; the adversarial game is
  // unstable when the critic carries heavy momentum.
  nn::AdamConfig disc_adam{};
  std::uint64_t seed = 0;
  // discriminator updates per generator update
  int disc_steps = 1;
  // evaluate the gradient penalty on a random interpolate of the real and
  // fake pairs instead of the fake pair
  bool gp_interpolate = false;
};

FitReport qst_cgan_fit(const ReconstructionProblem& problem,
                       const CganConfig& cfg, int max_iters,
                       const std::optional<DensityMatrix>& true_state =
                           std::nullopt,
                       double tol = 1e-5);

// The four standard losses and their gradients w.r.t. the prediction.
double reconstruction_loss(FitLoss kind, const std::vector<double>& data,
                           const std::vector<double>& pred,
                           std::vector<double>* grad = nullptr);

// Similarity score of a built discriminator on (data, compared).
double discriminator_score(nn::NetworkGraph& disc,
                           const std::vector<double>& compared);

// Accumulates lambda_gp * d/dtheta (||grad_x score||_2 - 1)^2 into the
// discriminator's gradient buffers; returns the weighted penalty value.
// x is the full concatenated input.
double discriminator_gradient_penalty(nn::NetworkGraph& disc,
                                      const std::vector<double>& x,
                                      double lambda_gp);

}  // namespace qst
