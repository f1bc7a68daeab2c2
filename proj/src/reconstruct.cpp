#include "qst/reconstruct.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qst/kernels.hpp"

namespace qst {

using nn::Mode;
using nn::Tensor;

namespace {

// Trainable raw tensor: ignores its input and emits its parameters.
class ParamTensorLayer : public nn::Layer {
 public:
  explicit ParamTensorLayer(std::vector<int> inner) : inner_(std::move(inner)) {}
  std::string name() const override { return "param_tensor"; }
  std::vector<int> out_shape(const std::vector<int>&) const override {
    std::vector<int> s = {1};
    s.insert(s.end(), inner_.begin(), inner_.end());
    return s;
  }
  void build(const std::vector<int>&, Rng& rng) override {
    const std::size_t n = Tensor::numel(inner_);
    p_.resize(n);
    g_.assign(n, 0.0);
    const double limit = std::sqrt(3.0 / std::sqrt(double(n)));
    for (auto& v : p_) v = rng.uniform(-limit, limit);
  }
  Tensor forward(const Tensor&, Mode, Rng*) override {
    return Tensor(out_shape({}), p_);
  }
  Tensor backward(const Tensor& grad_out) override {
    for (std::size_t i = 0; i < g_.size(); ++i) g_[i] += grad_out.data[i];
    return Tensor({1, 1});
  }
  std::span<double> params() override { return {p_.data(), p_.size()}; }
  std::span<double> grads() override { return {g_.data(), g_.size()}; }

 private:
  std::vector<int> inner_;
  std::vector<double> p_, g_;
};

double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

}  // namespace

double reconstruction_loss(FitLoss kind, const std::vector<double>& data,
                           const std::vector<double>& pred,
                           std::vector<double>* grad) {
  const std::size_t q = data.size();
  if (grad) grad->assign(q, 0.0);
  switch (kind) {
    case FitLoss::L1: {
      double loss = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        loss += std::abs(pred[i] - data[i]);
        if (grad) (*grad)[i] = (pred[i] >= data[i] ? 1.0 : -1.0) / double(q);
      }
      return loss / double(q);
    }
    case FitLoss::L2: {
      double loss = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        const double d = pred[i] - data[i];
        loss += d * d;
        if (grad) (*grad)[i] = 2.0 * d / double(q);
      }
      return loss / double(q);
    }
    case FitLoss::CrossEntropy:
    case FitLoss::KL: {
      // Both compare sum-normalized distributions (negative data entries
      // clipped at zero, predictions floored at 1e-12):
      //   CE = -sum p_i log q_i,   KL = sum p_i log(p_i / q_i).
      // They differ by the data entropy and share one gradient.
      double ds = 0.0, ps = 0.0;
      std::vector<double> dpos(q), ppos(q);
      for (std::size_t i = 0; i < q; ++i) {
        dpos[i] = std::max(data[i], 0.0);
        ppos[i] = std::max(pred[i], 1e-12);
        ds += dpos[i];
        ps += ppos[i];
      }
      require(ds > 0.0, ErrorCode::DegenerateNormalization,
              "cross-entropy/KL need nonnegative data mass");
      double loss = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        const double p = dpos[i] / ds;
        const double qq = ppos[i] / ps;
        if (p > 0.0) {
          loss -= p * std::log(qq);
          if (kind == FitLoss::KL) loss += p * std::log(std::max(p, 1e-300));
        }
        if (grad && pred[i] > 1e-12)
          (*grad)[i] = (1.0 - p / qq) / ps;
      }
      return loss;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown loss");
}

void ReconstructionProblem::validate() const {
  require(ops != nullptr, ErrorCode::InvalidArgument, "missing operators");
  require(data.size() == ops->size(), ErrorCode::DimensionMismatch,
          "data length must equal the operator count");
  require(cutoff == ops->cutoff, ErrorCode::DimensionMismatch,
          "problem cutoff differs from the measurement set");
  if (known_conv_nth)
    require(ops->grid.layout == PhaseGrid::Layout::Square,
            ErrorCode::InvalidArgument,
            "convolution noise needs a square grid");
}

ReconstructionProblem make_problem(const DensityMatrix& rho,
                                   std::shared_ptr<const MeasurementSet> ops) {
  ReconstructionProblem problem;
  DataVector raw;
  raw.values = ops->expect_all(rho);
  problem.data = normalize_unit_max(raw);
  problem.cutoff = ops->cutoff;
  problem.ops = std::move(ops);
  return problem;
}

FitLoss fit_loss_from_name(const std::string& name) {
  if (name == "L1" || name == "l1") return FitLoss::L1;
  if (name == "L2" || name == "l2") return FitLoss::L2;
  if (name == "CE" || name == "ce" || name == "cross-entropy")
    return FitLoss::CrossEntropy;
  if (name == "KL" || name == "kl") return FitLoss::KL;
  fail(ErrorCode::ConfigError, "unknown loss '" + name + "'");
}

std::string fit_loss_name(FitLoss loss) {
  switch (loss) {
    case FitLoss::L1: return "L1";
    case FitLoss::L2: return "L2";
    case FitLoss::CrossEntropy: return "CE";
    case FitLoss::KL: return "KL";
  }
  fail(ErrorCode::InvalidArgument, "unknown loss");
}

int FitReport::iterations_to_fidelity(double threshold) const {
  for (std::size_t i = 0; i < fidelity_trace.size(); ++i)
    if (fidelity_trace[i] >= threshold) return static_cast<int>(i) + 1;
  return -1;
}

std::string FitReport::to_json() const {
  nlohmann::json j;
  j["iterations"] = iterations;
  j["stop_reason"] = stop_reason;
  j["disc_saturated"] = disc_saturated;
  j["probability_floor_hit"] = probability_floor_hit;
  j["fidelity_trace"] = fidelity_trace;
  j["loss_trace"] = loss_trace;
  j["disc_loss_trace"] = disc_loss_trace;
  if (state) j["state"] = nlohmann::json::parse(state->to_json());
  return j.dump();
}

bool ConvergenceMonitor::push(double value) {
  accum_ += value;
  ++count_;
  if (count_ % window_ != 0) return false;
  means_.push_back(accum_ / window_);
  accum_ = 0.0;
  if (static_cast<int>(means_.size()) < needed_) return false;
  for (std::size_t i = means_.size() - needed_ + 1; i < means_.size(); ++i)
    if (std::abs(means_[i] - means_[i - 1]) >= tol_) return false;
  return true;
}

// ---------------------------------------------------------------------------
// iMLE
// ---------------------------------------------------------------------------

FitReport imle(const ReconstructionProblem& problem, int max_iters, double tol,
               const std::optional<DensityMatrix>& true_state) {
  problem.validate();
  const int dim = problem.cutoff;
  const auto& ops = *problem.ops;
  for (double d : problem.data.values)
    require(d >= 0.0, ErrorCode::InvalidArgument,
            "iMLE requires nonnegative data");

  FitReport report;
  CMatrix rho = CMatrix::Identity(dim, dim) / double(dim);
  ConvergenceMonitor monitor(100, 5, tol);
  std::vector<double> p(ops.size());
  std::vector<double> weights(ops.size());

  for (int iter = 0; iter < max_iters; ++iter) {
    kernels::expect_rank1_batch(rho, ops.columns, 1.0, p.data());
    for (int i = 0; i < ops.size(); ++i) {
      double pi = p[i];
      if (pi < 1e-12) {
        if (problem.data.values[i] > 0.0) report.probability_floor_hit = true;
        pi = 1e-12;
      }
      weights[i] = problem.data.values[i] / pi;
    }
    CMatrix r;
    kernels::rank1_weighted_sum(ops.columns, weights.data(), 1.0, r);
    CMatrix next = r * rho * r;
    next = 0.5 * (next + next.adjoint());
    const double tr = next.trace().real();
    require(tr > 1e-300, ErrorCode::NumericalFailure,
            "iMLE iterate lost all trace");
    rho = next / tr;

    double monitored = 0.0;
    if (true_state) {
      const double f = fidelity(DensityMatrix::trusted(rho), *true_state);
      report.fidelity_trace.push_back(f);
      monitored = f;
    } else {
      std::vector<double> dummy;
      monitored = reconstruction_loss(FitLoss::L2, problem.data.values, p, nullptr);
    }
    report.loss_trace.push_back(
        reconstruction_loss(FitLoss::L2, problem.data.values, p, nullptr));
    report.iterations = iter + 1;
    if (monitor.push(monitored)) {
      report.stop_reason = "converged";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_iters";
  report.state = DensityMatrix::trusted(rho);
  return report;
}

// ---------------------------------------------------------------------------
// Cholesky gradient descent
// ---------------------------------------------------------------------------

namespace {

// Shared tail: expectations -> optional fixed convolution -> unit-max
// normalization -> optional per-step additive noise.
void append_statistics_tail(nn::NetworkGraph& g,
                            const ReconstructionProblem& problem) {
  g.add(std::make_unique<nn::ExpectationLayer>(problem.ops));
  if (problem.known_conv_nth) {
    const auto& grid = problem.ops->grid;
    const double spacing = (grid.hi - grid.lo) / (grid.nx - 1);
    g.add(std::make_unique<nn::GaussianConvLayer>(grid.ny, grid.nx, spacing,
                                                  *problem.known_conv_nth));
  }
  g.add(std::make_unique<nn::UnitMaxNormalize>());
  if (problem.known_noise_sigma)
    g.add(std::make_unique<nn::GaussianNoiseLayer>(*problem.known_noise_sigma));
}

const nn::DensityMatrixLayer& density_layer_of(const nn::NetworkGraph& g) {
  for (int i = 0; i < g.layer_count(); ++i) {
    if (auto* d = dynamic_cast<const nn::DensityMatrixLayer*>(&g.layer(i)))
      return *d;
  }
  fail(ErrorCode::InvalidArgument, "graph has no density-matrix layer");
}

}  // namespace

FitReport cholesky_fit(const ReconstructionProblem& problem, FitLoss loss,
                       int max_iters, const nn::AdamConfig& adam_cfg,
                       std::uint64_t seed,
                       const std::optional<DensityMatrix>& true_state,
                       double tol) {
  problem.validate();
  const int dim = problem.cutoff;

  nn::NetworkGraph g;
  g.add(std::make_unique<ParamTensorLayer>(std::vector<int>{dim, dim, 2}));
  g.add(std::make_unique<nn::DensityMatrixLayer>());
  append_statistics_tail(g, problem);
  g.build({1, 1}, seed);
  const auto& density = density_layer_of(g);

  nn::Adam adam(adam_cfg);
  Rng rng(seed ^ 0x9d5f3a1bULL);
  const Tensor dummy({1, 1});
  FitReport report;
  ConvergenceMonitor monitor(100, 5, tol);

  for (int iter = 0; iter < max_iters; ++iter) {
    g.zero_grads();
    const Tensor pred = g.forward(dummy, Mode::Train, &rng);
    std::vector<double> grad;
    const double value =
        reconstruction_loss(loss, problem.data.values, pred.data, &grad);
    Tensor grad_t({1, static_cast<int>(grad.size())}, grad);
    g.backward(grad_t);
    adam.step(g);

    report.loss_trace.push_back(value);
    double monitored = value;
    if (true_state) {
      const double f =
          fidelity(DensityMatrix::trusted(density.rho()), *true_state);
      report.fidelity_trace.push_back(f);
      monitored = f;
    }
    report.iterations = iter + 1;
    if (monitor.push(monitored)) {
      report.stop_reason = "converged";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_iters";
  report.state = DensityMatrix::trusted(density.rho());
  return report;
}

// ---------------------------------------------------------------------------
// QST-CGAN
// ---------------------------------------------------------------------------

nn::NetworkGraph build_generator(const ReconstructionProblem& problem,
                                 std::uint64_t seed) {
  problem.validate();
  const int cutoff = problem.cutoff;
  require(cutoff >= 4 && cutoff % 2 == 0, ErrorCode::ConfigError,
          "generator cutoff must be even and >= 4 (the stride-2 upsampling "
          "doubles (cutoff/2, cutoff/2) once); pick an even cutoff");
  const int half = cutoff / 2;
  nn::NetworkGraph g;
  g.add(std::make_unique<nn::Dense>(half * half * 2, false));
  g.add(std::make_unique<nn::LeakyReLU>(0.3));
  g.add(std::make_unique<nn::Reshape>(std::vector<int>{half, half, 2}));
  g.add(std::make_unique<nn::Conv2DTranspose>(64, 4, 2));
  g.add(std::make_unique<nn::InstanceNorm>());
  g.add(std::make_unique<nn::LeakyReLU>(0.3));
  g.add(std::make_unique<nn::Conv2DTranspose>(64, 4, 1));
  g.add(std::make_unique<nn::InstanceNorm>());
  g.add(std::make_unique<nn::LeakyReLU>(0.3));
  g.add(std::make_unique<nn::Conv2DTranspose>(32, 4, 1));
  g.add(std::make_unique<nn::LeakyReLU>(0.3));
  g.add(std::make_unique<nn::Conv2DTranspose>(2, 4, 1));
  g.add(std::make_unique<nn::DensityMatrixLayer>());
  append_statistics_tail(g, problem);
  g.build({1, problem.ops->size()}, seed);
  return g;
}

nn::NetworkGraph build_discriminator(int n_ops, std::uint64_t seed) {
  require(n_ops >= 1, ErrorCode::InvalidArgument, "need operators");
  nn::NetworkGraph d;
  d.add(std::make_unique<nn::Concat>(std::vector<double>(n_ops, 0.0)));
  d.add(std::make_unique<nn::Dense>(128, true));
  d.add(std::make_unique<nn::LeakyReLU>(0.3));
  d.add(std::make_unique<nn::Dense>(128, true));
  d.add(std::make_unique<nn::LeakyReLU>(0.3));
  d.add(std::make_unique<nn::Dense>(64, true));
  d.add(std::make_unique<nn::LeakyReLU>(0.3));
  d.add(std::make_unique<nn::Dense>(64, true));
  d.build({1, n_ops}, seed);
  return d;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Mean elementwise sigmoid of the final linear outputs.
double score_from_outputs(const Tensor& out) {
  double s = 0.0;
  for (double v : out.data) s += sigmoid(v);
  return s / double(out.size());
}

// Per-element adversarial penalties, averaged over the patch outputs.
// target_real selects between -mean log sigma(o) and -mean log(1 - sigma(o)).
double patch_loss(const Tensor& out, bool target_real) {
  double loss = 0.0;
  for (double v : out.data) {
    const double s = std::clamp(sigmoid(v), 1e-12, 1.0 - 1e-12);
    loss -= std::log(target_real ? s : 1.0 - s);
  }
  return loss / double(out.size());
}

// d/d outputs of patch_loss (sign folded in), scaled by `weight`.
Tensor patch_loss_grad(const Tensor& out, bool target_real, double weight) {
  Tensor g(out.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = sigmoid(out.data[i]);
    g.data[i] = weight * (target_real ? s - 1.0 : s) / double(out.size());
  }
  return g;
}

using RowVec = Eigen::RowVectorXd;
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// The dense/LeakyReLU stack of the discriminator, viewed directly through
// the graph's parameter storage. Used for the gradient-penalty term, whose
// parameter gradient needs one forward-over-reverse sweep.
struct DenseStack {
  std::vector<nn::Dense*> dense;
  double slope = 0.3;

  static DenseStack from(nn::NetworkGraph& g) {
    DenseStack s;
    for (int i = 0; i < g.layer_count(); ++i) {
      if (auto* d = dynamic_cast<nn::Dense*>(&g.layer(i))) s.dense.push_back(d);
    }
    require(s.dense.size() == 4, ErrorCode::InvalidArgument,
            "discriminator stack expects four dense layers");
    return s;
  }

  Eigen::Map<const RowMat> weight(int l) const {
    return {dense[l]->weight_data(), dense[l]->in_features(),
            dense[l]->units()};
  }
  Eigen::Map<RowMat> weight_grad(int l) const {
    return {dense[l]->weight_grad_data(), dense[l]->in_features(),
            dense[l]->units()};
  }
  Eigen::Map<RowVec> bias_grad(int l) const {
    return {dense[l]->bias_grad_data(), dense[l]->units()};
  }
  Eigen::Map<const RowVec> bias(int l) const {
    return {dense[l]->bias_data(), dense[l]->units()};
  }

  // phi'(x) for LeakyReLU
  RowVec act_grad(const RowVec& pre) const {
    RowVec g(pre.size());
    for (int i = 0; i < pre.size(); ++i) g(i) = pre(i) >= 0.0 ? 1.0 : slope_();
    return g;
  }
  double slope_() const { return slope; }
};

// Accumulates lambda_gp * d/dtheta (||grad_x score(x)||_2 - 1)^2 into the
// dense layers' gradient buffers. Returns the penalty value.
double gradient_penalty(DenseStack& stack, const RowVec& x, double lambda_gp) {
  const int layers = 4;
  std::vector<RowVec> pre(layers);   // o_l
  std::vector<RowVec> act(layers);   // a_l (act[3] unused)
  RowVec a = x;
  for (int l = 0; l < layers; ++l) {
    pre[l] = a * stack.weight(l) + stack.bias(l);
    if (l < layers - 1) {
      act[l] = pre[l].cwiseMax(0.0) + stack.slope * pre[l].cwiseMin(0.0);
      a = act[l];
    }
  }
  const RowVec& o = pre[layers - 1];
  const int m = static_cast<int>(o.size());

  RowVec sig(m), dsig(m), ddsig(m);
  for (int i = 0; i < m; ++i) {
    sig(i) = sigmoid(o(i));
    dsig(i) = sig(i) * (1.0 - sig(i));
    ddsig(i) = dsig(i) * (1.0 - 2.0 * sig(i));
  }
  // gradient of the mean-sigmoid score w.r.t. the input
  RowVec v = dsig / double(m);
  for (int l = layers - 1; l >= 0; --l) {
    v = v * stack.weight(l).transpose();
    if (l > 0) v = v.cwiseProduct(stack.act_grad(pre[l - 1]));
  }
  const RowVec g = v;
  const double norm = g.norm();
  if (norm < 1e-12) return lambda_gp;  // flat spot: constant penalty (= 1)

  const double penalty = (norm - 1.0) * (norm - 1.0);
  const RowVec dir = (2.0 * (norm - 1.0) / norm) * g;

  // tangent forward along `dir`
  std::vector<RowVec> tau(layers);  // pre-activation tangents
  RowVec t = dir;
  for (int l = 0; l < layers; ++l) {
    tau[l] = t * stack.weight(l);
    if (l < layers - 1) t = tau[l].cwiseProduct(stack.act_grad(pre[l]));
  }

  // reverse pass over (primal, tangent) for the parameter gradients
  RowVec o_hat = ddsig.cwiseProduct(tau[layers - 1]) / double(m);
  RowVec tau_hat = dsig / double(m);
  for (int l = layers - 1; l >= 0; --l) {
    const RowVec& a_in = l == 0 ? x : act[l - 1];
    RowVec t_in;
    if (l == 0)
      t_in = dir;
    else
      t_in = tau[l - 1].cwiseProduct(stack.act_grad(pre[l - 1]));
    stack.weight_grad(l) +=
        lambda_gp * (a_in.transpose() * o_hat + t_in.transpose() * tau_hat);
    stack.bias_grad(l) += lambda_gp * o_hat;
    if (l == 0) break;
    RowVec a_hat = o_hat * stack.weight(l).transpose();
    tau_hat = (tau_hat * stack.weight(l).transpose())
                  .cwiseProduct(stack.act_grad(pre[l - 1]));
    o_hat = a_hat.cwiseProduct(stack.act_grad(pre[l - 1]));
  }
  return lambda_gp * penalty;
}

}  // namespace

double discriminator_score(nn::NetworkGraph& disc,
                           const std::vector<double>& compared) {
  Tensor in({1, static_cast<int>(compared.size())}, compared);
  return score_from_outputs(disc.forward(in, Mode::Eval));
}

double discriminator_gradient_penalty(nn::NetworkGraph& disc,
                                      const std::vector<double>& x,
                                      double lambda_gp) {
  DenseStack stack = DenseStack::from(disc);
  RowVec xv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xv(static_cast<int>(i)) = x[i];
  return gradient_penalty(stack, xv, lambda_gp);
}

FitReport qst_cgan_fit(const ReconstructionProblem& problem,
                       const CganConfig& cfg, int max_iters,
                       const std::optional<DensityMatrix>& true_state,
                       double tol) {
  problem.validate();
  const int n = problem.ops->size();
  const std::vector<double>& d = problem.data.values;

  nn::NetworkGraph gen = build_generator(problem, cfg.seed);
  nn::NetworkGraph disc = build_discriminator(n, cfg.seed + 1);
  auto* concat = dynamic_cast<nn::Concat*>(&disc.layer(0));
  concat->set_fixed(d);
  DenseStack stack = DenseStack::from(disc);

  nn::Adam adam_g(cfg.adam), adam_d(cfg.disc_adam);
  Rng rng(cfg.seed ^ 0x51a9b2cdULL);
  Tensor d_tensor({1, n}, d);

  FitReport report;
  ConvergenceMonitor monitor(100, 5, tol);
  const auto& density = density_layer_of(gen);

  for (int iter = 0; iter < max_iters; ++iter) {
    // generator forward (noise layers resample here, once per iteration)
    const Tensor fake = gen.forward(d_tensor, Mode::Train, &rng);

    // --- discriminator step(s) ---
    double real_loss = 0.0, fake_loss = 0.0, gp = 0.0, s_fake = 0.5;
    Tensor real_out, fake_out;
    for (int k = 0; k < std::max(cfg.disc_steps, 1); ++k) {
      disc.zero_grads();
      real_out = disc.forward(d_tensor, Mode::Train, &rng);
      real_loss = patch_loss(real_out, true);
      disc.backward(patch_loss_grad(real_out, true, 1.0));

      fake_out = disc.forward(fake, Mode::Train, &rng);
      fake_loss = patch_loss(fake_out, false);
      s_fake = clamp_prob(score_from_outputs(fake_out));
      disc.backward(patch_loss_grad(fake_out, false, 1.0));
      if (s_fake < 1e-6) report.disc_saturated = true;

      RowVec x(2 * n);
      if (cfg.gp_interpolate) {
        const double eps = rng.uniform();
        for (int i = 0; i < n; ++i) {
          x(i) = d[i];
          x(n + i) = eps * d[i] + (1.0 - eps) * fake.data[i];
        }
      } else {
        for (int i = 0; i < n; ++i) {
          x(i) = d[i];
          x(n + i) = fake.data[i];
        }
      }
      gp = gradient_penalty(stack, x, cfg.lambda_gp);
      adam_d.step(disc);
    }
    report.disc_loss_trace.push_back(real_loss + fake_loss + gp);

    // --- generator step (fresh discriminator weights) ---
    gen.zero_grads();
    disc.zero_grads();
    const Tensor fake_out2 = disc.forward(fake, Mode::Train, &rng);
    const double adv_loss = -patch_loss(fake_out2, false);  // log(1 - D)
    const Tensor d_grad =
        disc.backward(patch_loss_grad(fake_out2, false, -1.0));
    Tensor g_grad = d_grad;  // gradient w.r.t. the generated statistics
    // mean absolute deviation (the 1/q convention of the standard losses);
    // a much heavier data term drowns the adversarial signal and
    // reintroduces the stuck basins of the plain L1 fit
    double l1 = 0.0;
    for (int i = 0; i < n; ++i) {
      l1 += std::abs(fake.data[i] - d[i]);
      g_grad.data[i] +=
          cfg.lambda_l1 * (fake.data[i] >= d[i] ? 1.0 : -1.0) / double(n);
    }
    l1 /= double(n);
    gen.backward(g_grad);
    adam_g.step(gen);

    const double gen_loss = adv_loss + cfg.lambda_l1 * l1;
    report.loss_trace.push_back(gen_loss);

    double monitored = l1;
    if (true_state) {
      const double f =
          fidelity(DensityMatrix::trusted(density.rho()), *true_state);
      report.fidelity_trace.push_back(f);
      monitored = f;
    }
    report.iterations = iter + 1;
    if (std::getenv("QST_DEBUG_CGAN") && iter % 100 == 0) {
      const double s_r = score_from_outputs(real_out);
      std::fprintf(stderr,
                   "[cgan] it=%d sr=%.4f sf=%.4f gp=%.4f adv=%.3e F=%.4f\n",
                   iter, s_r, s_fake, gp,
                   std::sqrt(std::inner_product(d_grad.data.begin(),
                                                d_grad.data.end(),
                                                d_grad.data.begin(), 0.0)),
                   monitored);
    }
    if (monitor.push(monitored)) {
      report.stop_reason = "converged";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_iters";
  report.state = DensityMatrix::trusted(density.rho());
  return report;
}

}  // namespace qst
