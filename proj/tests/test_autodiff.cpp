#include <doctest.h>

#include <cstdio>

#include "qst/nn/adam.hpp"
#include "qst/nn/checkpoint.hpp"
#include "qst/noise.hpp"
#include "qst/states.hpp"
#include "support/finite_diff.hpp"

using namespace qst;
using namespace qst::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed,
                     double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

void check_layer_gradients(NetworkGraph& g, const Tensor& in, Mode mode,
                           std::size_t stride = 1) {
  const auto report = fd::check_gradients(g, in, mode, 555, 1e-5, stride);
  CHECK(report.max_rel_error < 1e-4);
}

}  // namespace

TEST_CASE("conv shape rules match the reference table") {
  CHECK(conv_out_extent(32, 3, 1, Padding::Valid) == 30);
  CHECK(conv_out_extent(28, 5, 2, Padding::Same) == 14);
  CHECK(conv_out_extent(16, 5, 2, Padding::Same) == 8);
  CHECK(conv_transpose_out_extent(16, 2) == 32);
  CHECK_THROWS_AS(conv_out_extent(2, 5, 1, Padding::Valid), Error);
}

TEST_CASE("dense forward basics") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(4, false));
  g.build({2, 3}, 1);
  const Tensor zero({2, 3});
  const Tensor out = g.forward(zero, Mode::Eval);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("dense gradient w.r.t. weights broadcasts the input") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(3, false));
  g.build({1, 2}, 1);
  Tensor x({1, 2}, {1.5, -2.0});
  g.zero_grads();
  const Tensor y = g.forward(x, Mode::Eval);
  Tensor ones(y.shape);
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  g.backward(ones);
  auto grads = g.layer(0).grads();  // [in, out] row-major
  CHECK(grads[0] == doctest::Approx(1.5));
  CHECK(grads[1] == doctest::Approx(1.5));
  CHECK(grads[2] == doctest::Approx(1.5));
  CHECK(grads[3] == doctest::Approx(-2.0));
}

TEST_CASE("leaky relu and softmax forward") {
  LeakyReLU lrelu(0.3);
  Tensor x({1, 2}, {-1.0, 2.0});
  const Tensor y = lrelu.forward(x, Mode::Eval, nullptr);
  CHECK(y.data[0] == doctest::Approx(-0.3));
  CHECK(y.data[1] == doctest::Approx(2.0));

  Softmax sm;
  Tensor zeros({1, 7});
  const Tensor p = sm.forward(zeros, Mode::Eval, nullptr);
  for (double v : p.data) CHECK(v == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("softmax is invariant under constant logit shifts") {
  Softmax sm;
  const Tensor x = random_tensor({1, 7}, 3);
  Tensor shifted = x;
  for (auto& v : shifted.data) v += 11.5;
  const Tensor a = sm.forward(x, Mode::Eval, nullptr);
  const Tensor b = sm.forward(shifted, Mode::Eval, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-8));
}

TEST_CASE("finite differences: dense with bias") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(5, true));
  g.build({2, 4}, 7);
  check_layer_gradients(g, random_tensor({2, 4}, 8), Mode::Eval);
}

TEST_CASE("finite differences: conv2d valid stride 1") {
  NetworkGraph g;
  g.add(std::make_unique<Conv2D>(3, 3, 1, Padding::Valid));
  g.build({1, 6, 6, 2}, 9);
  check_layer_gradients(g, random_tensor({1, 6, 6, 2}, 10), Mode::Eval);
}

TEST_CASE("finite differences: conv2d same stride 2 with bias") {
  NetworkGraph g;
  g.add(std::make_unique<Conv2D>(4, 5, 2, Padding::Same, true));
  g.build({1, 7, 7, 2}, 11);
  check_layer_gradients(g, random_tensor({1, 7, 7, 2}, 12), Mode::Eval);
}

TEST_CASE("finite differences: conv2d_transpose stride 2 and stride 1") {
  NetworkGraph g;
  g.add(std::make_unique<Conv2DTranspose>(3, 4, 2));
  g.build({1, 4, 4, 2}, 13);
  CHECK(g.output_shape() == std::vector<int>{1, 8, 8, 3});
  check_layer_gradients(g, random_tensor({1, 4, 4, 2}, 14), Mode::Eval);

  NetworkGraph g2;
  g2.add(std::make_unique<Conv2DTranspose>(2, 4, 1));
  g2.build({1, 5, 5, 3}, 15);
  CHECK(g2.output_shape() == std::vector<int>{1, 5, 5, 2});
  check_layer_gradients(g2, random_tensor({1, 5, 5, 3}, 16), Mode::Eval);
}

TEST_CASE("finite differences: instance norm") {
  NetworkGraph g;
  g.add(std::make_unique<InstanceNorm>());
  g.build({2, 4, 4, 3}, 17);
  check_layer_gradients(g, random_tensor({2, 4, 4, 3}, 18), Mode::Eval);
}

TEST_CASE("finite differences: pointwise and shape layers") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(12, true));
  g.add(std::make_unique<LeakyReLU>(0.3));
  g.add(std::make_unique<Reshape>(std::vector<int>{2, 3, 2}));
  g.add(std::make_unique<Flatten>());
  g.add(std::make_unique<Softmax>());
  g.build({1, 5}, 19);
  check_layer_gradients(g, random_tensor({1, 5}, 20), Mode::Eval);
}

TEST_CASE("finite differences: dropout and gaussian noise with fixed seeds") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(8, true));
  g.add(std::make_unique<Dropout>(0.4));
  g.add(std::make_unique<GaussianNoiseLayer>(0.1));
  g.build({1, 6}, 21);
  check_layer_gradients(g, random_tensor({1, 6}, 22), Mode::Train);
}

TEST_CASE("finite differences: concat and unit-max normalize") {
  NetworkGraph g;
  std::vector<double> fixed = {0.3, -0.7, 1.2};
  g.add(std::make_unique<Concat>(fixed));
  g.add(std::make_unique<Dense>(6, true));
  g.add(std::make_unique<LeakyReLU>(0.3));
  g.build({1, 4}, 23);
  check_layer_gradients(g, random_tensor({1, 4}, 24), Mode::Eval);

  NetworkGraph n;
  n.add(std::make_unique<UnitMaxNormalize>());
  n.build({1, 6}, 25);
  Tensor pos({1, 6}, {0.2, 0.9, 0.1, 0.4, 0.8, 0.3});
  check_layer_gradients(n, pos, Mode::Eval);
}

TEST_CASE("finite differences: gaussian conv layer") {
  NetworkGraph g;
  g.add(std::make_unique<GaussianConvLayer>(5, 5, 0.5, 1.0));
  g.build({1, 25}, 26);
  check_layer_gradients(g, random_tensor({1, 25}, 27), Mode::Eval);
}

TEST_CASE("gaussian conv layer on a delta image reproduces the kernel") {
  const double spacing = 0.5, n_th = 0.8;
  GaussianConvLayer layer(7, 7, spacing, n_th);
  Tensor delta({1, 49});
  delta.data[3 * 7 + 3] = 1.0;
  const Tensor out = layer.forward(delta, Mode::Eval, nullptr);
  int k = 0;
  const auto kernel = gaussian_kernel(spacing, n_th, &k);
  const int radius = k / 2;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const double expected =
          kernel[(y - 3 + radius) * k + (x - 3 + radius)];
      CHECK(out.data[y * 7 + x] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("finite differences: density matrix + expectation composition") {
  const int n = 6;
  auto grid = make_square_grid(-2, 2, 3, 3);
  auto ops = std::make_shared<MeasurementSet>(
      build_operators(grid, MeasurementKind::HusimiProjector, n));
  NetworkGraph g;
  g.add(std::make_unique<DensityMatrixLayer>());
  g.add(std::make_unique<ExpectationLayer>(ops));
  g.build({1, n, n, 2}, 29);
  check_layer_gradients(g, random_tensor({1, n, n, 2}, 30), Mode::Eval);
}

TEST_CASE("finite differences: displaced-parity expectation") {
  const int n = 4;
  PhaseGrid pts;
  pts.layout = PhaseGrid::Layout::Scatter;
  pts.points = {cxd(0.2, -0.4), cxd(0.0, 0.0)};
  auto ops = std::make_shared<MeasurementSet>(
      build_operators(pts, MeasurementKind::DisplacedParity, n));
  NetworkGraph g;
  g.add(std::make_unique<DensityMatrixLayer>());
  g.add(std::make_unique<ExpectationLayer>(ops));
  g.build({1, n, n, 2}, 31);
  check_layer_gradients(g, random_tensor({1, n, n, 2}, 32), Mode::Eval);
}

TEST_CASE("density matrix layer basics") {
  DensityMatrixLayer layer;
  const int n = 4;
  Tensor raw({1, n, n, 2});
  for (int i = 0; i < n; ++i) raw.data[(std::size_t(i) * n + i) * 2] = 1.0;
  const Tensor out = layer.forward(raw, Mode::Eval, nullptr);
  for (int i = 0; i < n; ++i)
    CHECK(out.data[(std::size_t(i) * n + i) * 2] ==
          doctest::Approx(0.25).epsilon(1e-9));

  // scale invariance
  Tensor tripled = raw;
  for (auto& v : tripled.data) v *= 3.0;
  const Tensor out2 = layer.forward(tripled, Mode::Eval, nullptr);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(out2.data[i]).epsilon(1e-9));
}

TEST_CASE("density matrix layer output is always physical") {
  DensityMatrixLayer layer;
  Rng rng(40);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = trial % 3 == 0 ? 4 : (trial % 3 == 1 ? 8 : 16);
    Tensor raw({1, n, n, 2});
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (auto& v : raw.data) v = scale * rng.normal();
    layer.forward(raw, Mode::Eval, nullptr);
    const CMatrix& rho = layer.rho();
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-9);
    CHECK(is_hermitian(rho, 1e-10));
    if (trial % 100 == 0) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("expectation layer against the measurement module") {
  const int n = 8;
  const auto grid = make_square_grid(-3, 3, 4, 4);
  auto ops = std::make_shared<MeasurementSet>(
      build_operators(grid, MeasurementKind::GeneralizedQ, n, 0));
  ExpectationLayer layer(ops);
  const auto rho = make_coherent(cxd(0.8, -0.3), n);
  Tensor chan({1, n, n, 2});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      chan.data[(std::size_t(r) * n + c) * 2] = rho.matrix()(r, c).real();
      chan.data[(std::size_t(r) * n + c) * 2 + 1] = rho.matrix()(r, c).imag();
    }
  const Tensor out = layer.forward(chan, Mode::Eval, nullptr);
  const auto direct = generalized_q(rho, grid, 0);
  for (int i = 0; i < grid.size(); ++i)
    CHECK(std::abs(out.data[i] - direct.values[i]) < 1e-10);
}

TEST_CASE("expectation of the identity has vanishing raw gradient") {
  const int n = 4;
  auto ops = std::make_shared<MeasurementSet>();
  ops->kind = MeasurementKind::GeneralizedQ;
  ops->cutoff = n;
  ops->grid.layout = PhaseGrid::Layout::Scatter;
  ops->grid.points = {cxd(0, 0)};
  ops->operators = {CMatrix::Identity(n, n)};

  NetworkGraph g;
  g.add(std::make_unique<DensityMatrixLayer>());
  g.add(std::make_unique<ExpectationLayer>(ops));
  g.build({1, n, n, 2}, 41);
  const Tensor raw = random_tensor({1, n, n, 2}, 42);
  g.zero_grads();
  const Tensor out = g.forward(raw, Mode::Eval);
  CHECK(out.data[0] == doctest::Approx(1.0).epsilon(1e-9));
  Tensor ones({1, 1}, {1.0});
  const Tensor grad = g.backward(ones);
  for (double v : grad.data) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("density layer rejects wrong shapes naming the layer") {
  NetworkGraph g;
  g.add(std::make_unique<DensityMatrixLayer>());
  try {
    g.build({1, 4, 5, 2}, 1);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("density_matrix") != std::string::npos);
  }
}

TEST_CASE("dropout statistics and eval identity") {
  Dropout drop(0.4);
  Tensor ones({1, 100000});
  std::fill(ones.data.begin(), ones.data.end(), 1.0);

  const Tensor eval_out = drop.forward(ones, Mode::Eval, nullptr);
  CHECK(eval_out.data == ones.data);

  Rng rng(50);
  const Tensor train_out = drop.forward(ones, Mode::Train, &rng);
  std::size_t kept = 0;
  for (double v : train_out.data) {
    if (v != 0.0) {
      CHECK(v == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
      ++kept;
    }
  }
  CHECK(double(kept) / ones.size() == doctest::Approx(0.6).epsilon(0.01 / 0.6));
}

TEST_CASE("instance norm output is standardized before scale and shift") {
  InstanceNorm norm;
  NetworkGraph g;
  g.add(std::make_unique<InstanceNorm>());
  g.build({1, 16, 16, 2}, 60);
  const Tensor in = random_tensor({1, 16, 16, 2}, 61, 3.0);
  const Tensor out = g.forward(in, Mode::Eval);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 256; ++i) mean += out.data[std::size_t(i) * 2 + c];
    mean /= 256;
    for (int i = 0; i < 256; ++i) {
      const double d = out.data[std::size_t(i) * 2 + c] - mean;
      var += d * d;
    }
    var /= 256;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("adam basics") {
  Adam adam;
  CHECK(adam.learning_rate(0) == doctest::Approx(0.0002));
  CHECK(adam.learning_rate(1000) == doctest::Approx(0.000192));

  // zero gradient leaves parameters unchanged
  NetworkGraph g;
  g.add(std::make_unique<Dense>(3, true));
  g.build({1, 2}, 70);
  std::vector<double> before;
  g.copy_params_to(before);
  g.zero_grads();
  adam.step(g);
  std::vector<double> after;
  g.copy_params_to(after);
  CHECK(before == after);
}

TEST_CASE("adam minimizes a quadratic bowl") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(1, false));
  g.build({1, 1}, 71);
  g.set_params({1.0});  // f(w) = w^2 via input x = 1, loss = y^2
  AdamConfig cfg;
  cfg.lr0 = 0.01;
  cfg.decay = 0.9;
  cfg.decay_steps = 50;
  Adam adam(cfg);
  Tensor x({1, 1}, {1.0});
  for (int i = 0; i < 2000; ++i) {
    g.zero_grads();
    const Tensor y = g.forward(x, Mode::Eval);
    Tensor grad({1, 1}, {2.0 * y.data[0]});
    g.backward(grad);
    adam.step(g);
  }
  std::vector<double> w;
  g.copy_params_to(w);
  CHECK(std::abs(w[0]) < 1e-3);
}

TEST_CASE("adam aborts on NaN gradients") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(1, false));
  g.build({1, 1}, 72);
  g.zero_grads();
  const Tensor y = g.forward(Tensor({1, 1}, {1.0}), Mode::Eval);
  Tensor bad({1, 1}, {std::nan("")});
  g.backward(bad);
  Adam adam;
  CHECK_THROWS_AS(adam.step(g), Error);
}

TEST_CASE("checkpoint round-trip is bit exact and validates architecture") {
  NetworkGraph g;
  g.add(std::make_unique<Dense>(6, true));
  g.add(std::make_unique<LeakyReLU>(0.3));
  g.add(std::make_unique<Dense>(3, true));
  g.build({1, 4}, 80);
  const std::string path = "/tmp/qst_test_ckpt.bin";
  save_checkpoint(path, g);

  NetworkGraph same;
  same.add(std::make_unique<Dense>(6, true));
  same.add(std::make_unique<LeakyReLU>(0.3));
  same.add(std::make_unique<Dense>(3, true));
  same.build({1, 4}, 81);  // different init
  load_checkpoint(path, same);
  std::vector<double> a, b;
  g.copy_params_to(a);
  same.copy_params_to(b);
  CHECK(a == b);

  NetworkGraph other;
  other.add(std::make_unique<Dense>(7, true));
  other.build({1, 4}, 82);
  CHECK_THROWS_AS(load_checkpoint(path, other), Error);
  std::remove(path.c_str());
}
