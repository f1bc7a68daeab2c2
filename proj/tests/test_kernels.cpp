#include <doctest.h>

#include <vector>

#include "qst/kernels.hpp"

using namespace qst;
using namespace qst::kernels;

namespace {

std::vector<double> random_buffer(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("conv2d forward: OpenMP output is identical to the serial reference") {
  Rng rng(21);
  for (int stride : {1, 2}) {
    ConvShape s;
    s.in_h = 13;
    s.in_w = 17;
    s.in_c = 3;
    s.kernel = 4;
    s.stride = stride;
    s.pad_top = 1;
    s.pad_left = 2;
    s.out_h = (s.in_h + 2 * s.pad_top - s.kernel) / stride + 1;
    s.out_w = (s.in_w + 2 * s.pad_left - s.kernel) / stride + 1;
    s.out_c = 5;
    const auto in = random_buffer(std::size_t(s.in_h) * s.in_w * s.in_c, rng);
    const auto w = random_buffer(
        std::size_t(s.kernel) * s.kernel * s.in_c * s.out_c, rng);
    std::vector<double> serial(std::size_t(s.out_h) * s.out_w * s.out_c);
    std::vector<double> omp(serial.size());
    conv2d_forward_serial(in.data(), w.data(), serial.data(), s);
    conv2d_forward_omp(in.data(), w.data(), omp.data(), s);
    CHECK(serial == omp);
  }
}

TEST_CASE("conv2d gradients: OpenMP matches serial bit for bit") {
  Rng rng(22);
  ConvShape s;
  s.in_h = 11;
  s.in_w = 9;
  s.in_c = 4;
  s.kernel = 3;
  s.stride = 2;
  s.pad_top = 1;
  s.pad_left = 1;
  s.out_h = (s.in_h + 2 * s.pad_top - s.kernel) / s.stride + 1;
  s.out_w = (s.in_w + 2 * s.pad_left - s.kernel) / s.stride + 1;
  s.out_c = 6;
  const auto in = random_buffer(std::size_t(s.in_h) * s.in_w * s.in_c, rng);
  const auto w =
      random_buffer(std::size_t(s.kernel) * s.kernel * s.in_c * s.out_c, rng);
  const auto gout =
      random_buffer(std::size_t(s.out_h) * s.out_w * s.out_c, rng);

  std::vector<double> gin_a(in.size()), gin_b(in.size());
  conv2d_input_grad_serial(gout.data(), w.data(), gin_a.data(), s);
  conv2d_input_grad_omp(gout.data(), w.data(), gin_b.data(), s);
  CHECK(gin_a == gin_b);

  std::vector<double> gw_a(w.size(), 0.0), gw_b(w.size(), 0.0);
  conv2d_weight_grad_serial(in.data(), gout.data(), gw_a.data(), s);
  conv2d_weight_grad_omp(in.data(), gout.data(), gw_b.data(), s);
  CHECK(gw_a == gw_b);
}

TEST_CASE("conv2d forward agrees with a direct dot-product evaluation") {
  Rng rng(23);
  ConvShape s;
  s.in_h = 6;
  s.in_w = 6;
  s.in_c = 2;
  s.kernel = 3;
  s.stride = 1;
  s.pad_top = 0;
  s.pad_left = 0;
  s.out_h = 4;
  s.out_w = 4;
  s.out_c = 3;
  const auto in = random_buffer(std::size_t(s.in_h) * s.in_w * s.in_c, rng);
  const auto w =
      random_buffer(std::size_t(s.kernel) * s.kernel * s.in_c * s.out_c, rng);
  std::vector<double> out(std::size_t(s.out_h) * s.out_w * s.out_c);
  conv2d_forward(in.data(), w.data(), out.data(), s, Mode::Serial);

  for (int oy = 0; oy < s.out_h; ++oy)
    for (int ox = 0; ox < s.out_w; ++ox)
      for (int oc = 0; oc < s.out_c; ++oc) {
        double acc = 0.0;
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            for (int ic = 0; ic < 2; ++ic)
              acc += in[((oy + ky) * s.in_w + (ox + kx)) * s.in_c + ic] *
                     w[((ky * 3 + kx) * s.in_c + ic) * s.out_c + oc];
        CHECK(out[(oy * s.out_w + ox) * s.out_c + oc] ==
              doctest::Approx(acc).epsilon(1e-14));
      }
}

TEST_CASE("image convolution modes agree") {
  Rng rng(24);
  const int h = 33, w = 29, k = 9;
  const auto img = random_buffer(std::size_t(h) * w, rng);
  const auto kernel = random_buffer(std::size_t(k) * k, rng);
  std::vector<double> a(img.size()), b(img.size());
  image_convolve_serial(img.data(), h, w, kernel.data(), k, k, a.data());
  image_convolve_omp(img.data(), h, w, kernel.data(), k, k, b.data());
  CHECK(a == b);
}

TEST_CASE("rank-1 batch kernels agree across modes") {
  Rng rng(25);
  const int dim = 16, n = 40;
  CMatrix rho = CMatrix::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    rho(r, r) = rng.normal();
    for (int c = 0; c < r; ++c) rho(r, c) = cxd(rng.normal(), rng.normal());
  }
  rho = (rho.adjoint() * rho).eval();
  rho /= rho.trace().real();
  CMatrix cols(dim, n);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < dim; ++r) cols(r, i) = cxd(rng.normal(), rng.normal());

  std::vector<double> ea(n), eb(n);
  expect_rank1_batch_serial(rho, cols, 0.5, ea.data());
  expect_rank1_batch_omp(rho, cols, 0.5, eb.data());
  CHECK(ea == eb);

  std::vector<double> weights(n);
  for (auto& v : weights) v = rng.normal();
  CMatrix ga, gb;
  rank1_weighted_sum_serial(cols, weights.data(), 2.0, ga);
  rank1_weighted_sum_omp(cols, weights.data(), 2.0, gb);
  CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);

  // adjoint consistency: sum_i w_i * (u_i^H rho u_i) == tr(rho * G^H)
  double lhs = 0.0;
  for (int i = 0; i < n; ++i) lhs += weights[i] * 2.0 * ea[i] / 0.5;
  const double rhs = (rho * ga.adjoint()).trace().real();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
