#include "qst/nn/layers.hpp"

#include <cmath>

#include "qst/kernels.hpp"
#include "qst/noise.hpp"

namespace qst::nn {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMajor>;
using MapCRM = Eigen::Map<const RowMajor>;

void glorot_uniform(std::span<double> w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w) v = rng.uniform(-limit, limit);
}

[[noreturn]] void shape_fail(const std::string& layer,
                             const std::vector<int>& shape,
                             const std::string& why) {
  fail(ErrorCode::ShapeError,
       layer + ": bad input shape " + shape_string(shape) + " (" + why + ")");
}

void expect_rank(const std::string& layer, const std::vector<int>& shape,
                 std::size_t rank) {
  if (shape.size() != rank)
    shape_fail(layer, shape, "expected rank " + std::to_string(rank));
}

kernels::ConvShape make_conv_shape(int in_h, int in_w, int in_c, int out_c,
                                   int kernel, int stride, Padding padding) {
  kernels::ConvShape s;
  s.in_h = in_h;
  s.in_w = in_w;
  s.in_c = in_c;
  s.out_c = out_c;
  s.kernel = kernel;
  s.stride = stride;
  s.out_h = conv_out_extent(in_h, kernel, stride, padding);
  s.out_w = conv_out_extent(in_w, kernel, stride, padding);
  if (padding == Padding::Same) {
    const int pad_h = std::max((s.out_h - 1) * stride + kernel - in_h, 0);
    const int pad_w = std::max((s.out_w - 1) * stride + kernel - in_w, 0);
    s.pad_top = pad_h / 2;
    s.pad_left = pad_w / 2;
  }
  return s;
}

// Per-image kernel dispatch: small batches parallelize inside the image,
// large batches across it. Both give bit-identical output.
template <typename PerImage>
void for_each_image(int batch, const PerImage& body) {
  if (batch >= kernels::threads() && kernels::mode() == kernels::Mode::OpenMP) {
    kernels::parallel_for(batch,
                          [&](std::size_t b) { body(b, kernels::Mode::Serial); });
  } else {
    for (int b = 0; b < batch; ++b) body(b, kernels::mode());
  }
}

}  // namespace

int conv_out_extent(int in, int kernel, int stride, Padding padding) {
  require(in >= 1 && kernel >= 1 && stride >= 1, ErrorCode::ShapeError,
          "bad convolution geometry");
  int out = 0;
  if (padding == Padding::Valid) {
    out = (in - kernel) / stride + 1;
    require(in >= kernel, ErrorCode::ShapeError,
            "valid padding needs input >= kernel");
  } else {
    out = (in + stride - 1) / stride;
  }
  require(out >= 1, ErrorCode::ShapeError, "convolution output collapsed");
  return out;
}

int conv_transpose_out_extent(int in, int stride) { return in * stride; }

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

std::vector<int> Dense::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 2);
  return {in[0], units_};
}

void Dense::build(const std::vector<int>& in_shape, Rng& rng) {
  expect_rank(name(), in_shape, 2);
  in_ = in_shape[1];
  p_.assign(std::size_t(in_) * units_ + (bias_ ? units_ : 0), 0.0);
  g_.assign(p_.size(), 0.0);
  glorot_uniform({p_.data(), std::size_t(in_) * units_}, in_, units_, rng);
}

Tensor Dense::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 2);
  if (in.shape[1] != in_)
    shape_fail(name(), in.shape, "expected " + std::to_string(in_) + " features");
  cached_in_ = in;
  const int b = in.shape[0];
  Tensor out({b, units_});
  MapCRM x(in.data.data(), b, in_);
  MapCRM w(p_.data(), in_, units_);
  MapRM y(out.data.data(), b, units_);
  y.noalias() = x * w;
  if (bias_) {
    MapCRM bias(bias_data(), 1, units_);
    y.rowwise() += bias.row(0);
  }
  return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const int b = cached_in_.shape[0];
  Tensor grad_in({b, in_});
  MapCRM go(grad_out.data.data(), b, units_);
  MapCRM x(cached_in_.data.data(), b, in_);
  MapCRM w(p_.data(), in_, units_);
  MapRM gi(grad_in.data.data(), b, in_);
  gi.noalias() = go * w.transpose();
  MapRM gw(g_.data(), in_, units_);
  gw.noalias() += x.transpose() * go;
  if (bias_) {
    MapRM gb(bias_grad_data(), 1, units_);
    gb.row(0) += go.colwise().sum();
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Conv2D
// ---------------------------------------------------------------------------

std::vector<int> Conv2D::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 4);
  return {in[0], conv_out_extent(in[1], kernel_, stride_, padding_),
          conv_out_extent(in[2], kernel_, stride_, padding_), filters_};
}

void Conv2D::build(const std::vector<int>& in_shape, Rng& rng) {
  expect_rank(name(), in_shape, 4);
  in_c_ = in_shape[3];
  const std::size_t wn = std::size_t(kernel_) * kernel_ * in_c_ * filters_;
  p_.assign(wn + (bias_ ? filters_ : 0), 0.0);
  g_.assign(p_.size(), 0.0);
  glorot_uniform({p_.data(), wn}, kernel_ * kernel_ * in_c_,
                 kernel_ * kernel_ * filters_, rng);
}

Tensor Conv2D::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 4);
  if (in.shape[3] != in_c_)
    shape_fail(name(), in.shape, "expected " + std::to_string(in_c_) + " channels");
  cached_in_ = in;
  const auto s = make_conv_shape(in.shape[1], in.shape[2], in_c_, filters_,
                                 kernel_, stride_, padding_);
  const int b = in.shape[0];
  Tensor out({b, s.out_h, s.out_w, s.out_c});
  const std::size_t in_sz = std::size_t(s.in_h) * s.in_w * s.in_c;
  const std::size_t out_sz = std::size_t(s.out_h) * s.out_w * s.out_c;
  for_each_image(b, [&](std::size_t img, kernels::Mode m) {
    kernels::conv2d_forward(in.data.data() + img * in_sz, p_.data(),
                            out.data.data() + img * out_sz, s, m);
  });
  if (bias_) {
    const double* bias = p_.data() + std::size_t(kernel_) * kernel_ * in_c_ * filters_;
    for (std::size_t i = 0; i < out.size(); ++i)
      out.data[i] += bias[i % filters_];
  }
  return out;
}

Tensor Conv2D::backward(const Tensor& grad_out) {
  const auto s = make_conv_shape(cached_in_.shape[1], cached_in_.shape[2],
                                 in_c_, filters_, kernel_, stride_, padding_);
  const int b = cached_in_.shape[0];
  Tensor grad_in(cached_in_.shape);
  const std::size_t in_sz = std::size_t(s.in_h) * s.in_w * s.in_c;
  const std::size_t out_sz = std::size_t(s.out_h) * s.out_w * s.out_c;
  for (int img = 0; img < b; ++img) {
    kernels::conv2d_input_grad(grad_out.data.data() + img * out_sz, p_.data(),
                               grad_in.data.data() + img * in_sz, s);
    kernels::conv2d_weight_grad(cached_in_.data.data() + img * in_sz,
                                grad_out.data.data() + img * out_sz, g_.data(),
                                s);
  }
  if (bias_) {
    double* gb = g_.data() + std::size_t(kernel_) * kernel_ * in_c_ * filters_;
    for (std::size_t i = 0; i < grad_out.size(); ++i)
      gb[i % filters_] += grad_out.data[i];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Conv2DTranspose (via the equivalent forward convolution's gradient trio)
// ---------------------------------------------------------------------------

std::vector<int> Conv2DTranspose::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 4);
  return {in[0], conv_transpose_out_extent(in[1], stride_),
          conv_transpose_out_extent(in[2], stride_), filters_};
}

void Conv2DTranspose::build(const std::vector<int>& in_shape, Rng& rng) {
  expect_rank(name(), in_shape, 4);
  require(kernel_ >= stride_, ErrorCode::ShapeError,
          "conv2d_transpose needs kernel >= stride");
  in_c_ = in_shape[3];
  const std::size_t wn = std::size_t(kernel_) * kernel_ * filters_ * in_c_;
  p_.assign(wn, 0.0);
  g_.assign(wn, 0.0);
  glorot_uniform({p_.data(), wn}, kernel_ * kernel_ * in_c_,
                 kernel_ * kernel_ * filters_, rng);
}

Tensor Conv2DTranspose::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 4);
  if (in.shape[3] != in_c_)
    shape_fail(name(), in.shape, "expected " + std::to_string(in_c_) + " channels");
  cached_in_ = in;
  const int oh = conv_transpose_out_extent(in.shape[1], stride_);
  const int ow = conv_transpose_out_extent(in.shape[2], stride_);
  // Equivalent conv maps the transpose OUTPUT (h*s, w*s, filters) back to the
  // transpose INPUT (h, w, in_c); the transpose forward is its input-gradient.
  const auto s = make_conv_shape(oh, ow, filters_, in_c_, kernel_, stride_,
                                 Padding::Same);
  const int b = in.shape[0];
  Tensor out({b, oh, ow, filters_});
  const std::size_t in_sz = in.size() / b;
  const std::size_t out_sz = out.size() / b;
  for_each_image(b, [&](std::size_t img, kernels::Mode m) {
    kernels::conv2d_input_grad(in.data.data() + img * in_sz, p_.data(),
                               out.data.data() + img * out_sz, s, m);
  });
  return out;
}

Tensor Conv2DTranspose::backward(const Tensor& grad_out) {
  const int oh = conv_transpose_out_extent(cached_in_.shape[1], stride_);
  const int ow = conv_transpose_out_extent(cached_in_.shape[2], stride_);
  const auto s = make_conv_shape(oh, ow, filters_, in_c_, kernel_, stride_,
                                 Padding::Same);
  const int b = cached_in_.shape[0];
  Tensor grad_in(cached_in_.shape);
  const std::size_t in_sz = grad_in.size() / b;
  const std::size_t out_sz = grad_out.size() / b;
  for (int img = 0; img < b; ++img) {
    kernels::conv2d_forward(grad_out.data.data() + img * out_sz, p_.data(),
                            grad_in.data.data() + img * in_sz, s);
    kernels::conv2d_weight_grad(grad_out.data.data() + img * out_sz,
                                cached_in_.data.data() + img * in_sz, g_.data(),
                                s);
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// InstanceNorm
// ---------------------------------------------------------------------------

std::vector<int> InstanceNorm::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 4);
  return in;
}

void InstanceNorm::build(const std::vector<int>& in_shape, Rng&) {
  expect_rank(name(), in_shape, 4);
  channels_ = in_shape[3];
  p_.assign(2 * channels_, 0.0);
  std::fill(p_.begin(), p_.begin() + channels_, 1.0);  // scale = 1, shift = 0
  g_.assign(p_.size(), 0.0);
}

Tensor InstanceNorm::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 4);
  if (in.shape[3] != channels_) shape_fail(name(), in.shape, "channel mismatch");
  const int b = in.shape[0], h = in.shape[1], w = in.shape[2];
  const int hw = h * w;
  Tensor out(in.shape);
  cached_xhat_ = Tensor(in.shape);
  cached_sigma_.assign(std::size_t(b) * channels_, 0.0);
  for (int img = 0; img < b; ++img) {
    for (int c = 0; c < channels_; ++c) {
      const std::size_t base = std::size_t(img) * hw * channels_ + c;
      double mean = 0.0;
      for (int i = 0; i < hw; ++i) mean += in.data[base + std::size_t(i) * channels_];
      mean /= hw;
      double var = 0.0;
      for (int i = 0; i < hw; ++i) {
        const double d = in.data[base + std::size_t(i) * channels_] - mean;
        var += d * d;
      }
      var /= hw;
      const double sigma = std::sqrt(var + eps_);
      cached_sigma_[std::size_t(img) * channels_ + c] = sigma;
      const double gamma = p_[c], beta = p_[channels_ + c];
      for (int i = 0; i < hw; ++i) {
        const std::size_t at = base + std::size_t(i) * channels_;
        const double xhat = (in.data[at] - mean) / sigma;
        cached_xhat_.data[at] = xhat;
        out.data[at] = gamma * xhat + beta;
      }
    }
  }
  return out;
}

Tensor InstanceNorm::backward(const Tensor& grad_out) {
  const int b = grad_out.shape[0], h = grad_out.shape[1], w = grad_out.shape[2];
  const int hw = h * w;
  Tensor grad_in(grad_out.shape);
  for (int img = 0; img < b; ++img) {
    for (int c = 0; c < channels_; ++c) {
      const std::size_t base = std::size_t(img) * hw * channels_ + c;
      const double gamma = p_[c];
      const double sigma = cached_sigma_[std::size_t(img) * channels_ + c];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int i = 0; i < hw; ++i) {
        const std::size_t at = base + std::size_t(i) * channels_;
        sum_g += grad_out.data[at];
        sum_gx += grad_out.data[at] * cached_xhat_.data[at];
      }
      g_[c] += sum_gx;
      g_[channels_ + c] += sum_g;
      const double mean_g = sum_g / hw;
      const double mean_gx = sum_gx / hw;
      for (int i = 0; i < hw; ++i) {
        const std::size_t at = base + std::size_t(i) * channels_;
        grad_in.data[at] = gamma / sigma *
                           (grad_out.data[at] - mean_g -
                            cached_xhat_.data[at] * mean_gx);
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Pointwise layers
// ---------------------------------------------------------------------------

Tensor LeakyReLU::forward(const Tensor& in, Mode, Rng*) {
  cached_in_ = in;
  Tensor out = in;
  for (double& v : out.data) v = v >= 0.0 ? v : slope_ * v;
  return out;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i)
    if (cached_in_.data[i] < 0.0) grad_in.data[i] *= slope_;
  return grad_in;
}

Tensor Softmax::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 2);
  Tensor out = in;
  const int b = in.shape[0], n = in.shape[1];
  for (int r = 0; r < b; ++r) {
    double* row = out.data.data() + std::size_t(r) * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      row[i] = std::exp(row[i] - mx);
      total += row[i];
    }
    for (int i = 0; i < n; ++i) row[i] /= total;
  }
  cached_out_ = out;
  return out;
}

Tensor Softmax::backward(const Tensor& grad_out) {
  Tensor grad_in(grad_out.shape);
  const int b = grad_out.shape[0], n = grad_out.shape[1];
  for (int r = 0; r < b; ++r) {
    const double* y = cached_out_.data.data() + std::size_t(r) * n;
    const double* g = grad_out.data.data() + std::size_t(r) * n;
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += g[i] * y[i];
    double* gi = grad_in.data.data() + std::size_t(r) * n;
    for (int i = 0; i < n; ++i) gi[i] = y[i] * (g[i] - dot);
  }
  return grad_in;
}

Tensor Dropout::forward(const Tensor& in, Mode mode, Rng* rng) {
  if (mode == Mode::Eval || rate_ <= 0.0) {
    mask_.assign(in.size(), 1.0);
    return in;
  }
  require(rng != nullptr, ErrorCode::InvalidArgument,
          "dropout needs an RNG in train mode");
  const double keep = 1.0 - rate_;
  mask_.resize(in.size());
  Tensor out = in;
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask_[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    out.data[i] *= mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in.data[i] *= mask_[i];
  return grad_in;
}

std::vector<int> Reshape::out_shape(const std::vector<int>& in) const {
  std::vector<int> out = {in[0]};
  out.insert(out.end(), inner_.begin(), inner_.end());
  std::size_t in_n = 1;
  for (std::size_t i = 1; i < in.size(); ++i) in_n *= in[i];
  if (Tensor::numel(out) != in_n * in[0])
    shape_fail(name(), in, "cannot reshape to " + shape_string(inner_));
  return out;
}

Tensor Reshape::forward(const Tensor& in, Mode, Rng*) {
  cached_in_shape_ = in.shape;
  return in.reshaped(out_shape(in.shape));
}

Tensor Reshape::backward(const Tensor& grad_out) {
  return grad_out.reshaped(cached_in_shape_);
}

std::vector<int> Flatten::out_shape(const std::vector<int>& in) const {
  int n = 1;
  for (std::size_t i = 1; i < in.size(); ++i) n *= in[i];
  return {in[0], n};
}

Tensor Flatten::forward(const Tensor& in, Mode, Rng*) {
  cached_in_shape_ = in.shape;
  return in.reshaped(out_shape(in.shape));
}

Tensor Flatten::backward(const Tensor& grad_out) {
  return grad_out.reshaped(cached_in_shape_);
}

std::vector<int> Concat::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 2);
  if (in[0] != 1) shape_fail(name(), in, "concat expects batch 1");
  return {1, static_cast<int>(fixed_.size()) + in[1]};
}

Tensor Concat::forward(const Tensor& in, Mode, Rng*) {
  expect_rank(name(), in.shape, 2);
  dynamic_ = in.shape[1];
  Tensor out({1, static_cast<int>(fixed_.size()) + dynamic_});
  std::copy(fixed_.begin(), fixed_.end(), out.data.begin());
  std::copy(in.data.begin(), in.data.end(), out.data.begin() + fixed_.size());
  return out;
}

Tensor Concat::backward(const Tensor& grad_out) {
  Tensor grad_in({1, dynamic_});
  std::copy(grad_out.data.begin() + fixed_.size(), grad_out.data.end(),
            grad_in.data.begin());
  return grad_in;
}

Tensor GaussianNoiseLayer::forward(const Tensor& in, Mode mode, Rng* rng) {
  if (mode == Mode::Eval || sigma_ <= 0.0) return in;
  require(rng != nullptr, ErrorCode::InvalidArgument,
          "gaussian noise layer needs an RNG in train mode");
  Tensor out = in;
  for (double& v : out.data) v += sigma_ * rng->normal();
  return out;
}

Tensor GaussianNoiseLayer::backward(const Tensor& grad_out) {
  return grad_out;
}

GaussianConvLayer::GaussianConvLayer(int grid_h, int grid_w, double spacing,
                                     double n_th)
    : h_(grid_h), w_(grid_w) {
  kernel_ = gaussian_kernel(spacing, n_th, &k_);
  flipped_.resize(kernel_.size());
  for (int y = 0; y < k_; ++y)
    for (int x = 0; x < k_; ++x)
      flipped_[y * k_ + x] = kernel_[(k_ - 1 - y) * k_ + (k_ - 1 - x)];
}

std::vector<int> GaussianConvLayer::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 2);
  if (in[1] != h_ * w_)
    shape_fail(name(), in, "expected flattened " + std::to_string(h_) + "x" +
                               std::to_string(w_) + " image");
  return in;
}

Tensor GaussianConvLayer::forward(const Tensor& in, Mode, Rng*) {
  out_shape(in.shape);
  if (k_ == 1) return in;
  Tensor out(in.shape);
  for (int b = 0; b < in.shape[0]; ++b)
    kernels::image_convolve(in.data.data() + std::size_t(b) * h_ * w_, h_, w_,
                            kernel_.data(), k_, k_,
                            out.data.data() + std::size_t(b) * h_ * w_);
  return out;
}

Tensor GaussianConvLayer::backward(const Tensor& grad_out) {
  if (k_ == 1) return grad_out;
  Tensor grad_in(grad_out.shape);
  for (int b = 0; b < grad_out.shape[0]; ++b)
    kernels::image_convolve(grad_out.data.data() + std::size_t(b) * h_ * w_, h_,
                            w_, flipped_.data(), k_, k_,
                            grad_in.data.data() + std::size_t(b) * h_ * w_);
  return grad_in;
}

Tensor UnitMaxNormalize::forward(const Tensor& in, Mode, Rng*) {
  cached_in_ = in;
  argmax_ = 0;
  max_ = in.data[0];
  for (std::size_t i = 1; i < in.size(); ++i) {
    if (in.data[i] > max_) {
      max_ = in.data[i];
      argmax_ = i;
    }
  }
  require(max_ > 0.0, ErrorCode::DegenerateNormalization,
          "unit-max normalization needs a positive maximum");
  Tensor out = in;
  for (double& v : out.data) v /= max_;
  return out;
}

Tensor UnitMaxNormalize::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  double dot = 0.0;
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    dot += grad_out.data[i] * cached_in_.data[i];
  for (double& v : grad_in.data) v /= max_;
  grad_in.data[argmax_] -= dot / (max_ * max_);
  return grad_in;
}

// ---------------------------------------------------------------------------
// DensityMatrix / Expectation
// ---------------------------------------------------------------------------

std::vector<int> DensityMatrixLayer::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 4);
  if (in[0] != 1 || in[1] != in[2] || in[3] != 2)
    shape_fail(name(), in, "expected [1, N, N, 2]");
  return in;
}

Tensor DensityMatrixLayer::forward(const Tensor& in, Mode, Rng*) {
  out_shape(in.shape);
  n_ = in.shape[1];
  t_ = CMatrix::Zero(n_, n_);
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < r; ++c) {
      const std::size_t at = (std::size_t(r) * n_ + c) * 2;
      t_(r, c) = cxd(in.data[at], in.data[at + 1]);
    }
    t_(r, r) = in.data[(std::size_t(r) * n_ + r) * 2];
  }
  CMatrix m = t_.adjoint() * t_;
  // keeps the trace (and gradients) finite at pathological inputs
  m += 1e-12 * CMatrix::Identity(n_, n_);
  trace_ = m.trace().real();
  rho_ = m / trace_;
  Tensor out({1, n_, n_, 2});
  for (int r = 0; r < n_; ++r)
    for (int c = 0; c < n_; ++c) {
      const std::size_t at = (std::size_t(r) * n_ + c) * 2;
      out.data[at] = rho_(r, c).real();
      out.data[at + 1] = rho_(r, c).imag();
    }
  return out;
}

Tensor DensityMatrixLayer::backward(const Tensor& grad_out) {
  CMatrix g(n_, n_);
  for (int r = 0; r < n_; ++r)
    for (int c = 0; c < n_; ++c) {
      const std::size_t at = (std::size_t(r) * n_ + c) * 2;
      g(r, c) = cxd(grad_out.data[at], grad_out.data[at + 1]);
    }
  // rho = M / tr(M): G_M = G / tr - conj(tr(G^H M)) / tr^2 * I
  const cxd ip = (g.adjoint() * rho_).trace() * trace_;  // tr(G^H M)
  CMatrix g_m = g / trace_;
  g_m -= (std::conj(ip) / (trace_ * trace_)) * CMatrix::Identity(n_, n_);
  // M = T^H T: G_T = T (G_M + G_M^H)
  const CMatrix g_t = t_ * (g_m + g_m.adjoint());
  Tensor grad_in({1, n_, n_, 2});
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < r; ++c) {
      const std::size_t at = (std::size_t(r) * n_ + c) * 2;
      grad_in.data[at] = g_t(r, c).real();
      grad_in.data[at + 1] = g_t(r, c).imag();
    }
    grad_in.data[(std::size_t(r) * n_ + r) * 2] = g_t(r, r).real();
  }
  return grad_in;
}

std::vector<int> ExpectationLayer::out_shape(const std::vector<int>& in) const {
  expect_rank(name(), in, 4);
  if (in[0] != 1 || in[1] != in[2] || in[3] != 2)
    shape_fail(name(), in, "expected [1, N, N, 2]");
  if (in[1] != ops_->cutoff)
    shape_fail(name(), in,
               "operator cutoff is " + std::to_string(ops_->cutoff));
  return {1, ops_->size()};
}

namespace {

CMatrix complex_from_channels(const Tensor& t, int n) {
  CMatrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const std::size_t at = (std::size_t(r) * n + c) * 2;
      m(r, c) = cxd(t.data[at], t.data[at + 1]);
    }
  return m;
}

}  // namespace

Tensor ExpectationLayer::forward(const Tensor& in, Mode, Rng*) {
  out_shape(in.shape);
  const int n = in.shape[1];
  const CMatrix rho = complex_from_channels(in, n);
  Tensor out({1, ops_->size()});
  if (ops_->rank1()) {
    kernels::expect_rank1_batch(rho, ops_->columns, 1.0, out.data.data());
  } else {
    kernels::parallel_for(out.size(), [&](std::size_t i) {
      out.data[i] = (ops_->operators[i] * rho).trace().real();
    });
  }
  return out;
}

Tensor ExpectationLayer::backward(const Tensor& grad_out) {
  const int n = ops_->cutoff;
  CMatrix g;
  if (ops_->rank1()) {
    kernels::rank1_weighted_sum(ops_->columns, grad_out.data.data(), 1.0, g);
  } else {
    g = CMatrix::Zero(n, n);
    for (int i = 0; i < ops_->size(); ++i)
      g += grad_out.data[i] * ops_->operators[i];
  }
  Tensor grad_in({1, n, n, 2});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const std::size_t at = (std::size_t(r) * n + c) * 2;
      grad_in.data[at] = g(r, c).real();
      grad_in.data[at + 1] = g(r, c).imag();
    }
  return grad_in;
}

}  // namespace qst::nn
