#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qst/measure.hpp"
#include "qst/nn/tensor.hpp"

namespace qst::nn {

enum class Mode { Train, Eval };
enum class Padding { Valid, Same };

// Output spatial extent of a convolution: valid -> floor((in-k)/s)+1,
// same -> ceil(in/s).
int conv_out_extent(int in, int kernel, int stride, Padding padding);
// Transpose convolution, same padding: in * s.
int conv_transpose_out_extent(int in, int stride);

/// One differentiable operation. forward() caches whatever backward() needs;
/// backward() consumes the cache, accumulates parameter gradients, and
/// returns the gradient w.r.t. the layer input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string name() const = 0;
  virtual std::vector<int> out_shape(const std::vector<int>& in) const = 0;
  // Allocates and initializes parameters once the input shape is known.
  virtual void build(const std::vector<int>& in_shape, Rng& rng) {
    (void)in_shape;
    (void)rng;
  }
  virtual Tensor forward(const Tensor& in, Mode mode, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::span<double> params() { return {}; }
  virtual std::span<double> grads() { return {}; }
  void zero_grads() {
    auto g = grads();
    std::fill(g.begin(), g.end(), 0.0);
  }
};

// y = x W + b, weights [in, out] row-major. Glorot-uniform init.
class Dense : public Layer {
 public:
  Dense(int units, bool bias) : units_(units), bias_(bias) {}
  std::string name() const override { return "dense"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void build(const std::vector<int>& in_shape, Rng& rng) override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::span<double> params() override { return {p_.data(), p_.size()}; }
  std::span<double> grads() override { return {g_.data(), g_.size()}; }

  int in_features() const { return in_; }
  int units() const { return units_; }
  bool has_bias() const { return bias_; }
  double* weight_data() { return p_.data(); }
  double* bias_data() { return bias_ ? p_.data() + std::size_t(in_) * units_ : nullptr; }
  double* weight_grad_data() { return g_.data(); }
  double* bias_grad_data() { return bias_ ? g_.data() + std::size_t(in_) * units_ : nullptr; }

 private:
  int units_, in_ = 0;
  bool bias_;
  std::vector<double> p_, g_;
  Tensor cached_in_;
};

// HWC convolution; weights [k, k, in_c, out_c], bias optional (off by
// default, matching the parameter counts of the reference architectures).
class Conv2D : public Layer {
 public:
  Conv2D(int filters, int kernel, int stride, Padding padding,
         bool bias = false)
      : filters_(filters), kernel_(kernel), stride_(stride), padding_(padding),
        bias_(bias) {}
  std::string name() const override { return "conv2d"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void build(const std::vector<int>& in_shape, Rng& rng) override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::span<double> params() override { return {p_.data(), p_.size()}; }
  std::span<double> grads() override { return {g_.data(), g_.size()}; }

 private:
  int filters_, kernel_, stride_;
  Padding padding_;
  bool bias_;
  int in_c_ = 0;
  std::vector<double> p_, g_;
  Tensor cached_in_;
};

// Transpose convolution, same padding: out = in * stride. Weights
// [k, k, filters, in_c] (the equivalent forward convolution's layout).
class Conv2DTranspose : public Layer {
 public:
  Conv2DTranspose(int filters, int kernel, int stride)
      : filters_(filters), kernel_(kernel), stride_(stride) {}
  std::string name() const override { return "conv2d_transpose"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void build(const std::vector<int>& in_shape, Rng& rng) override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::span<double> params() override { return {p_.data(), p_.size()}; }
  std::span<double> grads() override { return {g_.data(), g_.size()}; }

 private:
  int filters_, kernel_, stride_;
  int in_c_ = 0;
  std::vector<double> p_, g_;
  Tensor cached_in_;
};

// Per-sample, per-channel normalization over the spatial extent, followed by
// a learned scale and shift.
class InstanceNorm : public Layer {
 public:
  explicit InstanceNorm(double eps = 1e-5) : eps_(eps) {}
  std::string name() const override { return "instance_norm"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void build(const std::vector<int>& in_shape, Rng& rng) override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::span<double> params() override { return {p_.data(), p_.size()}; }
  std::span<double> grads() override { return {g_.data(), g_.size()}; }

 private:
  double eps_;
  int channels_ = 0;
  std::vector<double> p_, g_;
  Tensor cached_xhat_;
  std::vector<double> cached_sigma_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.3) : slope_(slope) {}
  std::string name() const override { return "leaky_relu"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double slope_;
  Tensor cached_in_;
};

// Softmax over the last extent.
class Softmax : public Layer {
 public:
  std::string name() const override { return "softmax"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor cached_out_;
};

// Inverted dropout: scales kept units by 1/(1-rate) in train mode so eval
// is the identity.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  std::string name() const override { return "dropout"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  std::vector<double> mask_;
};

class Reshape : public Layer {
 public:
  explicit Reshape(std::vector<int> inner) : inner_(std::move(inner)) {}
  std::string name() const override { return "reshape"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> inner_;
  std::vector<int> cached_in_shape_;
};

class Flatten : public Layer {
 public:
  std::string name() const override { return "flatten"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> cached_in_shape_;
};

// Prepends a fixed vector to the (flat) input; the gradient passes through
// to the dynamic part only.
class Concat : public Layer {
 public:
  explicit Concat(std::vector<double> fixed) : fixed_(std::move(fixed)) {}
  std::string name() const override { return "concat"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void set_fixed(std::vector<double> fixed) { fixed_ = std::move(fixed); }
  int fixed_size() const { return static_cast<int>(fixed_.size()); }

 private:
  std::vector<double> fixed_;
  int dynamic_ = 0;
};

// Adds zero-mean Gaussian noise, resampled at every training forward pass;
// identity in eval mode. Gradient passes through unchanged.
class GaussianNoiseLayer : public Layer {
 public:
  explicit GaussianNoiseLayer(double sigma) : sigma_(sigma) {}
  std::string name() const override { return "gaussian_noise"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double sigma_;
};

// Fixed (non-trainable) convolution of a flattened square image with the
// sampled thermal kernel; the backward pass applies the flipped kernel.
class GaussianConvLayer : public Layer {
 public:
  GaussianConvLayer(int grid_h, int grid_w, double spacing, double n_th);
  std::string name() const override { return "gaussian_conv"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int h_, w_, k_ = 1;
  std::vector<double> kernel_, flipped_;
};

// y = x / max(x); the recorded maximum makes the map differentiable.
class UnitMaxNormalize : public Layer {
 public:
  std::string name() const override { return "unit_max_normalize"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return in;
  }
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor cached_in_;
  std::size_t argmax_ = 0;
  double max_ = 0.0;
};

// Converts a raw [1, N, N, 2] tensor into a density matrix via the masked
// Cholesky form T^H T / tr; output is the [1, N, N, 2] re/im of rho and is
// physical for any finite input.
class DensityMatrixLayer : public Layer {
 public:
  std::string name() const override { return "density_matrix"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

  // rho produced by the most recent forward pass.
  const CMatrix& rho() const { return rho_; }

 private:
  int n_ = 0;
  CMatrix t_, rho_;
  double trace_ = 0.0;
};

// d_i = tr(O_i rho) against a fixed measurement set; input is the [1,N,N,2]
// re/im form of rho, output [1, n]. Gradients flow into rho.
class ExpectationLayer : public Layer {
 public:
  explicit ExpectationLayer(std::shared_ptr<const MeasurementSet> ops)
      : ops_(std::move(ops)) {}
  std::string name() const override { return "expectation"; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  Tensor forward(const Tensor& in, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::shared_ptr<const MeasurementSet> ops_;
};

}  // namespace qst::nn
