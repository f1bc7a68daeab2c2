#pragma once

#include <memory>

#include "qst/nn/layers.hpp"

namespace qst::nn {

/// Ordered feedforward stack. Layers cache activations on forward; backward
/// walks them in reverse and accumulates parameter gradients. A graph is
/// single-writer while training; a frozen graph may be evaluated from
/// multiple threads only through independent copies.
class NetworkGraph {
 public:
  NetworkGraph& add(std::unique_ptr<Layer> layer);

  // Validates the whole shape chain and initializes parameters.
  void build(std::vector<int> input_shape, std::uint64_t seed);

  Tensor forward(const Tensor& input, Mode mode, Rng* rng = nullptr);
  // Gradient w.r.t. the graph input; parameter gradients accumulate.
  Tensor backward(const Tensor& grad_out);

  // Forward only through layers [0, upto); used to read intermediate states.
  Tensor forward_prefix(const Tensor& input, int upto, Mode mode, Rng* rng);

  int layer_count() const { return static_cast<int>(layers_.size()); }
  Layer& layer(int i) { return *layers_[i]; }
  const Layer& layer(int i) const { return *layers_[i]; }

  bool built() const { return built_; }
  const std::vector<int>& input_shape() const { return input_shape_; }
  const std::vector<int>& output_shape() const { return output_shape_; }

  std::size_t param_count() const;
  void zero_grads();
  void copy_params_to(std::vector<double>& out) const;
  void set_params(const std::vector<double>& in);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<int> input_shape_, output_shape_;
  bool built_ = false;
};

}  // namespace qst::nn
