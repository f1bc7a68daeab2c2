#include "qst/nn/graph.hpp"

namespace qst::nn {

NetworkGraph& NetworkGraph::add(std::unique_ptr<Layer> layer) {
  require(!built_, ErrorCode::InvalidArgument,
          "cannot add layers to a built graph");
  layers_.push_back(std::move(layer));
  return *this;
}

void NetworkGraph::build(std::vector<int> input_shape, std::uint64_t seed) {
  require(!built_, ErrorCode::InvalidArgument, "graph already built");
  require(!layers_.empty(), ErrorCode::InvalidArgument, "graph has no layers");
  input_shape_ = std::move(input_shape);
  Rng rng(seed);
  std::vector<int> shape = input_shape_;
  for (auto& layer : layers_) {
    layer->build(shape, rng);
    shape = layer->out_shape(shape);
  }
  output_shape_ = shape;
  built_ = true;
}

Tensor NetworkGraph::forward(const Tensor& input, Mode mode, Rng* rng) {
  require(built_, ErrorCode::InvalidArgument, "graph not built");
  Tensor x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode, rng);
  return x;
}

Tensor NetworkGraph::forward_prefix(const Tensor& input, int upto, Mode mode,
                                    Rng* rng) {
  require(built_, ErrorCode::InvalidArgument, "graph not built");
  require(upto >= 0 && upto <= layer_count(), ErrorCode::InvalidArgument,
          "bad layer index");
  Tensor x = input;
  for (int i = 0; i < upto; ++i) x = layers_[i]->forward(x, mode, rng);
  return x;
}

Tensor NetworkGraph::backward(const Tensor& grad_out) {
  require(built_, ErrorCode::InvalidArgument, "graph not built");
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return g;
}

std::size_t NetworkGraph::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_)
    n += const_cast<Layer&>(*layer).params().size();
  return n;
}

void NetworkGraph::zero_grads() {
  for (auto& layer : layers_) layer->zero_grads();
}

void NetworkGraph::copy_params_to(std::vector<double>& out) const {
  out.clear();
  out.reserve(param_count());
  for (const auto& layer : layers_) {
    auto p = const_cast<Layer&>(*layer).params();
    out.insert(out.end(), p.begin(), p.end());
  }
}

void NetworkGraph::set_params(const std::vector<double>& in) {
  require(in.size() == param_count(), ErrorCode::InvalidArgument,
          "parameter vector size mismatch");
  std::size_t at = 0;
  for (auto& layer : layers_) {
    auto p = layer->params();
    std::copy(in.begin() + at, in.begin() + at + p.size(), p.begin());
    at += p.size();
  }
}

}  // namespace qst::nn
