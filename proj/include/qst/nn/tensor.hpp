#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "qst/common.hpp"

namespace qst::nn {

/// Dense row-major real tensor. The leading extent is the batch dimension
/// throughout the layer stack.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(data.size() == numel(shape), ErrorCode::ShapeError,
            "tensor data does not match its shape");
  }

  static std::size_t numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) {
      require(e > 0, ErrorCode::ShapeError, "tensor extents must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int batch() const { return shape.empty() ? 0 : shape[0]; }

  // Extents with the batch dimension stripped.
  std::vector<int> inner_shape() const {
    return {shape.begin() + 1, shape.end()};
  }

  Tensor reshaped(std::vector<int> s) const {
    require(numel(s) == size(), ErrorCode::ShapeError,
            "reshape changes element count");
    return Tensor(std::move(s), data);
  }
};

inline std::string shape_string(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace qst::nn
