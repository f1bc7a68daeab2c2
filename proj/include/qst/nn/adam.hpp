#pragma once

#include "qst/nn/graph.hpp"

namespace qst::nn {

/// Adam with bias correction and the exponentially decaying learning rate
/// l(i) = l0 * C^(i/s).
struct AdamConfig {
  double lr0 = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.5;
  double epsilon = 1e-8;
  double decay = 0.96;      // C
  double decay_steps = 1000;  // s
  bool schedule = true;
};

class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }

  // Learning rate used by step number i (0-based).
  double learning_rate(std::int64_t i) const {
    if (!cfg_.schedule) return cfg_.lr0;
    return cfg_.lr0 * std::pow(cfg_.decay, double(i) / cfg_.decay_steps);
  }

  // One update over every parameter of the graph from its accumulated
  // gradients. Fails on NaN gradients.
  void step(NetworkGraph& graph);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace qst::nn
