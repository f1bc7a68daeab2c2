#include "qst/nn/adam.hpp"

#include <cmath>

namespace qst::nn {

void Adam::step(NetworkGraph& graph) {
  const std::size_t n = graph.param_count();
  if (m_.size() != n) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
  const double lr = learning_rate(t_);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  std::size_t at = 0;
  for (int l = 0; l < graph.layer_count(); ++l) {
    auto p = graph.layer(l).params();
    auto g = graph.layer(l).grads();
    for (std::size_t i = 0; i < p.size(); ++i, ++at) {
      const double grad = g[i];
      require(std::isfinite(grad), ErrorCode::NumericalFailure,
              "NaN/inf gradient in layer " + graph.layer(l).name());
      m_[at] = cfg_.beta1 * m_[at] + (1.0 - cfg_.beta1) * grad;
      v_[at] = cfg_.beta2 * v_[at] + (1.0 - cfg_.beta2) * grad * grad;
      const double mhat = m_[at] / bc1;
      const double vhat = v_[at] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace qst::nn
