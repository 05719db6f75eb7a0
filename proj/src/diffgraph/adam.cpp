#include "irlvla/diffgraph/adam.hpp"

#include <cmath>

#include "irlvla/common/error.hpp"

namespace irlvla::diffgraph {

AdamState make_adam_state(const ParamBundle& params) {
  return {0, Gradients::zeros_like(params), Gradients::zeros_like(params)};
}

void adam_step(ParamBundle& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.layers.size() != params.layers.size() || state.m.layers.size() != params.layers.size()) {
    fail(ErrorCode::ShapeMismatch, "adam: layer count mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    DenseLayer& p = params.layers[i];
    const LayerGrad& g = grads.layers[i];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size()) {
      fail(ErrorCode::ShapeMismatch, "adam: shape mismatch in layer " + p.name);
    }
    LayerGrad& m = state.m.layers[i];
    LayerGrad& v = state.v.layers[i];
    m.weight = cfg.beta1 * m.weight + (1.0 - cfg.beta1) * g.weight;
    m.bias = cfg.beta1 * m.bias + (1.0 - cfg.beta1) * g.bias;
    v.weight = cfg.beta2 * v.weight + (1.0 - cfg.beta2) * g.weight.cwiseAbs2();
    v.bias = cfg.beta2 * v.bias + (1.0 - cfg.beta2) * g.bias.cwiseAbs2();
    p.weight.array() -= cfg.lr * ((m.weight.array() / c1) /
                                      ((v.weight.array() / c2).sqrt() + cfg.eps) +
                                  cfg.weight_decay * p.weight.array());
    p.bias.array() -= cfg.lr * ((m.bias.array() / c1) / ((v.bias.array() / c2).sqrt() + cfg.eps) +
                                cfg.weight_decay * p.bias.array());
  }
}

}  // namespace irlvla::diffgraph
