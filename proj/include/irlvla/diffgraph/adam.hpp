#pragma once

#include "irlvla/diffgraph/mlp.hpp"

namespace irlvla::diffgraph {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
};

struct AdamState {
  long step = 0;
  Gradients m;
  Gradients v;
};

AdamState make_adam_state(const ParamBundle& params);

// One AdamW update with bias correction. Throws ShapeMismatch.
void adam_step(ParamBundle& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace irlvla::diffgraph
