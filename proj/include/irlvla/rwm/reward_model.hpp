#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "irlvla/diffgraph/adam.hpp"
#include "irlvla/diffgraph/checkpoint.hpp"
#include "irlvla/diffgraph/mlp.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/scene/types.hpp"

namespace irlvla::rwm {

using diffgraph::Matrix;
using diffgraph::Vector;

inline constexpr int kNumHeads = 8;  // metrics::kRewardMetrics order

// Aggregation weights over all eight predicted metrics. The penalty metrics
// get the total mass of the averaged terms each, so a single predicted
// penalty failure costs more than any combination of soft failures.
struct RwmWeights {
  std::array<double, kNumHeads> w = {14.0, 14.0, 14.0, 14.0, 5.0, 5.0, 2.0, 2.0};
};

struct RwmConfig {
  int trunk_hidden = 128;
  int trunk_out = 64;
  int head_hidden = 32;
  std::uint64_t seed = 0;
  // Per-metric loss weights, kRewardMetrics order.
  std::array<double, kNumHeads> loss_weights = {1, 1, 1, 1, 1, 1, 1, 1};
};

struct RwmModel {
  RwmConfig cfg;
  int feature_size = 0;
  Vector feat_mean;  // input standardization, fitted on training features
  Vector feat_scale;
  diffgraph::ParamBundle trunk;
  std::array<diffgraph::ParamBundle, kNumHeads> heads;
};

RwmModel make_rwm(int feature_size, const RwmConfig& cfg);
int head_outputs(metrics::Metric m);

struct MetricPrediction {
  std::array<double, kNumHeads> r{};                 // expected score per metric
  std::array<std::array<double, 3>, 2> probs{};      // NC, DDC over {0, 0.5, 1}
  double get(metrics::Metric m) const;
};

// Features are columns. Throws ShapeMismatch.
std::vector<MetricPrediction> predict_metrics(const RwmModel& m, const Matrix& features);
MetricPrediction predict_metrics(const RwmModel& m, const Vector& feature);

// Normalized weighted sum: an all-ones prediction maps to 1.
double predict_epdms(const MetricPrediction& p, const RwmWeights& w = {});

struct RwmLossResult {
  double loss = 0.0;
  std::array<double, kNumHeads> per_metric{};
  diffgraph::Gradients trunk_grads;
  std::array<diffgraph::Gradients, kNumHeads> head_grads;
};

// Mean over the batch of sum_m loss_weight_m * loss_m: BCE for binary metrics,
// MSE for EP, 3-class cross-entropy for NC and DDC.
RwmLossResult rwm_loss(const RwmModel& m, const Matrix& features,
                       const std::vector<metrics::MetricVector>& targets, bool with_grads = true);

int three_way_class(double v);

diffgraph::Checkpoint rwm_checkpoint(const RwmModel& m);
RwmModel rwm_from_checkpoint(const diffgraph::Checkpoint& ck);

}  // namespace irlvla::rwm
