#include "irlvla/rwm/reward_model.hpp"

#include <algorithm>
#include <cmath>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"

namespace irlvla::rwm {

using metrics::Metric;
using metrics::MetricKind;

int head_outputs(Metric m) { return metrics::metric_kind(m) == MetricKind::ThreeWay ? 3 : 1; }

int three_way_class(double v) { return v <= 0.25 ? 0 : (v < 0.75 ? 1 : 2); }

RwmModel make_rwm(int feature_size, const RwmConfig& cfg) {
  RwmModel m;
  m.cfg = cfg;
  m.feature_size = feature_size;
  m.feat_mean = Vector::Zero(feature_size);
  m.feat_scale = Vector::Ones(feature_size);
  m.trunk = diffgraph::make_mlp("rwm.trunk", {feature_size, cfg.trunk_hidden, cfg.trunk_out},
                                mix_seed(cfg.seed, 100), diffgraph::Activation::Tanh,
                                diffgraph::Activation::Tanh);
  for (int h = 0; h < kNumHeads; ++h) {
    const Metric metric = metrics::kRewardMetrics[h];
    m.heads[h] = diffgraph::make_mlp("rwm." + std::string(metrics::metric_name(metric)),
                                     {cfg.trunk_out, cfg.head_hidden, head_outputs(metric)},
                                     mix_seed(cfg.seed, 200 + h));
  }
  return m;
}

double MetricPrediction::get(Metric m) const {
  for (int h = 0; h < kNumHeads; ++h) {
    if (metrics::kRewardMetrics[h] == m) return r[h];
  }
  return 1.0;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::array<double, 3> softmax3(double a, double b, double c) {
  const double mx = std::max({a, b, c});
  const double ea = std::exp(a - mx), eb = std::exp(b - mx), ec = std::exp(c - mx);
  const double s = ea + eb + ec;
  return {ea / s, eb / s, ec / s};
}

Matrix standardize(const RwmModel& m, const Matrix& features) {
  if (features.rows() != m.feature_size) {
    fail(ErrorCode::ShapeMismatch, "feature length " + std::to_string(features.rows()) +
                                       " != model input " + std::to_string(m.feature_size));
  }
  return (features.colwise() - m.feat_mean).array().colwise() / m.feat_scale.array();
}

int three_way_index(Metric m) { return m == Metric::NC ? 0 : 1; }

MetricPrediction read_prediction(const std::array<Matrix, kNumHeads>& raw, Eigen::Index j) {
  MetricPrediction p;
  for (int h = 0; h < kNumHeads; ++h) {
    const Metric metric = metrics::kRewardMetrics[h];
    if (head_outputs(metric) == 3) {
      const auto pr = softmax3(raw[h](0, j), raw[h](1, j), raw[h](2, j));
      p.probs[three_way_index(metric)] = pr;
      p.r[h] = 0.0 * pr[0] + 0.5 * pr[1] + 1.0 * pr[2];
    } else {
      p.r[h] = sigmoid(raw[h](0, j));
    }
  }
  return p;
}

}  // namespace

std::vector<MetricPrediction> predict_metrics(const RwmModel& m, const Matrix& features) {
  const Matrix h = diffgraph::mlp_eval(m.trunk, standardize(m, features));
  std::array<Matrix, kNumHeads> raw;
  for (int k = 0; k < kNumHeads; ++k) raw[k] = diffgraph::mlp_eval(m.heads[k], h);
  std::vector<MetricPrediction> out;
  out.reserve(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) out.push_back(read_prediction(raw, j));
  return out;
}

MetricPrediction predict_metrics(const RwmModel& m, const Vector& feature) {
  return predict_metrics(m, Matrix(feature)).front();
}

double predict_epdms(const MetricPrediction& p, const RwmWeights& w) {
  double num = 0.0, den = 0.0;
  for (int h = 0; h < kNumHeads; ++h) {
    num += w.w[h] * p.r[h];
    den += w.w[h];
  }
  return num / den;
}

RwmLossResult rwm_loss(const RwmModel& m, const Matrix& features,
                       const std::vector<metrics::MetricVector>& targets, bool with_grads) {
  if (features.cols() == 0) fail(ErrorCode::EmptyDataset, "reward batch is empty");
  if (static_cast<Eigen::Index>(targets.size()) != features.cols()) {
    fail(ErrorCode::ShapeMismatch, "targets and features disagree on batch size");
  }
  const Eigen::Index n = features.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto trunk = diffgraph::mlp_forward(m.trunk, standardize(m, features));

  RwmLossResult r;
  Matrix dh = Matrix::Zero(trunk.output.rows(), n);
  for (int k = 0; k < kNumHeads; ++k) {
    const Metric metric = metrics::kRewardMetrics[k];
    const double lw = m.cfg.loss_weights[k];
    auto head = diffgraph::mlp_forward(m.heads[k], trunk.output);
    Matrix g = Matrix::Zero(head.output.rows(), n);
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double y = targets[j].get(metric);
      switch (metrics::metric_kind(metric)) {
        case MetricKind::ThreeWay: {
          const auto p = softmax3(head.output(0, j), head.output(1, j), head.output(2, j));
          const int cls = three_way_class(y);
          total += -std::log(std::max(p[cls], 1e-300));
          for (int c = 0; c < 3; ++c) g(c, j) = lw * (p[c] - (c == cls ? 1.0 : 0.0)) * inv_n;
          break;
        }
        case MetricKind::Binary: {
          const double z = head.output(0, j);
          total += softplus(z) - y * z;
          g(0, j) = lw * (sigmoid(z) - y) * inv_n;
          break;
        }
        case MetricKind::Continuous: {
          const double p = sigmoid(head.output(0, j));
          total += (p - y) * (p - y);
          g(0, j) = lw * 2.0 * (p - y) * p * (1.0 - p) * inv_n;
          break;
        }
      }
    }
    r.per_metric[k] = total * inv_n;
    r.loss += lw * r.per_metric[k];
    if (with_grads) {
      auto back = diffgraph::backward(head.tape, g);
      r.head_grads[k] = std::move(back.grads);
      dh += back.input_grad;
    }
  }
  if (with_grads) r.trunk_grads = diffgraph::backward(trunk.tape, dh).grads;
  return r;
}

diffgraph::Checkpoint rwm_checkpoint(const RwmModel& m) {
  diffgraph::Checkpoint ck;
  ck.meta["kind"] = "rwm";
  ck.meta["feature_size"] = m.feature_size;
  ck.meta["trunk_hidden"] = m.cfg.trunk_hidden;
  ck.meta["trunk_out"] = m.cfg.trunk_out;
  ck.meta["head_hidden"] = m.cfg.head_hidden;
  ck.meta["seed"] = m.cfg.seed;
  ck.meta["loss_weights"] = m.cfg.loss_weights;
  ck.meta["feat_mean"] = std::vector<double>(m.feat_mean.data(), m.feat_mean.data() + m.feat_mean.size());
  ck.meta["feat_scale"] =
      std::vector<double>(m.feat_scale.data(), m.feat_scale.data() + m.feat_scale.size());
  ck.put("rwm.trunk", m.trunk);
  for (int k = 0; k < kNumHeads; ++k) {
    ck.put("rwm.head." + std::string(metrics::metric_name(metrics::kRewardMetrics[k])), m.heads[k]);
  }
  return ck;
}

RwmModel rwm_from_checkpoint(const diffgraph::Checkpoint& ck) {
  if (ck.meta.value("kind", "") != "rwm") fail(ErrorCode::IoError, "checkpoint is not a reward model");
  RwmConfig cfg;
  cfg.trunk_hidden = ck.meta.at("trunk_hidden").get<int>();
  cfg.trunk_out = ck.meta.at("trunk_out").get<int>();
  cfg.head_hidden = ck.meta.at("head_hidden").get<int>();
  cfg.seed = ck.meta.at("seed").get<std::uint64_t>();
  cfg.loss_weights = ck.meta.at("loss_weights").get<std::array<double, kNumHeads>>();
  RwmModel m = make_rwm(ck.meta.at("feature_size").get<int>(), cfg);
  const auto mean = ck.meta.at("feat_mean").get<std::vector<double>>();
  const auto scale = ck.meta.at("feat_scale").get<std::vector<double>>();
  m.feat_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.feat_scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  m.trunk = ck.bundle("rwm.trunk");
  for (int k = 0; k < kNumHeads; ++k) {
    m.heads[k] = ck.bundle("rwm.head." + std::string(metrics::metric_name(metrics::kRewardMetrics[k])));
  }
  return m;
}

}  // namespace irlvla::rwm
