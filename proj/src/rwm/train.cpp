#include "irlvla/rwm/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/common/stats.hpp"

namespace irlvla::rwm {

using metrics::Metric;
using metrics::MetricKind;

LabeledSet subset(const LabeledSet& s, const std::vector<std::size_t>& idx) {
  LabeledSet out;
  out.features.resize(s.features.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.features.col(static_cast<Eigen::Index>(i)) = s.features.col(static_cast<Eigen::Index>(idx[i]));
    out.targets.push_back(s.targets[idx[i]]);
    out.oracle_epdms.push_back(s.oracle_epdms[idx[i]]);
    out.scene_ids.push_back(s.scene_ids[idx[i]]);
  }
  return out;
}

SceneSplit split_scenes(std::vector<std::string> ids, double val_fraction, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(mix_seed(seed, 0x73706c));
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(ids.size())));
  if (ids.size() > 1) n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  SceneSplit s;
  s.val.assign(ids.begin(), ids.begin() + static_cast<long>(n_val));
  s.train.assign(ids.begin() + static_cast<long>(n_val), ids.end());
  return s;
}

std::vector<std::size_t> select_scenes(const std::vector<std::string>& sample_ids,
                                       const std::vector<std::string>& ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    if (keep.count(sample_ids[i])) out.push_back(i);
  }
  return out;
}

RwmReport evaluate_rwm(const RwmModel& m, const LabeledSet& val, const RwmWeights& w) {
  RwmReport r;
  r.samples = val.size();
  if (val.size() == 0) return r;
  const auto preds = predict_metrics(m, val.features);
  r.val_loss = rwm_loss(m, val.features, val.targets, false).loss;
  std::vector<double> reward;
  for (std::size_t i = 0; i < val.size(); ++i) reward.push_back(predict_epdms(preds[i], w));
  for (int h = 0; h < kNumHeads; ++h) {
    const Metric metric = metrics::kRewardMetrics[h];
    double hits = 0.0, abs_err = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double y = val.targets[i].get(metric);
      switch (metrics::metric_kind(metric)) {
        case MetricKind::ThreeWay: {
          const auto& p = preds[i].probs[metric == Metric::NC ? 0 : 1];
          const auto cls = std::max_element(p.begin(), p.end()) - p.begin();
          hits += cls == three_way_class(y);
          break;
        }
        case MetricKind::Binary:
          hits += (preds[i].r[h] >= 0.5) == (y >= 0.5);
          break;
        case MetricKind::Continuous:
          abs_err += std::abs(preds[i].r[h] - y);
          break;
      }
    }
    const double n = static_cast<double>(val.size());
    if (metric == Metric::EP) {
      r.ep_mae = abs_err / n;
      r.accuracy[h] = 1.0 - r.ep_mae;
    } else {
      r.accuracy[h] = hits / n;
    }
  }
  r.spearman = spearman(reward, val.oracle_epdms);
  return r;
}

namespace {

struct Optim {
  diffgraph::AdamState trunk;
  std::array<diffgraph::AdamState, kNumHeads> heads;
};

}  // namespace

RwmTrainResult train_rwm(const LabeledSet& train, const LabeledSet& val, const RwmConfig& cfg,
                         const RwmTrainConfig& tcfg, const RwmWeights& w,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.size() == 0) fail(ErrorCode::EmptyDataset, "reward training set is empty");
  const LabeledSet& monitor = val.size() ? val : train;
  RwmModel m = make_rwm(static_cast<int>(train.features.rows()), cfg);
  m.feat_mean = train.features.rowwise().mean();
  const Matrix centered = train.features.colwise() - m.feat_mean;
  m.feat_scale = (centered.array().square().rowwise().sum() / static_cast<double>(train.size()))
                     .sqrt()
                     .matrix();
  for (Eigen::Index i = 0; i < m.feat_scale.size(); ++i) {
    if (!(m.feat_scale(i) > 1e-6)) m.feat_scale(i) = 1.0;
  }

  Optim opt{diffgraph::make_adam_state(m.trunk), {}};
  for (int h = 0; h < kNumHeads; ++h) opt.heads[h] = diffgraph::make_adam_state(m.heads[h]);
  diffgraph::AdamConfig acfg;
  acfg.lr = tcfg.lr;
  acfg.weight_decay = tcfg.weight_decay;

  RwmTrainResult out{m, {}};
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(tcfg.seed, 0x72776d));
  std::vector<EpochLog> log;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double train_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch));
      Matrix f(train.features.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<metrics::MetricVector> y;
      for (std::size_t i = start; i < end; ++i) {
        f.col(static_cast<Eigen::Index>(i - start)) = train.features.col(static_cast<Eigen::Index>(order[i]));
        y.push_back(train.targets[order[i]]);
      }
      const RwmLossResult r = rwm_loss(m, f, y);
      if (!std::isfinite(r.loss)) fail(ErrorCode::DivergenceDetected, "reward model loss is not finite");
      diffgraph::adam_step(m.trunk, r.trunk_grads, opt.trunk, acfg);
      for (int h = 0; h < kNumHeads; ++h) diffgraph::adam_step(m.heads[h], r.head_grads[h], opt.heads[h], acfg);
      train_loss += r.loss * static_cast<double>(end - start);
      seen += end - start;
    }
    EpochLog e{epoch, train_loss / static_cast<double>(seen),
               rwm_loss(m, monitor.features, monitor.targets, false).loss};
    log.push_back(e);
    if (on_epoch) on_epoch(e);
    if (e.val_loss < best) {
      best = e.val_loss;
      since_best = 0;
      out.model = m;
      out.report.best_epoch = epoch;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }
  const int best_epoch = out.report.best_epoch;
  out.report = evaluate_rwm(out.model, monitor, w);
  out.report.best_epoch = best_epoch;
  out.report.epochs_run = static_cast<int>(log.size());
  out.report.train_size = train.size();
  out.report.epochs = std::move(log);
  return out;
}

nlohmann::json to_json(const RwmReport& r) {
  nlohmann::json j;
  nlohmann::json acc;
  for (int h = 0; h < kNumHeads; ++h) {
    const Metric metric = metrics::kRewardMetrics[h];
    if (metric == Metric::EP) continue;
    acc[std::string(metrics::metric_name(metric))] = r.accuracy[h];
  }
  j["accuracy"] = acc;
  j["ep_mae"] = r.ep_mae;
  j["spearman"] = r.spearman;
  j["val_loss"] = r.val_loss;
  j["val_samples"] = r.samples;
  j["train_samples"] = r.train_size;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run;
  return j;
}

std::string report_csv(const RwmReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "metric,value\n";
  for (int h = 0; h < kNumHeads; ++h) {
    const Metric metric = metrics::kRewardMetrics[h];
    if (metric == Metric::EP) {
      os << "EP_MAE," << r.ep_mae << '\n';
    } else {
      os << metrics::metric_name(metric) << "_accuracy," << r.accuracy[h] << '\n';
    }
  }
  os << "spearman," << r.spearman << '\n';
  return os.str();
}

}  // namespace irlvla::rwm
