#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "irlvla/rwm/reward_model.hpp"

namespace irlvla::rwm {

struct LabeledSet {
  Matrix features;  // columns are samples
  std::vector<metrics::MetricVector> targets;
  std::vector<double> oracle_epdms;
  std::vector<std::string> scene_ids;

  std::size_t size() const { return targets.size(); }
};

LabeledSet subset(const LabeledSet& s, const std::vector<std::size_t>& idx);

struct SceneSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

// Deterministic scene-level shuffle; the first round(val_fraction * n) scene
// ids (at least one when n > 1) go to validation.
SceneSplit split_scenes(std::vector<std::string> ids, double val_fraction, std::uint64_t seed);
// Indices of samples whose scene id is in `ids`.
std::vector<std::size_t> select_scenes(const std::vector<std::string>& sample_ids,
                                       const std::vector<std::string>& ids);

struct RwmTrainConfig {
  int max_epochs = 60;
  int batch = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int patience = 10;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct RwmReport {
  std::array<double, kNumHeads> accuracy{};  // EP entry holds 1 - MAE
  double ep_mae = 0.0;
  double spearman = 0.0;  // predicted reward vs oracle EPDMS
  double val_loss = 0.0;
  std::size_t samples = 0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t train_size = 0;
  std::vector<EpochLog> epochs;
};

RwmReport evaluate_rwm(const RwmModel& m, const LabeledSet& val, const RwmWeights& w = {});

struct RwmTrainResult {
  RwmModel model;
  RwmReport report;
};

// Standardizes features on the training set, runs minibatch AdamW, keeps the
// parameters with the best validation loss, stops after `patience` epochs
// without improvement. Throws EmptyDataset.
RwmTrainResult train_rwm(const LabeledSet& train, const LabeledSet& val, const RwmConfig& cfg,
                         const RwmTrainConfig& tcfg, const RwmWeights& w = {},
                         const std::function<void(const EpochLog&)>& on_epoch = {});

nlohmann::json to_json(const RwmReport& r);
// metric,accuracy rows plus EP_MAE, spearman.
std::string report_csv(const RwmReport& r);

}  // namespace irlvla::rwm
