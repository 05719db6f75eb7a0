#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "irlvla/anchors/kmeans.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/policy/diffusion_policy.hpp"
#include "irlvla/scene/scene_io.hpp"

namespace irlvla::rwm {

// Provenance tags: "expert", "diffusion-step", "kmeans-<K>", "ego-perturbation".
struct RewardSample {
  std::string scene_id;
  std::string provenance;
  scene::Trajectory traj;                      // world frame
  std::optional<scene::EgoState> ego_override; // start state the trajectory was scored from
  double reference_progress = 0.0;             // expert progress used for EP
  metrics::MetricVector metrics;
  metrics::MetricVector human;                 // expert's vector on the unperturbed scene
  double oracle_epdms = 0.0;
};

// "kmeans-64" -> "kmeans"; other tags map to themselves.
std::string provenance_family(const std::string& tag);

struct CollectConfig {
  bool expert = true;
  bool diffusion_step = true;
  bool kmeans = true;
  bool ego_perturbation = true;
  int diffusion_per_step = 2;    // noised expert copies per diffusion step
  int kmeans_random = 5;         // random anchors per K, besides the nearest one
  int ego_perturbations = 4;
  double perturb_lateral = 1.0;  // m, uniform half-range
  double perturb_heading = 0.15; // rad
  double perturb_speed = 0.3;    // fractional
};

scene::Scene with_ego(const scene::Scene& s, const scene::EgoState& ego);
const scene::Scene& sample_scene(const RewardSample& r, const scene::Scene& base, scene::Scene& scratch);

// `noise_model` supplies the trajectory normalization and noise schedule used
// for diffusion-step samples. Requires rec.expert.
std::vector<RewardSample> collect_scene_samples(const scene::SceneRecord& rec,
                                                const std::vector<anchors::AnchorSet>& anchor_sets,
                                                const policy::PolicyModel& noise_model,
                                                const CollectConfig& cfg,
                                                const metrics::MetricConfig& mcfg,
                                                const metrics::EpdmsWeights& weights,
                                                std::uint64_t seed);

// Parallel over scenes; records without an expert are skipped. Output is in
// record order and identical to the serial version.
std::vector<RewardSample> collect_reward_samples(const std::vector<scene::SceneRecord>& records,
                                                 const std::vector<anchors::AnchorSet>& anchor_sets,
                                                 const policy::PolicyModel& noise_model,
                                                 const CollectConfig& cfg,
                                                 const metrics::MetricConfig& mcfg,
                                                 const metrics::EpdmsWeights& weights,
                                                 std::uint64_t seed);
std::vector<RewardSample> collect_reward_samples_serial(
    const std::vector<scene::SceneRecord>& records, const std::vector<anchors::AnchorSet>& anchor_sets,
    const policy::PolicyModel& noise_model, const CollectConfig& cfg,
    const metrics::MetricConfig& mcfg, const metrics::EpdmsWeights& weights, std::uint64_t seed);

nlohmann::json to_json(const RewardSample& s);
RewardSample reward_sample_from_json(const nlohmann::json& j);
void write_reward_dataset(const std::string& path, const std::vector<RewardSample>& samples);
// Throws MissingDataset when absent.
std::vector<RewardSample> read_reward_dataset(const std::string& path);

// Feature columns for samples, looked up by scene id. Grids must come from
// rasterize() of the base scenes (the raster does not depend on the ego).
struct SceneTable {
  std::map<std::string, const scene::Scene*> scenes;
  std::map<std::string, const scene::FeatureGrid*> grids;
};
diffgraph::Matrix sample_features(const std::vector<RewardSample>& samples, const SceneTable& table,
                                  const scene::SceneConfig& cfg);

}  // namespace irlvla::rwm
