#include "irlvla/rwm/dataset.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/rwm/features.hpp"
#include "irlvla/scene/expert.hpp"

namespace irlvla::rwm {

using scene::Trajectory;

std::string provenance_family(const std::string& tag) {
  return tag.rfind("kmeans-", 0) == 0 ? "kmeans" : tag;
}

scene::Scene with_ego(const scene::Scene& s, const scene::EgoState& ego) {
  scene::Scene out = s;
  out.ego0 = ego;
  return out;
}

const scene::Scene& sample_scene(const RewardSample& r, const scene::Scene& base, scene::Scene& scratch) {
  if (!r.ego_override) return base;
  scratch = with_ego(base, *r.ego_override);
  return scratch;
}

namespace {

struct Labeler {
  const scene::Scene& base;
  const metrics::MetricVector& human;
  double reference;
  const metrics::MetricConfig& mcfg;
  const metrics::EpdmsWeights& weights;

  RewardSample make(const std::string& tag, const Trajectory& traj,
                    const std::optional<scene::EgoState>& ego) const {
    RewardSample r;
    r.scene_id = base.id;
    r.provenance = tag;
    r.traj = traj;
    r.ego_override = ego;
    r.reference_progress = reference;
    r.human = human;
    metrics::ScoringOptions opts;
    opts.reference_progress = reference;
    if (ego) {
      r.metrics = metrics::score_trajectory(traj, with_ego(base, *ego), mcfg, opts);
    } else {
      r.metrics = metrics::score_trajectory(traj, base, mcfg, opts);
    }
    r.oracle_epdms = metrics::aggregate_epdms(r.metrics, human, weights);
    return r;
  }
};

}  // namespace

std::vector<RewardSample> collect_scene_samples(const scene::SceneRecord& rec,
                                                const std::vector<anchors::AnchorSet>& anchor_sets,
                                                const policy::PolicyModel& noise_model,
                                                const CollectConfig& cfg,
                                                const metrics::MetricConfig& mcfg,
                                                const metrics::EpdmsWeights& weights,
                                                std::uint64_t seed) {
  if (!rec.expert) fail(ErrorCode::ExpertInfeasible, "scene " + rec.scene.id + " has no expert");
  const scene::Scene& sc = rec.scene;
  const Trajectory& expert = *rec.expert;
  const double reference = metrics::centerline_progress(expert, sc);
  metrics::ScoringOptions opts;
  opts.reference_progress = reference;
  const metrics::MetricVector human = metrics::score_trajectory(expert, sc, mcfg, opts);
  const Labeler lab{sc, human, reference, mcfg, weights};
  const Trajectory expert_ego = policy::world_to_ego(expert, sc.ego0.pose);
  Rng rng(mix_seed(seed, 0x7277));

  std::vector<RewardSample> out;
  if (cfg.expert) out.push_back(lab.make("expert", expert, std::nullopt));

  if (cfg.diffusion_step) {
    const Eigen::VectorXd z = policy::encode(noise_model, expert_ego);
    for (int t = 1; t <= noise_model.schedule.tau; ++t) {
      for (int j = 0; j < cfg.diffusion_per_step; ++j) {
        const Eigen::MatrixXd zt = policy::forward_noise(z, t, noise_model.schedule,
                                                         mix_seed(seed, 0x6466, t * 1000 + j));
        const Trajectory traj = policy::ego_to_world(policy::decode(noise_model, zt.col(0)), sc.ego0.pose);
        out.push_back(lab.make("diffusion-step", traj, std::nullopt));
      }
    }
  }

  if (cfg.kmeans) {
    for (const auto& set : anchor_sets) {
      const std::string tag = "kmeans-" + std::to_string(set.K);
      std::vector<std::size_t> picks{anchors::assign(expert_ego, set)};
      for (int j = 0; j < cfg.kmeans_random; ++j) {
        picks.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(set.size()) - 1)));
      }
      for (std::size_t k : picks) {
        out.push_back(lab.make(tag, policy::ego_to_world(set.anchors[k], sc.ego0.pose), std::nullopt));
      }
    }
  }

  if (cfg.ego_perturbation) {
    for (int j = 0; j < cfg.ego_perturbations; ++j) {
      scene::EgoState ego = sc.ego0;
      const double lat = rng.uniform(-cfg.perturb_lateral, cfg.perturb_lateral);
      ego.pose.x -= lat * std::sin(sc.ego0.pose.theta);
      ego.pose.y += lat * std::cos(sc.ego0.pose.theta);
      ego.pose.theta = scene::wrap_angle(ego.pose.theta +
                                         rng.uniform(-cfg.perturb_heading, cfg.perturb_heading));
      ego.speed = std::max(0.0, ego.speed * (1.0 + rng.uniform(-cfg.perturb_speed, cfg.perturb_speed)));
      out.push_back(lab.make("ego-perturbation", policy::ego_to_world(expert_ego, ego.pose), ego));
      try {
        const Trajectory replanned = scene::expert_trajectory(with_ego(sc, ego), noise_model.scene_cfg);
        out.push_back(lab.make("ego-perturbation", replanned, ego));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ExpertInfeasible) throw;
      }
    }
  }
  return out;
}

std::vector<RewardSample> collect_reward_samples(const std::vector<scene::SceneRecord>& records,
                                                 const std::vector<anchors::AnchorSet>& anchor_sets,
                                                 const policy::PolicyModel& noise_model,
                                                 const CollectConfig& cfg,
                                                 const metrics::MetricConfig& mcfg,
                                                 const metrics::EpdmsWeights& weights,
                                                 std::uint64_t seed) {
  std::vector<std::vector<RewardSample>> per(records.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(records.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    if (!records[i].expert) continue;
    try {
      per[i] = collect_scene_samples(records[i], anchor_sets, noise_model, cfg, mcfg, weights,
                                     mix_seed(seed, static_cast<std::uint64_t>(i)));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<RewardSample> out;
  for (auto& v : per) {
    for (auto& s : v) out.push_back(std::move(s));
  }
  return out;
}

std::vector<RewardSample> collect_reward_samples_serial(
    const std::vector<scene::SceneRecord>& records, const std::vector<anchors::AnchorSet>& anchor_sets,
    const policy::PolicyModel& noise_model, const CollectConfig& cfg,
    const metrics::MetricConfig& mcfg, const metrics::EpdmsWeights& weights, std::uint64_t seed) {
  std::vector<RewardSample> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].expert) continue;
    auto v = collect_scene_samples(records[i], anchor_sets, noise_model, cfg, mcfg, weights,
                                   mix_seed(seed, static_cast<std::uint64_t>(i)));
    for (auto& s : v) out.push_back(std::move(s));
  }
  return out;
}

namespace {

nlohmann::json metrics_json(const metrics::MetricVector& m) {
  nlohmann::json j;
  for (metrics::Metric k : metrics::kRewardMetrics) j[std::string(metrics::metric_name(k))] = m.get(k);
  if (m.ec) j["EC"] = *m.ec;
  return j;
}

metrics::MetricVector metrics_from_json(const nlohmann::json& j) {
  metrics::MetricVector m;
  for (metrics::Metric k : metrics::kRewardMetrics) m.set(k, j.at(std::string(metrics::metric_name(k))).get<double>());
  if (j.contains("EC")) m.ec = j.at("EC").get<double>();
  return m;
}

}  // namespace

nlohmann::json to_json(const RewardSample& s) {
  nlohmann::json j;
  j["v"] = scene::kDatasetVersion;
  j["scene_id"] = s.scene_id;
  j["provenance"] = s.provenance;
  j["traj"] = scene::to_json(s.traj);
  j["ego"] = s.ego_override ? scene::to_json(*s.ego_override) : nlohmann::json(nullptr);
  j["reference_progress"] = s.reference_progress;
  j["metrics"] = metrics_json(s.metrics);
  j["human"] = metrics_json(s.human);
  j["epdms"] = s.oracle_epdms;
  return j;
}

RewardSample reward_sample_from_json(const nlohmann::json& j) {
  RewardSample s;
  s.scene_id = j.at("scene_id").get<std::string>();
  s.provenance = j.at("provenance").get<std::string>();
  s.traj = scene::trajectory_from_json(j.at("traj"));
  if (!j.at("ego").is_null()) s.ego_override = scene::ego_from_json(j.at("ego"));
  s.reference_progress = j.at("reference_progress").get<double>();
  s.metrics = metrics_from_json(j.at("metrics"));
  s.human = metrics_from_json(j.at("human"));
  s.oracle_epdms = j.at("epdms").get<double>();
  return s;
}

void write_reward_dataset(const std::string& path, const std::vector<RewardSample>& samples) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path);
  for (const auto& s : samples) os << to_json(s).dump() << '\n';
}

std::vector<RewardSample> read_reward_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::MissingDataset, "reward dataset not found: " + path);
  std::vector<RewardSample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("v", "") != scene::kDatasetVersion) {
      fail(ErrorCode::IoError, "unsupported reward dataset version in " + path);
    }
    out.push_back(reward_sample_from_json(j));
  }
  return out;
}

diffgraph::Matrix sample_features(const std::vector<RewardSample>& samples, const SceneTable& table,
                                  const scene::SceneConfig& cfg) {
  diffgraph::Matrix f(traj_feature_size(cfg), static_cast<Eigen::Index>(samples.size()));
  std::exception_ptr error;
  const auto n = static_cast<long>(samples.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& s = samples[i];
      const auto sit = table.scenes.find(s.scene_id);
      const auto git = table.grids.find(s.scene_id);
      if (sit == table.scenes.end() || git == table.grids.end()) {
        fail(ErrorCode::MissingDataset, "no scene '" + s.scene_id + "' for reward sample");
      }
      scene::Scene scratch;
      f.col(i) = extract_traj_feature(sample_scene(s, *sit->second, scratch), *git->second, s.traj, cfg);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return f;
}

}  // namespace irlvla::rwm
