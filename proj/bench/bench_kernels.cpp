// Serial references vs their OpenMP counterparts. Set OMP_NUM_THREADS to vary
// the thread count of the parallel variants.
#include <benchmark/benchmark.h>

#include <vector>

#include "irlvla/anchors/kmeans.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/metrics/batch.hpp"
#include "irlvla/policy/diffusion_policy.hpp"
#include "irlvla/rl/ppo.hpp"
#include "irlvla/rwm/dataset.hpp"
#include "irlvla/rwm/features.hpp"
#include "irlvla/scene/expert.hpp"
#include "irlvla/scene/generator.hpp"
#include "irlvla/scene/raster.hpp"

using namespace irlvla;

namespace {

struct Corpus {
  std::vector<scene::SceneRecord> records;
  std::vector<scene::FeatureGrid> grids;
  std::vector<anchors::AnchorSet> anchor_sets;
  policy::PolicyModel policy;
  rwm::RwmModel rwm;
  diffgraph::ParamBundle critic;
  std::vector<rl::RlScene> rl_scenes;

  Corpus() {
    for (std::uint64_t i = 0; records.size() < 32; ++i) {
      scene::SceneRecord r;
      r.scene = scene::generate_scene(mix_seed(7, i), static_cast<scene::Difficulty>(i % 3));
      try {
        r.expert = scene::expert_trajectory(r.scene);
      } catch (...) {
        continue;
      }
      records.push_back(r);
    }
    std::vector<scene::Trajectory> demos;
    for (const auto& r : records) demos.push_back(policy::world_to_ego(*r.expert, r.scene.ego0.pose));
    anchor_sets.push_back(anchors::kmeans_fit(demos, 8, 1));
    policy::PolicyConfig pc;
    pc.hidden = 64;
    policy = policy::make_policy(anchor_sets[0], pc, scene::SceneConfig{});
    rwm = rwm::make_rwm(rwm::traj_feature_size(scene::SceneConfig{}), rwm::RwmConfig{});
    critic = rl::make_critic(policy.cond_dim(), 64, 1);
    for (const auto& r : records) grids.push_back(scene::rasterize(r.scene));
    for (std::size_t i = 0; i < records.size(); ++i) {
      rl_scenes.push_back({&records[i].scene, &grids[i], policy::scene_conditions(policy, records[i].scene, grids[i])});
    }
  }
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

std::vector<metrics::ScoreJob> score_jobs() {
  std::vector<metrics::ScoreJob> jobs;
  for (const auto& r : corpus().records) {
    for (int k = 0; k < 8; ++k) jobs.push_back({&r.scene, &*r.expert, 20.0});
  }
  return jobs;
}

void BM_rasterize_serial(benchmark::State& st) {
  const auto& s = corpus().records[0].scene;
  for (auto _ : st) benchmark::DoNotOptimize(scene::rasterize_serial(s));
}
void BM_rasterize_parallel(benchmark::State& st) {
  const auto& s = corpus().records[0].scene;
  for (auto _ : st) benchmark::DoNotOptimize(scene::rasterize(s));
}

void BM_score_batch_serial(benchmark::State& st) {
  const auto jobs = score_jobs();
  for (auto _ : st) benchmark::DoNotOptimize(metrics::score_batch_serial(jobs));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(jobs.size()));
}
void BM_score_batch_parallel(benchmark::State& st) {
  const auto jobs = score_jobs();
  for (auto _ : st) benchmark::DoNotOptimize(metrics::score_batch(jobs));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(jobs.size()));
}

void BM_reward_samples_serial(benchmark::State& st) {
  const auto& c = corpus();
  const std::vector<scene::SceneRecord> recs(c.records.begin(), c.records.begin() + 8);
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        rwm::collect_reward_samples_serial(recs, c.anchor_sets, c.policy, {}, {}, {}, 3));
  }
}
void BM_reward_samples_parallel(benchmark::State& st) {
  const auto& c = corpus();
  const std::vector<scene::SceneRecord> recs(c.records.begin(), c.records.begin() + 8);
  for (auto _ : st) {
    benchmark::DoNotOptimize(rwm::collect_reward_samples(recs, c.anchor_sets, c.policy, {}, {}, {}, 3));
  }
}

void BM_rollouts_serial(benchmark::State& st) {
  const auto& c = corpus();
  rl::PPOConfig cfg;
  const std::vector<int> which{0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        rl::collect_rollouts_serial(c.policy, c.policy, c.critic, c.rwm, c.rl_scenes, which, cfg, 5));
  }
}
void BM_rollouts_parallel(benchmark::State& st) {
  const auto& c = corpus();
  rl::PPOConfig cfg;
  const std::vector<int> which{0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : st) {
    benchmark::DoNotOptimize(rl::collect_rollouts(c.policy, c.policy, c.critic, c.rwm, c.rl_scenes, which, cfg, 5));
  }
}

}  // namespace

BENCHMARK(BM_rasterize_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_rasterize_parallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_score_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_batch_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reward_samples_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reward_samples_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rollouts_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rollouts_parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
