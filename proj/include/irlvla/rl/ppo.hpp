#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "irlvla/diffgraph/adam.hpp"
#include "irlvla/metrics/oracle.hpp"
#include "irlvla/policy/diffusion_policy.hpp"
#include "irlvla/rwm/reward_model.hpp"

namespace irlvla::rl {

using diffgraph::Matrix;
using diffgraph::Vector;

struct PPOConfig {
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;              // K inner epochs per collected batch
  double lr = 1e-5;            // policy
  double critic_lr = 1e-3;
  double weight_decay = 0.0;
  double w_il = 0.5;
  double il_lambda = 0.1;      // BCE weight inside the imitation term
  int il_batch = 32;
  double kl_coef = 0.1;
  double kl_bound = 1.0;       // acceptance bound on the final mean per-step KL
  int group_size = 16;         // T_trajs chains per scene group
  int scenes_per_iter = 8;
  int iterations = 50;
  int critic_hidden = 64;
  std::uint64_t seed = 0;
};

void validate(const PPOConfig& c);

// Per-scene inputs that stay fixed during RL.
struct RlScene {
  const scene::Scene* scene = nullptr;
  const scene::FeatureGrid* grid = nullptr;
  Matrix conditions;  // policy conditions, cond_dim x K
};

// Probe scenes additionally carry the expert's metric vector and progress so
// the oracle EPDMS of a policy can be computed without re-planning.
struct ProbeScene {
  RlScene rl;
  metrics::MetricVector human;
  double reference_progress = 0.0;
};

struct RolloutGroup {
  int scene = 0;  // index into the scene list passed to collect_rollouts
  int anchor = 0;
  Vector condition;
  double value = 0.0;  // V_phi(c)
  std::vector<policy::DenoiseChain> chains;
  std::vector<double> rewards;                     // terminal RWM reward per chain
  std::vector<std::vector<double>> ref_logprobs;   // per chain, per transition
  std::vector<std::vector<Vector>> ref_means;      // per chain, per transition
  std::vector<scene::Trajectory> trajectories;     // decoded x_0, world frame
};

struct RolloutBatch {
  std::vector<RolloutGroup> groups;
  std::size_t num_chains() const;
};

diffgraph::ParamBundle make_critic(int cond_dim, int hidden, std::uint64_t seed);
double critic_value(const diffgraph::ParamBundle& critic, const Vector& c);

// Terminal reward the RL stage optimizes: the RWM's aggregate on the decoded
// trajectory.
double rwm_reward(const rwm::RwmModel& rwm, const scene::Scene& scene, const scene::FeatureGrid& grid,
                  const scene::Trajectory& world_traj, const scene::SceneConfig& cfg,
                  const rwm::RwmWeights& w = {});

// One group per listed scene, parallel over scenes. The group anchor is the
// policy's argmax-score anchor.
RolloutBatch collect_rollouts(const policy::PolicyModel& pol, const policy::PolicyModel& ref,
                              const diffgraph::ParamBundle& critic, const rwm::RwmModel& rwm,
                              const std::vector<RlScene>& scenes, const std::vector<int>& which,
                              const PPOConfig& cfg, std::uint64_t seed,
                              const rwm::RwmWeights& w = {});
RolloutBatch collect_rollouts_serial(const policy::PolicyModel& pol, const policy::PolicyModel& ref,
                                     const diffgraph::ParamBundle& critic, const rwm::RwmModel& rwm,
                                     const std::vector<RlScene>& scenes, const std::vector<int>& which,
                                     const PPOConfig& cfg, std::uint64_t seed,
                                     const rwm::RwmWeights& w = {});

// GAE over one chain: rewards[i] and values[i] per transition i, value after
// the last transition taken as 0. Returns per-transition advantages.
std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double gamma, double lambda);

// z-score with population variance; all zeros for groups of one or with
// zero variance.
std::vector<double> group_standardize(const std::vector<double>& r);

struct AdvantageEstimate {
  std::vector<std::vector<double>> returns;     // R_epdms per group, per chain
  std::vector<std::vector<double>> advantages;  // standardized within the group
};

AdvantageEstimate estimate_advantages(const RolloutBatch& batch, const PPOConfig& cfg);

struct PolicyLossResult {
  double loss = 0.0;
  double surrogate = 0.0;
  double kl = 0.0;  // mean per-step KL to the reference
  double clip_fraction = 0.0;
  diffgraph::Gradients grads;
};

// Clipped surrogate with gamma^(t-1) step weights, t = 1 at the first
// denoising transition, minus kl_coef * KL; loss = -surrogate + kl_coef * KL.
PolicyLossResult ppo_policy_loss(const policy::PolicyModel& pol, const RolloutBatch& batch,
                                 const AdvantageEstimate& adv, const PPOConfig& cfg,
                                 bool with_grads = true);

double gaussian_kl(const Vector& mu_p, const Vector& mu_q, double sigma);

struct ValueLossResult {
  double loss = 0.0;
  diffgraph::Gradients grads;
};

ValueLossResult value_loss(const diffgraph::ParamBundle& critic, const Matrix& conditions,
                           const std::vector<double>& returns, bool with_grads = true);

struct IterationLog {
  int iteration = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double reward_min = 0.0;
  double reward_max = 0.0;
  double probe_epdms = 0.0;
  double kl = 0.0;
  double policy_loss = 0.0;
  double surrogate = 0.0;
  double il_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

std::string log_header();
std::string log_row(const IterationLog& r);

double probe_epdms(const policy::PolicyModel& pol, const std::vector<ProbeScene>& probes,
                   const metrics::MetricConfig& mcfg, const metrics::EpdmsWeights& w);

struct RlState {
  policy::PolicyModel policy;
  diffgraph::ParamBundle critic;
  diffgraph::AdamState policy_opt;
  diffgraph::AdamState critic_opt;
  int iteration = 0;  // completed iterations
};

struct RlHooks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(const RlState&)> on_checkpoint;  // called every checkpoint_every iterations
  int checkpoint_every = 10;
};

// Runs iterations state.iteration + 1 .. cfg.iterations. Every iteration
// draws from mix_seed(cfg.seed, iteration), so a resumed run replays the same
// stream. Throws DivergenceDetected on a non-finite loss, after invoking
// on_checkpoint with the last finite state.
std::vector<IterationLog> train_rl(RlState& state, const policy::PolicyModel& ref,
                                   const rwm::RwmModel& rwm, const std::vector<RlScene>& scenes,
                                   const std::vector<policy::ImitationItem>& il_items,
                                   const std::vector<ProbeScene>& probes, const PPOConfig& cfg,
                                   const metrics::MetricConfig& mcfg,
                                   const metrics::EpdmsWeights& ew, const RlHooks& hooks = {});

}  // namespace irlvla::rl
