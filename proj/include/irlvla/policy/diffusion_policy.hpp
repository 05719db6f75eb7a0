#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "irlvla/anchors/kmeans.hpp"
#include "irlvla/diffgraph/adam.hpp"
#include "irlvla/diffgraph/checkpoint.hpp"
#include "irlvla/diffgraph/mlp.hpp"
#include "irlvla/policy/schedule.hpp"
#include "irlvla/scene/types.hpp"

namespace irlvla::policy {

using diffgraph::Matrix;
using diffgraph::Vector;

struct PolicyConfig {
  int hidden = 128;
  int depth = 2;               // hidden layers
  double pos_scale = 4.0;      // meters per normalized unit
  double heading_scale = 0.3;  // radians per normalized unit
  int tau = 8;
  double beta_start = 1e-4;
  double beta_end = 0.2;
  double sigma_scale = 1.0;
  double sigma_min = 0.01;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

// Trajectories live in a normalized space z = (traj - mean) / scale, with the
// trajectory flattened as [x1, y1, theta1, ..., xl, yl, thetal] in the ego
// frame at t = 0. The condition vector of one anchor is
//   [anchor z | grid channels at each anchor waypoint | v0/10, a0/3 | command one-hot].
// The denoiser maps [x_t | sqrt(ab_t), sqrt(1-ab_t), t/tau | c] to a residual
// on the anchor (x0_hat = anchor_z + delta) and one score logit.
struct PolicyModel {
  PolicyConfig cfg;
  scene::SceneConfig scene_cfg;
  NoiseSchedule schedule;
  anchors::AnchorSet anchors;
  Vector mean;
  Vector scale;
  Matrix anchor_z;  // traj_dim x K
  diffgraph::ParamBundle net;

  int horizon() const { return scene_cfg.horizon; }
  int traj_dim() const { return 3 * scene_cfg.horizon; }
  int num_channels() const { return 3 + scene_cfg.occupancy_buckets; }
  int cond_dim() const { return traj_dim() + horizon() * num_channels() + 2 + scene::kNumCommands; }
  int input_dim() const { return traj_dim() + 3 + cond_dim(); }
  int num_anchors() const { return static_cast<int>(anchor_z.cols()); }
};

PolicyModel make_policy(const anchors::AnchorSet& anchors, const PolicyConfig& cfg,
                        const scene::SceneConfig& scene_cfg);

scene::Trajectory ego_to_world(const scene::Trajectory& t, const scene::Waypoint& origin);
scene::Trajectory world_to_ego(const scene::Trajectory& t, const scene::Waypoint& origin);

Vector encode(const PolicyModel& m, const scene::Trajectory& ego_traj);
// Wraps headings and caps step spacing at v_max * dt.
scene::Trajectory decode(const PolicyModel& m, const Vector& z);

// One condition column per anchor (cond_dim x K).
Matrix scene_conditions(const PolicyModel& m, const scene::Scene& scene,
                        const scene::FeatureGrid& grid);

struct DenoiseOutput {
  Matrix x0_hat;  // traj_dim x N
  Matrix means;   // traj_dim x N, mu_theta(x_t, c, t)
  Vector logits;
  Vector scores;  // sigmoid(logits)
};

struct DenoiseForward {
  DenoiseOutput out;
  diffgraph::Tape tape;
};

// One network evaluation per column. Throws ShapeMismatch.
DenoiseOutput denoise(const PolicyModel& m, const Matrix& x_t, int t, const Matrix& c);
DenoiseForward denoise_forward(const PolicyModel& m, const Matrix& x_t, int t, const Matrix& c);

// Per-column diffusion steps; used when one batch mixes noise levels.
DenoiseForward denoise_forward_steps(const PolicyModel& m, const Matrix& x_t,
                                     const std::vector<int>& steps, const Matrix& c);
diffgraph::Gradients denoise_backward_steps(const PolicyModel& m, DenoiseForward& fwd,
                                            const std::vector<int>& steps, const Matrix& d_means,
                                            const Matrix& d_x0, const Vector& d_logits);
DenoiseOutput denoise_steps(const PolicyModel& m, const Matrix& x_t, const std::vector<int>& steps,
                            const Matrix& c);

// Pulls dL/d(means), dL/d(x0_hat) and dL/d(logits) back to parameter gradients.
// Any of the three may be empty (treated as zero).
diffgraph::Gradients denoise_backward(const PolicyModel& m, DenoiseForward& fwd, int t,
                                      const Matrix& d_means, const Matrix& d_x0,
                                      const Vector& d_logits);

// Recorded chain. states[i] is x_{tau-i}, i = 0..tau; means[i] and sigmas[i]
// describe the transition states[i] -> states[i+1].
struct DenoiseChain {
  int anchor = 0;
  Vector condition;
  std::vector<Vector> states;
  std::vector<Vector> means;
  std::vector<double> sigmas;
};

// Chains start from the anchor noised to step tau. Chain j draws from
// mix_seed(seed, j). With `noiseless`, the start is sqrt(ab_tau) * anchor and
// every transition is its mean.
std::vector<DenoiseChain> sample_chains(const PolicyModel& m, int anchor, const Vector& c, int n,
                                        std::uint64_t seed, bool noiseless = false);
DenoiseChain sample_chain(const PolicyModel& m, int anchor, const Vector& c, std::uint64_t seed);

double transition_logprob(const Vector& mu, double sigma, const Vector& x_prev);
double chain_logprob(const DenoiseChain& chain);
// Per-transition log-probabilities of a recorded chain under (possibly
// different) parameters `m`.
std::vector<double> chain_step_logprobs(const PolicyModel& m, const DenoiseChain& chain);

struct Decision {
  int anchor = 0;
  Vector scores;
  scene::Trajectory ego_traj;
  scene::Trajectory world_traj;
  Vector condition;
};

// Noiseless denoising of every anchor; returns the highest-scoring result.
Decision infer(const PolicyModel& m, const scene::Scene& scene, const scene::FeatureGrid& grid);
// Same, with conditions precomputed by scene_conditions().
Decision infer(const PolicyModel& m, const scene::Scene& scene, const Matrix& conditions);

// Training sample for the imitation loss with precomputed conditions.
struct ImitationItem {
  Matrix conditions;  // cond_dim x K
  Vector gt_z;
  int target = 0;     // assigned anchor index
};

struct ImitationResult {
  double loss = 0.0;
  double l1 = 0.0;    // mean absolute error in physical units on the assigned anchor
  double bce = 0.0;
  double accuracy = 0.0;  // fraction whose top score hits the target
  diffgraph::Gradients grads;
};

// L = mean over items of [ L1(x0_hat_target, gt) + lambda * sum_k BCE(s_k, y_k) ],
// with each item noised at a random step t in 1..tau. L1 is measured in
// physical units (meters / radians). With `with_grads` false, grads is empty.
ImitationResult imitation_loss(const PolicyModel& m, const std::vector<const ImitationItem*>& batch,
                               double lambda, std::uint64_t seed, bool with_grads = true);

// Same objective at a fixed step with fixed noised inputs; exposed for tests.
ImitationResult imitation_loss_at(const PolicyModel& m, const std::vector<const ImitationItem*>& batch,
                                  const std::vector<Matrix>& x_t, const std::vector<int>& steps,
                                  double lambda, bool with_grads = true);

inline constexpr double kBceClamp = 1e-6;
double bce(double p, double y);

diffgraph::Checkpoint policy_checkpoint(const PolicyModel& m);
PolicyModel policy_from_checkpoint(const diffgraph::Checkpoint& ckpt,
                                   const scene::SceneConfig& scene_cfg);

}  // namespace irlvla::policy
