#include "irlvla/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/rwm/features.hpp"

namespace irlvla::rl {

void validate(const PPOConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::ConfigInvalid, what); };
  if (!(c.clip_eps > 0.0 && c.clip_eps < 1.0)) bad("ppo.clip_eps must be in (0, 1)");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) bad("ppo.gamma must be in (0, 1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) bad("ppo.gae_lambda must be in [0, 1]");
  if (c.w_il < 0.0) bad("ppo.w_il must be >= 0");
  if (c.epochs < 1 || c.group_size < 1 || c.scenes_per_iter < 1 || c.iterations < 0) {
    bad("ppo epochs, group_size and scenes_per_iter must be positive");
  }
}

std::size_t RolloutBatch::num_chains() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.chains.size();
  return n;
}

diffgraph::ParamBundle make_critic(int cond_dim, int hidden, std::uint64_t seed) {
  return diffgraph::make_mlp("critic", {cond_dim, hidden, hidden, 1}, mix_seed(seed, 0x637274));
}

double critic_value(const diffgraph::ParamBundle& critic, const Vector& c) {
  return diffgraph::mlp_eval(critic, Matrix(c))(0, 0);
}

double rwm_reward(const rwm::RwmModel& rwm, const scene::Scene& scene, const scene::FeatureGrid& grid,
                  const scene::Trajectory& world_traj, const scene::SceneConfig& cfg,
                  const rwm::RwmWeights& w) {
  const Vector f = rwm::extract_traj_feature(scene, grid, world_traj, cfg);
  return rwm::predict_epdms(rwm::predict_metrics(rwm, f), w);
}

namespace {

RolloutGroup collect_group(const policy::PolicyModel& pol, const policy::PolicyModel& ref,
                           const diffgraph::ParamBundle& critic, const rwm::RwmModel& rwm,
                           const RlScene& s, int scene_index, const PPOConfig& cfg,
                           std::uint64_t seed, const rwm::RwmWeights& w) {
  RolloutGroup g;
  g.scene = scene_index;
  const policy::Decision dec = policy::infer(pol, *s.scene, s.conditions);
  g.anchor = dec.anchor;
  g.condition = s.conditions.col(dec.anchor);
  g.value = critic_value(critic, g.condition);
  g.chains = policy::sample_chains(pol, g.anchor, g.condition, cfg.group_size, seed);

  const int tau = pol.schedule.tau;
  std::vector<int> steps(tau);
  for (int i = 0; i < tau; ++i) steps[i] = tau - i;
  const Matrix cm = g.condition.replicate(1, tau);
  for (const auto& chain : g.chains) {
    Matrix x(pol.traj_dim(), tau);
    for (int i = 0; i < tau; ++i) x.col(i) = chain.states[i];
    const policy::DenoiseOutput o = policy::denoise_steps(ref, x, steps, cm);
    std::vector<double> lp(tau);
    std::vector<Vector> mu(tau);
    for (int i = 0; i < tau; ++i) {
      mu[i] = o.means.col(i);
      lp[i] = policy::transition_logprob(mu[i], chain.sigmas[i], chain.states[i + 1]);
    }
    g.ref_logprobs.push_back(std::move(lp));
    g.ref_means.push_back(std::move(mu));
    scene::Trajectory traj =
        policy::ego_to_world(policy::decode(pol, chain.states.back()), s.scene->ego0.pose);
    g.rewards.push_back(rwm_reward(rwm, *s.scene, *s.grid, traj, pol.scene_cfg, w));
    g.trajectories.push_back(std::move(traj));
  }
  return g;
}

}  // namespace

RolloutBatch collect_rollouts(const policy::PolicyModel& pol, const policy::PolicyModel& ref,
                              const diffgraph::ParamBundle& critic, const rwm::RwmModel& rwm,
                              const std::vector<RlScene>& scenes, const std::vector<int>& which,
                              const PPOConfig& cfg, std::uint64_t seed, const rwm::RwmWeights& w) {
  RolloutBatch b;
  b.groups.resize(which.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(which.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      b.groups[i] = collect_group(pol, ref, critic, rwm, scenes[which[i]], which[i], cfg,
                                  mix_seed(seed, static_cast<std::uint64_t>(i)), w);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return b;
}

RolloutBatch collect_rollouts_serial(const policy::PolicyModel& pol, const policy::PolicyModel& ref,
                                     const diffgraph::ParamBundle& critic, const rwm::RwmModel& rwm,
                                     const std::vector<RlScene>& scenes, const std::vector<int>& which,
                                     const PPOConfig& cfg, std::uint64_t seed,
                                     const rwm::RwmWeights& w) {
  RolloutBatch b;
  for (std::size_t i = 0; i < which.size(); ++i) {
    b.groups.push_back(collect_group(pol, ref, critic, rwm, scenes[which[i]], which[i], cfg,
                                     mix_seed(seed, static_cast<std::uint64_t>(i)), w));
  }
  return b;
}

std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        double gamma, double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> adv(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : 0.0;
    const double delta = rewards[i] + gamma * next_value - values[i];
    next_adv = delta + gamma * lambda * next_adv;
    adv[i] = next_adv;
  }
  return adv;
}

std::vector<double> group_standardize(const std::vector<double>& r) {
  std::vector<double> out(r.size(), 0.0);
  if (r.size() < 2) return out;
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= static_cast<double>(r.size());
  // Relative guard: spreads at rounding level carry no ranking information.
  if (!(var > 1e-24 * std::max(1.0, mean * mean))) return out;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mean) / sd;
  return out;
}

AdvantageEstimate estimate_advantages(const RolloutBatch& batch, const PPOConfig& cfg) {
  AdvantageEstimate a;
  for (const auto& g : batch.groups) {
    std::vector<double> returns;
    for (std::size_t j = 0; j < g.chains.size(); ++j) {
      const std::size_t steps = g.chains[j].means.size();
      std::vector<double> rewards(steps, 0.0);
      rewards.back() = g.rewards[j];
      const std::vector<double> values(steps, g.value);
      returns.push_back(gae(rewards, values, cfg.gamma, cfg.gae_lambda).front() + g.value);
    }
    a.advantages.push_back(group_standardize(returns));
    a.returns.push_back(std::move(returns));
  }
  return a;
}

double gaussian_kl(const Vector& mu_p, const Vector& mu_q, double sigma) {
  return (mu_p - mu_q).squaredNorm() / (2.0 * sigma * sigma);
}

PolicyLossResult ppo_policy_loss(const policy::PolicyModel& pol, const RolloutBatch& batch,
                                 const AdvantageEstimate& adv, const PPOConfig& cfg,
                                 bool with_grads) {
  const int d = pol.traj_dim();
  std::size_t cols = 0;
  for (const auto& g : batch.groups) {
    for (const auto& c : g.chains) cols += c.means.size();
  }
  PolicyLossResult r;
  if (cols == 0) {
    r.grads = diffgraph::Gradients::zeros_like(pol.net);
    return r;
  }
  Matrix x(d, static_cast<Eigen::Index>(cols)), cm(pol.cond_dim(), static_cast<Eigen::Index>(cols));
  std::vector<int> steps(cols);
  Eigen::Index col = 0;
  for (const auto& g : batch.groups) {
    for (const auto& c : g.chains) {
      const int tau = static_cast<int>(c.means.size());
      for (int i = 0; i < tau; ++i, ++col) {
        x.col(col) = c.states[i];
        cm.col(col) = g.condition;
        steps[col] = pol.schedule.tau - i;
      }
    }
  }
  policy::DenoiseForward fwd = policy::denoise_forward_steps(pol, x, steps, cm);

  const double inv = 1.0 / static_cast<double>(cols);
  Matrix d_means = Matrix::Zero(d, static_cast<Eigen::Index>(cols));
  std::size_t clipped = 0;
  col = 0;
  for (std::size_t gi = 0; gi < batch.groups.size(); ++gi) {
    const auto& g = batch.groups[gi];
    for (std::size_t j = 0; j < g.chains.size(); ++j) {
      const auto& c = g.chains[j];
      const double A = adv.advantages[gi][j];
      double weight = 1.0;
      for (std::size_t i = 0; i < c.means.size(); ++i, ++col) {
        const double sigma = c.sigmas[i];
        const Vector mu = fwd.out.means.col(col);
        const double lp = policy::transition_logprob(mu, sigma, c.states[i + 1]);
        const double ratio = std::exp(lp - g.ref_logprobs[j][i]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double unclipped_obj = ratio * A;
        const double clipped_obj = clipped_ratio * A;
        const bool use_unclipped = unclipped_obj <= clipped_obj;
        r.surrogate += weight * std::min(unclipped_obj, clipped_obj) * inv;
        clipped += !use_unclipped;
        const double kl = gaussian_kl(mu, g.ref_means[j][i], sigma);
        r.kl += kl * inv;
        if (with_grads) {
          const double s2 = sigma * sigma;
          // d(-surrogate)/d mu, via d logp / d mu = (x_prev - mu) / sigma^2.
          if (use_unclipped) d_means.col(col) -= weight * ratio * A * inv * (c.states[i + 1] - mu) / s2;
          d_means.col(col) += cfg.kl_coef * inv * (mu - g.ref_means[j][i]) / s2;
        }
        weight *= cfg.gamma;
      }
    }
  }
  r.loss = -r.surrogate + cfg.kl_coef * r.kl;
  r.clip_fraction = static_cast<double>(clipped) * inv;
  if (with_grads) r.grads = policy::denoise_backward_steps(pol, fwd, steps, d_means, Matrix(), Vector());
  return r;
}

ValueLossResult value_loss(const diffgraph::ParamBundle& critic, const Matrix& conditions,
                           const std::vector<double>& returns, bool with_grads) {
  ValueLossResult r;
  if (returns.empty()) {
    r.grads = diffgraph::Gradients::zeros_like(critic);
    return r;
  }
  auto fwd = diffgraph::mlp_forward(critic, conditions);
  const double inv = 1.0 / static_cast<double>(returns.size());
  Matrix g(1, static_cast<Eigen::Index>(returns.size()));
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const double e = fwd.output(0, static_cast<Eigen::Index>(i)) - returns[i];
    r.loss += e * e * inv;
    g(0, static_cast<Eigen::Index>(i)) = 2.0 * e * inv;
  }
  if (with_grads) r.grads = diffgraph::backward(fwd.tape, g).grads;
  return r;
}

std::string log_header() {
  return "iteration,reward_mean,reward_std,reward_min,reward_max,probe_epdms,kl,policy_loss,"
         "surrogate,il_loss,value_loss,clip_fraction";
}

std::string log_row(const IterationLog& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.iteration << ',' << r.reward_mean << ',' << r.reward_std << ',' << r.reward_min << ','
     << r.reward_max << ',' << r.probe_epdms << ',' << r.kl << ',' << r.policy_loss << ','
     << r.surrogate << ',' << r.il_loss << ',' << r.value_loss << ',' << r.clip_fraction;
  return os.str();
}

double probe_epdms(const policy::PolicyModel& pol, const std::vector<ProbeScene>& probes,
                   const metrics::MetricConfig& mcfg, const metrics::EpdmsWeights& w) {
  if (probes.empty()) return 0.0;
  std::vector<double> scores(probes.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(probes.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& p = probes[i];
      const policy::Decision dec = policy::infer(pol, *p.rl.scene, p.rl.conditions);
      metrics::ScoringOptions opts;
      opts.reference_progress = p.reference_progress;
      const auto mv = metrics::score_trajectory(dec.world_traj, *p.rl.scene, mcfg, opts);
      scores[i] = metrics::aggregate_epdms(mv, p.human, w);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

std::vector<IterationLog> train_rl(RlState& state, const policy::PolicyModel& ref,
                                   const rwm::RwmModel& rwm, const std::vector<RlScene>& scenes,
                                   const std::vector<policy::ImitationItem>& il_items,
                                   const std::vector<ProbeScene>& probes, const PPOConfig& cfg,
                                   const metrics::MetricConfig& mcfg,
                                   const metrics::EpdmsWeights& ew, const RlHooks& hooks) {
  validate(cfg);
  if (scenes.empty()) fail(ErrorCode::EmptyDataset, "no scenes for RL");
  diffgraph::AdamConfig pcfg;
  pcfg.lr = cfg.lr;
  pcfg.weight_decay = cfg.weight_decay;
  diffgraph::AdamConfig vcfg;
  vcfg.lr = cfg.critic_lr;

  std::vector<IterationLog> logs;
  RlState last_good = state;
  auto diverged = [&](const std::string& what) {
    if (hooks.on_checkpoint) hooks.on_checkpoint(last_good);
    fail(ErrorCode::DivergenceDetected, what + " at iteration " + std::to_string(state.iteration + 1));
  };

  while (state.iteration < cfg.iterations) {
    const int it = state.iteration + 1;
    const std::uint64_t iseed = mix_seed(cfg.seed, static_cast<std::uint64_t>(it), 0x72);
    Rng rng(iseed);
    std::vector<int> which;
    for (int i = 0; i < cfg.scenes_per_iter; ++i) {
      which.push_back(rng.uniform_int(0, static_cast<int>(scenes.size()) - 1));
    }
    const RolloutBatch batch =
        collect_rollouts(state.policy, ref, state.critic, rwm, scenes, which, cfg, mix_seed(iseed, 1));
    const AdvantageEstimate adv = estimate_advantages(batch, cfg);

    IterationLog log;
    log.iteration = it;
    std::vector<double> rewards;
    for (const auto& g : batch.groups) rewards.insert(rewards.end(), g.rewards.begin(), g.rewards.end());
    for (double v : rewards) log.reward_mean += v / static_cast<double>(rewards.size());
    log.reward_min = *std::min_element(rewards.begin(), rewards.end());
    log.reward_max = *std::max_element(rewards.begin(), rewards.end());
    for (double v : rewards) {
      log.reward_std += (v - log.reward_mean) * (v - log.reward_mean) / static_cast<double>(rewards.size());
    }
    log.reward_std = std::sqrt(log.reward_std);

    Matrix vc(state.policy.cond_dim(), static_cast<Eigen::Index>(batch.num_chains()));
    std::vector<double> vr;
    for (std::size_t gi = 0; gi < batch.groups.size(); ++gi) {
      for (double R : adv.returns[gi]) {
        vc.col(static_cast<Eigen::Index>(vr.size())) = batch.groups[gi].condition;
        vr.push_back(R);
      }
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      PolicyLossResult pl = ppo_policy_loss(state.policy, batch, adv, cfg);
      double il = 0.0;
      if (cfg.w_il > 0.0 && !il_items.empty()) {
        std::vector<const policy::ImitationItem*> ib;
        for (int i = 0; i < cfg.il_batch; ++i) {
          ib.push_back(&il_items[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<int>(il_items.size()) - 1))]);
        }
        policy::ImitationResult ir =
            policy::imitation_loss(state.policy, ib, cfg.il_lambda, mix_seed(iseed, 2, epoch));
        il = ir.loss;
        ir.grads *= cfg.w_il;
        pl.grads += ir.grads;
      }
      const ValueLossResult vl = value_loss(state.critic, vc, vr);
      const double total = pl.loss + cfg.w_il * il;
      if (!std::isfinite(total) || !std::isfinite(vl.loss) || !pl.grads.all_finite() ||
          !vl.grads.all_finite()) {
        diverged("non-finite loss");
      }
      diffgraph::adam_step(state.policy.net, pl.grads, state.policy_opt, pcfg);
      diffgraph::adam_step(state.critic, vl.grads, state.critic_opt, vcfg);
      log.policy_loss = total;
      log.surrogate = pl.surrogate;
      log.il_loss = il;
      log.value_loss = vl.loss;
      log.clip_fraction = pl.clip_fraction;
    }
    if (!state.policy.net.all_finite() || !state.critic.all_finite()) diverged("non-finite parameters");
    // KL of the updated policy on this iteration's chains.
    log.kl = ppo_policy_loss(state.policy, batch, adv, cfg, false).kl;
    log.probe_epdms = probe_epdms(state.policy, probes, mcfg, ew);
    state.iteration = it;
    last_good = state;
    logs.push_back(log);
    if (hooks.on_iteration) hooks.on_iteration(log);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
        (it % hooks.checkpoint_every == 0 || it == cfg.iterations)) {
      hooks.on_checkpoint(state);
    }
  }
  return logs;
}

}  // namespace irlvla::rl
