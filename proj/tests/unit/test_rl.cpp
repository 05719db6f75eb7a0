#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/rl/ppo.hpp"
#include "irlvla/rwm/features.hpp"
#include "irlvla/scene/generator.hpp"
#include "irlvla/scene/raster.hpp"

using namespace irlvla;
using namespace irlvla::rl;

namespace {

// A_t = sum_l (gamma lambda)^l delta_{t+l}, written out directly.
std::vector<double> gae_sum(const std::vector<double>& r, const std::vector<double>& v, double g,
                            double l) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) delta[i] = r[i] + g * (i + 1 < n ? v[i + 1] : 0.0) - v[i];
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = t; k < n; ++k) out[t] += std::pow(g * l, static_cast<double>(k - t)) * delta[k];
  }
  return out;
}

struct World {
  std::vector<scene::Scene> scenes;
  std::vector<scene::FeatureGrid> grids;
  std::vector<RlScene> rl;
  policy::PolicyModel pol;
  rwm::RwmModel rwm;
  diffgraph::ParamBundle critic;

  explicit World(int n, std::uint64_t seed = 1) {
    policy::PolicyConfig pc;
    pc.hidden = 16;
    pc.seed = seed;
    pol = policy::make_policy(testkit::toy_anchors(4, seed), pc, scene::SceneConfig{});
    Rng rng(seed);
    auto& out = pol.net.layers.back();
    for (Eigen::Index i = 0; i < out.weight.size(); ++i) out.weight.data()[i] = rng.uniform(-0.2, 0.2);
    for (Eigen::Index i = 0; i < out.bias.size(); ++i) out.bias.data()[i] = rng.uniform(-0.2, 0.2);
    rwm = rwm::make_rwm(rwm::traj_feature_size(scene::SceneConfig{}), rwm::RwmConfig{16, 8, 4, seed});
    critic = make_critic(pol.cond_dim(), 8, seed);
    for (int i = 0; i < n; ++i) {
      scenes.push_back(scene::generate_scene(mix_seed(seed, i), static_cast<scene::Difficulty>(i % 3)));
    }
    for (const auto& s : scenes) grids.push_back(scene::rasterize(s));
    for (int i = 0; i < n; ++i) {
      rl.push_back({&scenes[i], &grids[i], policy::scene_conditions(pol, scenes[i], grids[i])});
    }
  }
};

double perturb(policy::PolicyModel& m, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : m.net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] += scale * rng.uniform(-1, 1);
  }
  return scale;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("GAE matches the explicit discounted sum") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(1, 10);
    std::vector<double> r(n), v(n);
    for (int i = 0; i < n; ++i) {
      r[i] = rng.uniform(-1, 1);
      v[i] = rng.uniform(-1, 1);
    }
    const double g = rng.uniform(0.5, 1.0), l = rng.uniform(0.0, 1.0);
    const auto a = gae(r, v, g, l), b = gae_sum(r, v, g, l);
    for (int i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  // lambda = 0: one-step TD errors.
  const auto td = gae({1.0, 2.0}, {0.5, 0.25}, 0.9, 0.0);
  CHECK(td[0] == doctest::Approx(1.0 + 0.9 * 0.25 - 0.5));
  CHECK(td[1] == doctest::Approx(2.0 - 0.25));
}

TEST_CASE("group standardization") {
  const auto z = group_standardize({1.0, 2.0, 3.0, 6.0});
  const double m = std::accumulate(z.begin(), z.end(), 0.0) / 4.0;
  double var = 0.0;
  for (double v : z) var += (v - m) * (v - m) / 4.0;
  CHECK(std::abs(m) < 1e-12);
  CHECK(var == doctest::Approx(1.0));
  CHECK(group_standardize({0.7}) == std::vector<double>{0.0});
  CHECK(group_standardize({0.4, 0.4, 0.4}) == std::vector<double>(3, 0.0));
  CHECK(group_standardize({}).empty());

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(8), s(8);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5, 5);
    for (int i = 0; i < 8; ++i) {
      r[i] = rng.uniform();
      s[i] = a * r[i] + b;
    }
    const auto zr = group_standardize(r), zs = group_standardize(s);
    for (int i = 0; i < 8; ++i) CHECK(zr[i] == doctest::Approx(zs[i]).epsilon(1e-9));
  }
}

TEST_CASE("advantage estimate: terminal reward discounted to the first step") {
  RolloutBatch b;
  RolloutGroup g;
  g.value = 0.3;
  const double R[3] = {0.9, 0.5, 0.7};
  for (double r : R) {
    policy::DenoiseChain c;
    c.means.resize(8);
    g.chains.push_back(c);
    g.rewards.push_back(r);
  }
  b.groups.push_back(g);
  PPOConfig cfg;
  cfg.gae_lambda = 1.0;
  cfg.gamma = 0.9;
  const auto a = estimate_advantages(b, cfg);
  for (int j = 0; j < 3; ++j) CHECK(a.returns[0][j] == doctest::Approx(std::pow(0.9, 7) * R[j]));
  CHECK(a.advantages[0][0] > a.advantages[0][2]);
  CHECK(a.advantages[0][2] > a.advantages[0][1]);

  RolloutBatch one;
  one.groups.push_back(g);
  one.groups[0].chains.resize(1);
  one.groups[0].rewards.resize(1);
  CHECK(estimate_advantages(one, cfg).advantages[0] == std::vector<double>{0.0});
}

TEST_CASE("equal-mean Gaussian KL against Monte Carlo") {
  Rng rng(3);
  Vector p(4), q(4);
  p << 0.1, -0.3, 0.2, 0.5;
  q << 0.0, -0.1, 0.4, 0.3;
  const double sigma = 0.6;
  double mc = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    Vector x(4);
    for (int j = 0; j < 4; ++j) x(j) = p(j) + sigma * rng.normal();
    mc += (policy::transition_logprob(p, sigma, x) - policy::transition_logprob(q, sigma, x)) / n;
  }
  CHECK(gaussian_kl(p, q, sigma) == doctest::Approx(mc).epsilon(0.05));
  CHECK(gaussian_kl(p, p, sigma) == 0.0);
  for (int t = 0; t < 20; ++t) {
    Vector a = Vector::Random(6), c = Vector::Random(6);
    CHECK(gaussian_kl(a, c, rng.uniform(0.01, 2.0)) >= 0.0);
  }
}

TEST_CASE("rollouts") {
  World w(4);
  PPOConfig cfg;
  cfg.group_size = 3;
  const std::vector<int> which{0, 2, 3, 2};
  const auto a = collect_rollouts(w.pol, w.pol, w.critic, w.rwm, w.rl, which, cfg, 5);
  const auto b = collect_rollouts_serial(w.pol, w.pol, w.critic, w.rwm, w.rl, which, cfg, 5);
  REQUIRE(a.groups.size() == 4);
  CHECK(a.num_chains() == 12);
  for (std::size_t gi = 0; gi < 4; ++gi) {
    const auto& ga = a.groups[gi];
    const auto& gb = b.groups[gi];
    CHECK(ga.scene == which[gi]);
    CHECK(ga.rewards == gb.rewards);
    CHECK(ga.ref_logprobs == gb.ref_logprobs);
    CHECK(ga.value == critic_value(w.critic, ga.condition));
    CHECK(ga.anchor == policy::infer(w.pol, w.scenes[ga.scene], w.rl[ga.scene].conditions).anchor);
    for (std::size_t j = 0; j < ga.chains.size(); ++j) {
      CHECK(ga.chains[j].states == gb.chains[j].states);
      const auto& s = w.scenes[ga.scene];
      CHECK(ga.rewards[j] == rwm_reward(w.rwm, s, w.grids[ga.scene], ga.trajectories[j], scene::SceneConfig{}));
      CHECK(ga.trajectories[j] ==
            policy::ego_to_world(policy::decode(w.pol, ga.chains[j].states.back()), s.ego0.pose));
      // Reference equals the sampling policy here.
      const auto lp = policy::chain_step_logprobs(w.pol, ga.chains[j]);
      for (std::size_t i = 0; i < lp.size(); ++i) CHECK(ga.ref_logprobs[j][i] == doctest::Approx(lp[i]).epsilon(1e-12));
    }
  }
  // Groups reusing a scene draw different chains.
  CHECK_FALSE(a.groups[1].chains[0].states == a.groups[3].chains[0].states);
}

TEST_CASE("clipped surrogate") {
  World w(3, 2);
  PPOConfig cfg;
  cfg.group_size = 4;
  cfg.kl_coef = 0.0;
  const auto batch = collect_rollouts(w.pol, w.pol, w.critic, w.rwm, w.rl, {0, 1, 2}, cfg, 6);
  const auto adv = estimate_advantages(batch, cfg);

  SUBCASE("identity policy: ratio 1, KL 0, surrogate is the weighted mean advantage") {
    const auto r = ppo_policy_loss(w.pol, batch, adv, cfg, false);
    double expect = 0.0, cols = 0.0;
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      for (std::size_t j = 0; j < batch.groups[g].chains.size(); ++j) {
        for (int i = 0; i < 8; ++i) {
          expect += std::pow(cfg.gamma, i) * adv.advantages[g][j];
          cols += 1.0;
        }
      }
    }
    CHECK(r.kl == doctest::Approx(0.0).scale(1.0).epsilon(1e-20));
    CHECK(r.surrogate == doctest::Approx(expect / cols).scale(1.0).epsilon(1e-12));
    CHECK(r.clip_fraction == 0.0);
  }
  SUBCASE("zero advantage gives zero surrogate and zero gradient without KL") {
    AdvantageEstimate zero = adv;
    for (auto& g : zero.advantages) std::fill(g.begin(), g.end(), 0.0);
    policy::PolicyModel moved = w.pol;
    perturb(moved, 0.01, 9);
    const auto r = ppo_policy_loss(moved, batch, zero, cfg, true);
    CHECK(r.surrogate == 0.0);
    CHECK(r.grads.max_abs() == 0.0);
  }
  SUBCASE("closed form against independent ratios") {
    policy::PolicyModel moved = w.pol;
    perturb(moved, 0.05, 10);
    PPOConfig kc = cfg;
    kc.kl_coef = 0.3;
    const auto r = ppo_policy_loss(moved, batch, adv, kc, false);
    double surr = 0.0, kl = 0.0, cols = 0.0;
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      const auto& grp = batch.groups[g];
      for (std::size_t j = 0; j < grp.chains.size(); ++j) {
        const auto lp = policy::chain_step_logprobs(moved, grp.chains[j]);
        const double A = adv.advantages[g][j];
        for (std::size_t i = 0; i < lp.size(); ++i) {
          const double ratio = std::exp(lp[i] - grp.ref_logprobs[j][i]);
          const double clipped = std::min(std::max(ratio, 1.0 - kc.clip_eps), 1.0 + kc.clip_eps);
          surr += std::pow(kc.gamma, static_cast<double>(i)) * std::min(ratio * A, clipped * A);
          // KL between equal-variance Gaussians from the log-density gap at the means.
          const auto& c = grp.chains[j];
          const int t = 8 - static_cast<int>(i);
          const auto o = policy::denoise(moved, c.states[i], t, c.condition);
          kl += policy::transition_logprob(o.means.col(0), c.sigmas[i], o.means.col(0)) -
                policy::transition_logprob(grp.ref_means[j][i], c.sigmas[i], o.means.col(0));
          cols += 1.0;
        }
      }
    }
    CHECK(r.surrogate == doctest::Approx(surr / cols).epsilon(1e-9));
    CHECK(r.kl == doctest::Approx(kl / cols).epsilon(1e-9));
    CHECK(r.loss == doctest::Approx(-surr / cols + 0.3 * kl / cols).epsilon(1e-9));
    CHECK(r.kl >= 0.0);
  }
  SUBCASE("surrogate never exceeds the clipped bound per step") {
    policy::PolicyModel moved = w.pol;
    perturb(moved, 0.3, 11);
    const auto r = ppo_policy_loss(moved, batch, adv, cfg, false);
    double bound = 0.0, cols = 0.0;
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      for (std::size_t j = 0; j < batch.groups[g].chains.size(); ++j) {
        const double A = adv.advantages[g][j];
        for (int i = 0; i < 8; ++i) {
          bound += std::pow(cfg.gamma, i) * (A >= 0 ? (1 + cfg.clip_eps) * A : (1 - cfg.clip_eps) * A);
          cols += 1.0;
        }
      }
    }
    CHECK(r.surrogate <= bound / cols + 1e-12);
    CHECK((r.clip_fraction >= 0.0 && r.clip_fraction <= 1.0));
  }
  SUBCASE("gradient passes finite differences") {
    policy::PolicyModel moved = w.pol;
    perturb(moved, 0.002, 12);
    PPOConfig kc = cfg;
    kc.kl_coef = 0.1;
    const auto r = ppo_policy_loss(moved, batch, adv, kc, true);
    auto f = [&] { return ppo_policy_loss(moved, batch, adv, kc, false).loss; };
    const auto res = testkit::check_gradient(f, testkit::param_pointers(moved.net), testkit::flatten(r.grads),
                                             1e-6, 1e-6, 7);
    CHECK(res.max_rel_err <= 1e-4);
  }
}

TEST_CASE("value loss") {
  auto critic = make_critic(5, 6, 3);
  Rng rng(4);
  Matrix c(5, 7);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1, 1);
  std::vector<double> ret(7);
  for (auto& v : ret) v = rng.uniform();
  const auto r = value_loss(critic, c, ret, true);
  double expect = 0.0;
  for (int j = 0; j < 7; ++j) expect += std::pow(critic_value(critic, c.col(j)) - ret[j], 2) / 7.0;
  CHECK(r.loss == doctest::Approx(expect).epsilon(1e-12));
  auto f = [&] { return value_loss(critic, c, ret, false).loss; };
  CHECK(testkit::check_gradient(f, testkit::param_pointers(critic), testkit::flatten(r.grads)).max_rel_err <= 1e-5);
  CHECK(value_loss(critic, Matrix(5, 0), {}, false).loss == 0.0);
}

TEST_CASE("config validation") {
  PPOConfig c;
  CHECK_NOTHROW(validate(c));
  c.clip_eps = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.w_il = -1.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.group_size = 0;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("a heavy imitation weight keeps the policy near the demonstrations") {
  World w(3, 5);
  std::vector<policy::ImitationItem> items;
  Rng rng(6);
  for (int i = 0; i < 3; ++i) {
    policy::ImitationItem it;
    it.conditions = w.rl[i].conditions;
    it.target = i % 4;
    it.gt_z = w.pol.anchor_z.col(it.target) + Vector::Constant(24, 0.1 * (i + 1));
    items.push_back(it);
  }
  std::vector<const policy::ImitationItem*> all;
  for (auto& it : items) all.push_back(&it);

  auto run = [&](double w_il) {
    PPOConfig cfg;
    cfg.group_size = 4;
    cfg.scenes_per_iter = 2;
    cfg.iterations = 4;
    cfg.epochs = 2;
    cfg.lr = 3e-3;
    cfg.il_batch = 3;
    cfg.w_il = w_il;
    RlState st{w.pol, w.critic, diffgraph::make_adam_state(w.pol.net),
               diffgraph::make_adam_state(w.critic), 0};
    std::vector<IterationLog> logs;
    RlHooks hooks;
    hooks.on_iteration = [&](const IterationLog& l) { logs.push_back(l); };
    const auto out = train_rl(st, w.pol, w.rwm, w.rl, items, {}, cfg, {}, {}, hooks);
    CHECK(out.size() == 4);
    CHECK(logs.size() == 4);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].iteration == static_cast<int>(i) + 1);
    return policy::imitation_loss(st.policy, all, 0.1, 77, false).loss;
  };
  const double before = policy::imitation_loss(w.pol, all, 0.1, 77, false).loss;
  const double anchored = run(1000.0);
  const double free = run(0.0);
  CHECK(anchored < before);
  CHECK(anchored < free);
}

TEST_CASE("train_rl rejects an empty scene list") {
  World w(1);
  RlState st{w.pol, w.critic, diffgraph::make_adam_state(w.pol.net), diffgraph::make_adam_state(w.critic), 0};
  CHECK_THROWS_AS(train_rl(st, w.pol, w.rwm, {}, {}, {}, PPOConfig{}, {}, {}), Error);
}

}
