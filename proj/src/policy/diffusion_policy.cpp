#include "irlvla/policy/diffusion_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/scene/raster.hpp"

namespace irlvla::policy {

using scene::Trajectory;
using scene::Waypoint;

nlohmann::json to_json(const PolicyConfig& c) {
  return {{"hidden", c.hidden},         {"depth", c.depth},       {"pos_scale", c.pos_scale},
          {"heading_scale", c.heading_scale}, {"tau", c.tau},     {"beta_start", c.beta_start},
          {"beta_end", c.beta_end},     {"sigma_scale", c.sigma_scale},
          {"sigma_min", c.sigma_min},   {"seed", c.seed}};
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.depth = j.at("depth").get<int>();
  c.pos_scale = j.at("pos_scale").get<double>();
  c.heading_scale = j.at("heading_scale").get<double>();
  c.tau = j.at("tau").get<int>();
  c.beta_start = j.at("beta_start").get<double>();
  c.beta_end = j.at("beta_end").get<double>();
  c.sigma_scale = j.at("sigma_scale").get<double>();
  c.sigma_min = j.at("sigma_min").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

Vector flatten(const Trajectory& t) {
  Vector v(3 * t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    v(3 * i) = t.waypoints[i].x;
    v(3 * i + 1) = t.waypoints[i].y;
    v(3 * i + 2) = t.waypoints[i].theta;
  }
  return v;
}

void init_normalizer(PolicyModel& m) {
  const int d = m.traj_dim();
  m.mean = Vector::Zero(d);
  for (const auto& a : m.anchors.anchors) m.mean += flatten(a);
  m.mean /= static_cast<double>(m.anchors.anchors.size());
  m.scale.resize(d);
  for (int i = 0; i < d; ++i) m.scale(i) = i % 3 == 2 ? m.cfg.heading_scale : m.cfg.pos_scale;
  m.anchor_z.resize(d, static_cast<Eigen::Index>(m.anchors.anchors.size()));
  for (std::size_t k = 0; k < m.anchors.anchors.size(); ++k) {
    m.anchor_z.col(static_cast<Eigen::Index>(k)) = encode(m, m.anchors.anchors[k]);
  }
}

Matrix build_input(const PolicyModel& m, const Matrix& x_t, const std::vector<int>& steps,
                   const Matrix& c) {
  const int d = m.traj_dim();
  if (x_t.rows() != d || c.rows() != m.cond_dim() || c.cols() != x_t.cols() ||
      static_cast<Eigen::Index>(steps.size()) != x_t.cols()) {
    fail(ErrorCode::ShapeMismatch, "denoise input shapes do not match the policy");
  }
  Matrix in(m.input_dim(), x_t.cols());
  in.topRows(d) = x_t;
  for (Eigen::Index j = 0; j < x_t.cols(); ++j) {
    const int t = steps[j];
    if (t < 1 || t > m.schedule.tau) fail(ErrorCode::ShapeMismatch, "denoise step out of range");
    in(d, j) = std::sqrt(m.schedule.alpha_bars[t]);
    in(d + 1, j) = std::sqrt(1.0 - m.schedule.alpha_bars[t]);
    in(d + 2, j) = static_cast<double>(t) / m.schedule.tau;
  }
  in.bottomRows(m.cond_dim()) = c;
  return in;
}

DenoiseOutput finish(const PolicyModel& m, const Matrix& raw, const Matrix& x_t,
                     const std::vector<int>& steps, const Matrix& c) {
  const int d = m.traj_dim();
  DenoiseOutput o;
  // The anchor occupies the first traj_dim rows of the condition.
  o.x0_hat = c.topRows(d) + raw.topRows(d);
  o.logits = raw.row(d).transpose();
  o.scores = o.logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  o.means.resize(d, x_t.cols());
  for (Eigen::Index j = 0; j < x_t.cols(); ++j) {
    const int t = steps[j];
    o.means.col(j) =
        m.schedule.mean_coef_x0(t) * o.x0_hat.col(j) + m.schedule.mean_coef_xt(t) * x_t.col(j);
  }
  return o;
}

DenoiseForward forward_steps(const PolicyModel& m, const Matrix& x_t, const std::vector<int>& steps,
                             const Matrix& c) {
  auto r = diffgraph::mlp_forward(m.net, build_input(m, x_t, steps, c));
  DenoiseForward f;
  f.out = finish(m, r.output, x_t, steps, c);
  f.tape = std::move(r.tape);
  return f;
}

diffgraph::Gradients backward_steps(const PolicyModel& m, DenoiseForward& fwd,
                                    const std::vector<int>& steps, const Matrix& d_means,
                                    const Matrix& d_x0, const Vector& d_logits) {
  const int d = m.traj_dim();
  const Eigen::Index n = fwd.out.x0_hat.cols();
  Matrix g = Matrix::Zero(d + 1, n);
  if (d_x0.size()) g.topRows(d) += d_x0;
  if (d_means.size()) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g.col(j).head(d) += m.schedule.mean_coef_x0(steps[j]) * d_means.col(j);
    }
  }
  if (d_logits.size()) g.row(d) = d_logits.transpose();
  return diffgraph::backward(fwd.tape, g).grads;
}

}  // namespace

PolicyModel make_policy(const anchors::AnchorSet& anchors, const PolicyConfig& cfg,
                        const scene::SceneConfig& scene_cfg) {
  if (anchors.anchors.empty()) fail(ErrorCode::ShapeMismatch, "policy needs at least one anchor");
  PolicyModel m;
  m.cfg = cfg;
  m.scene_cfg = scene_cfg;
  m.schedule = linear_schedule(cfg.tau, cfg.beta_start, cfg.beta_end, cfg.sigma_scale, cfg.sigma_min);
  m.anchors = anchors;
  for (const auto& a : anchors.anchors) {
    if (static_cast<int>(a.size()) != scene_cfg.horizon) {
      fail(ErrorCode::HorizonMismatch, "anchor horizon does not match the configured horizon");
    }
  }
  init_normalizer(m);
  std::vector<int> sizes{m.input_dim()};
  for (int i = 0; i < cfg.depth; ++i) sizes.push_back(cfg.hidden);
  sizes.push_back(m.traj_dim() + 1);
  m.net = diffgraph::make_mlp("policy", sizes, cfg.seed);
  // Start from "return the anchor, score 0.5" so early training is well behaved.
  diffgraph::zero_output_layer(m.net);
  return m;
}

Trajectory ego_to_world(const Trajectory& t, const Waypoint& o) {
  Trajectory out;
  out.dt = t.dt;
  const double c = std::cos(o.theta), s = std::sin(o.theta);
  for (const auto& w : t.waypoints) {
    out.waypoints.push_back(
        {o.x + c * w.x - s * w.y, o.y + s * w.x + c * w.y, scene::wrap_angle(w.theta + o.theta)});
  }
  return out;
}

Trajectory world_to_ego(const Trajectory& t, const Waypoint& o) {
  Trajectory out;
  out.dt = t.dt;
  const double c = std::cos(o.theta), s = std::sin(o.theta);
  for (const auto& w : t.waypoints) {
    const double dx = w.x - o.x, dy = w.y - o.y;
    out.waypoints.push_back({c * dx + s * dy, -s * dx + c * dy, scene::wrap_angle(w.theta - o.theta)});
  }
  return out;
}

Vector encode(const PolicyModel& m, const Trajectory& ego_traj) {
  if (static_cast<int>(ego_traj.size()) != m.horizon()) {
    fail(ErrorCode::HorizonMismatch, "trajectory horizon does not match the policy");
  }
  return (flatten(ego_traj) - m.mean).cwiseQuotient(m.scale);
}

Trajectory decode(const PolicyModel& m, const Vector& z) {
  const Vector v = m.mean + z.cwiseProduct(m.scale);
  Trajectory t;
  t.dt = m.scene_cfg.dt;
  const double max_step = m.scene_cfg.v_max * t.dt;
  double px = 0.0, py = 0.0;
  for (int i = 0; i < m.horizon(); ++i) {
    double x = v(3 * i), y = v(3 * i + 1);
    const double dx = x - px, dy = y - py;
    const double d = std::hypot(dx, dy);
    if (d > max_step) {
      x = px + dx * (max_step / d);
      y = py + dy * (max_step / d);
    }
    t.waypoints.push_back({x, y, scene::wrap_angle(v(3 * i + 2))});
    px = x;
    py = y;
  }
  return t;
}

Matrix scene_conditions(const PolicyModel& m, const scene::Scene& sc, const scene::FeatureGrid& grid) {
  const int d = m.traj_dim();
  const int ch = m.num_channels();
  if (grid.channels != ch) fail(ErrorCode::ShapeMismatch, "grid channel count mismatch");
  Matrix c = Matrix::Zero(m.cond_dim(), m.num_anchors());
  std::vector<double> buf(ch);
  for (int k = 0; k < m.num_anchors(); ++k) {
    c.col(k).head(d) = m.anchor_z.col(k);
    const Trajectory w = ego_to_world(m.anchors.anchors[k], sc.ego0.pose);
    for (int i = 0; i < m.horizon(); ++i) {
      scene::sample_feature_into(grid, {w.waypoints[i].x, w.waypoints[i].y}, buf.data());
      for (int q = 0; q < ch; ++q) c(d + i * ch + q, k) = buf[q];
    }
    const int o = d + m.horizon() * ch;
    c(o, k) = sc.ego0.speed / 10.0;
    c(o + 1, k) = sc.ego0.accel / 3.0;
    c(o + 2 + static_cast<int>(sc.command), k) = 1.0;
  }
  return c;
}

DenoiseOutput denoise(const PolicyModel& m, const Matrix& x_t, int t, const Matrix& c) {
  std::vector<int> steps(x_t.cols(), t);
  return finish(m, diffgraph::mlp_eval(m.net, build_input(m, x_t, steps, c)), x_t, steps, c);
}

DenoiseForward denoise_forward(const PolicyModel& m, const Matrix& x_t, int t, const Matrix& c) {
  return forward_steps(m, x_t, std::vector<int>(x_t.cols(), t), c);
}

diffgraph::Gradients denoise_backward(const PolicyModel& m, DenoiseForward& fwd, int t,
                                      const Matrix& d_means, const Matrix& d_x0,
                                      const Vector& d_logits) {
  return backward_steps(m, fwd, std::vector<int>(fwd.out.x0_hat.cols(), t), d_means, d_x0, d_logits);
}

DenoiseForward denoise_forward_steps(const PolicyModel& m, const Matrix& x_t,
                                     const std::vector<int>& steps, const Matrix& c) {
  return forward_steps(m, x_t, steps, c);
}

diffgraph::Gradients denoise_backward_steps(const PolicyModel& m, DenoiseForward& fwd,
                                            const std::vector<int>& steps, const Matrix& d_means,
                                            const Matrix& d_x0, const Vector& d_logits) {
  return backward_steps(m, fwd, steps, d_means, d_x0, d_logits);
}

DenoiseOutput denoise_steps(const PolicyModel& m, const Matrix& x_t, const std::vector<int>& steps,
                            const Matrix& c) {
  return finish(m, diffgraph::mlp_eval(m.net, build_input(m, x_t, steps, c)), x_t, steps, c);
}

std::vector<DenoiseChain> sample_chains(const PolicyModel& m, int anchor, const Vector& c, int n,
                                        std::uint64_t seed, bool noiseless) {
  if (anchor < 0 || anchor >= m.num_anchors()) fail(ErrorCode::ShapeMismatch, "anchor index out of range");
  if (c.size() != m.cond_dim()) fail(ErrorCode::ShapeMismatch, "condition length mismatch");
  const int d = m.traj_dim();
  const int tau = m.schedule.tau;
  std::vector<Rng> rngs;
  for (int j = 0; j < n; ++j) rngs.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(j)));

  Matrix x(d, n);
  const double a = std::sqrt(m.schedule.alpha_bars[tau]);
  const double b = std::sqrt(1.0 - m.schedule.alpha_bars[tau]);
  for (int j = 0; j < n; ++j) {
    for (int r = 0; r < d; ++r) {
      x(r, j) = a * m.anchor_z(r, anchor) + (noiseless ? 0.0 : b * rngs[j].normal());
    }
  }
  const Matrix cm = c.replicate(1, n);
  std::vector<DenoiseChain> chains(n);
  for (int j = 0; j < n; ++j) {
    chains[j].anchor = anchor;
    chains[j].condition = c;
    chains[j].states.push_back(x.col(j));
  }
  for (int t = tau; t >= 1; --t) {
    const DenoiseOutput o = denoise(m, x, t, cm);
    const double sigma = noiseless ? 0.0 : m.schedule.sigmas[t];
    for (int j = 0; j < n; ++j) {
      Vector next = o.means.col(j);
      if (sigma > 0.0) {
        for (int r = 0; r < d; ++r) next(r) += sigma * rngs[j].normal();
      }
      chains[j].means.push_back(o.means.col(j));
      chains[j].sigmas.push_back(sigma);
      chains[j].states.push_back(next);
      x.col(j) = next;
    }
  }
  return chains;
}

DenoiseChain sample_chain(const PolicyModel& m, int anchor, const Vector& c, std::uint64_t seed) {
  return sample_chains(m, anchor, c, 1, seed).front();
}

double transition_logprob(const Vector& mu, double sigma, const Vector& x_prev) {
  const double d = static_cast<double>(mu.size());
  const double var = sigma * sigma;
  return -0.5 * d * std::log(2.0 * std::numbers::pi * var) - (x_prev - mu).squaredNorm() / (2.0 * var);
}

double chain_logprob(const DenoiseChain& chain) {
  double lp = 0.0;
  for (std::size_t i = 0; i < chain.means.size(); ++i) {
    lp += transition_logprob(chain.means[i], chain.sigmas[i], chain.states[i + 1]);
  }
  return lp;
}

std::vector<double> chain_step_logprobs(const PolicyModel& m, const DenoiseChain& chain) {
  const int tau = static_cast<int>(chain.means.size());
  const int d = m.traj_dim();
  Matrix x(d, tau);
  std::vector<int> steps(tau);
  for (int i = 0; i < tau; ++i) {
    x.col(i) = chain.states[i];
    steps[i] = m.schedule.tau - i;
  }
  const Matrix cm = chain.condition.replicate(1, tau);
  const DenoiseOutput o =
      finish(m, diffgraph::mlp_eval(m.net, build_input(m, x, steps, cm)), x, steps, cm);
  std::vector<double> lp(tau);
  for (int i = 0; i < tau; ++i) {
    lp[i] = transition_logprob(o.means.col(i), chain.sigmas[i], chain.states[i + 1]);
  }
  return lp;
}

Decision infer(const PolicyModel& m, const scene::Scene& sc, const scene::FeatureGrid& grid) {
  return infer(m, sc, scene_conditions(m, sc, grid));
}

Decision infer(const PolicyModel& m, const scene::Scene& sc, const Matrix& c) {
  Decision dec;
  const int tau = m.schedule.tau;
  Matrix x = std::sqrt(m.schedule.alpha_bars[tau]) * m.anchor_z;
  DenoiseOutput o;
  for (int t = tau; t >= 1; --t) {
    o = denoise(m, x, t, c);
    x = o.means;
  }
  dec.scores = o.scores;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < o.scores.size(); ++k) {
    if (o.scores(k) > o.scores(best)) best = k;
  }
  dec.anchor = static_cast<int>(best);
  dec.condition = c.col(best);
  dec.ego_traj = decode(m, x.col(best));
  dec.world_traj = ego_to_world(dec.ego_traj, sc.ego0.pose);
  return dec;
}

double bce(double p, double y) {
  const double q = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

ImitationResult imitation_loss_at(const PolicyModel& m, const std::vector<const ImitationItem*>& batch,
                                  const std::vector<Matrix>& x_t, const std::vector<int>& steps,
                                  double lambda, bool with_grads) {
  if (batch.empty()) fail(ErrorCode::EmptyDataset, "imitation batch is empty");
  const int d = m.traj_dim();
  const int K = m.num_anchors();
  const auto B = static_cast<Eigen::Index>(batch.size());
  Matrix xs(d, B * K), cs(m.cond_dim(), B * K);
  std::vector<int> col_steps(B * K);
  for (Eigen::Index b = 0; b < B; ++b) {
    xs.middleCols(b * K, K) = x_t[b];
    cs.middleCols(b * K, K) = batch[b]->conditions;
    std::fill_n(col_steps.begin() + b * K, K, steps[b]);
  }
  DenoiseForward fwd = forward_steps(m, xs, col_steps, cs);

  ImitationResult r;
  Matrix d_x0 = Matrix::Zero(d, B * K);
  Vector d_logits = Vector::Zero(B * K);
  const double inv_b = 1.0 / static_cast<double>(B);
  int hits = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const int target = batch[b]->target;
    const Eigen::Index col = b * K + target;
    const Vector diff = (fwd.out.x0_hat.col(col) - batch[b]->gt_z).cwiseProduct(m.scale);
    r.l1 += diff.cwiseAbs().mean() * inv_b;
    for (int i = 0; i < d; ++i) {
      const double sgn = diff(i) > 0.0 ? 1.0 : (diff(i) < 0.0 ? -1.0 : 0.0);
      d_x0(i, col) = sgn * m.scale(i) / d * inv_b;
    }
    int best = 0;
    for (int k = 0; k < K; ++k) {
      const double p = fwd.out.scores(b * K + k);
      const double y = k == target ? 1.0 : 0.0;
      r.bce += bce(p, y) * inv_b;
      if (p > kBceClamp && p < 1.0 - kBceClamp) d_logits(b * K + k) = lambda * (p - y) * inv_b;
      if (p > fwd.out.scores(b * K + best)) best = k;
    }
    hits += best == target;
  }
  r.loss = r.l1 + lambda * r.bce;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(B);
  if (with_grads) r.grads = backward_steps(m, fwd, col_steps, Matrix(), d_x0, d_logits);
  return r;
}

ImitationResult imitation_loss(const PolicyModel& m, const std::vector<const ImitationItem*>& batch,
                               double lambda, std::uint64_t seed, bool with_grads) {
  std::vector<Matrix> xs;
  std::vector<int> steps;
  Rng rng(seed);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int t = rng.uniform_int(1, m.schedule.tau);
    steps.push_back(t);
    xs.push_back(forward_noise(m.anchor_z, t, m.schedule, mix_seed(seed, b, 1)));
  }
  return imitation_loss_at(m, batch, xs, steps, lambda, with_grads);
}

diffgraph::Checkpoint policy_checkpoint(const PolicyModel& m) {
  diffgraph::Checkpoint ck;
  ck.meta["kind"] = "policy";
  ck.meta["policy_config"] = to_json(m.cfg);
  ck.meta["anchors"] = anchors::to_json(m.anchors);
  ck.put("policy", m.net);
  return ck;
}

PolicyModel policy_from_checkpoint(const diffgraph::Checkpoint& ck, const scene::SceneConfig& scene_cfg) {
  if (ck.meta.value("kind", "") != "policy") fail(ErrorCode::IoError, "checkpoint is not a policy");
  PolicyModel m = make_policy(anchors::anchor_set_from_json(ck.meta.at("anchors")),
                              policy_config_from_json(ck.meta.at("policy_config")), scene_cfg);
  const auto& net = ck.bundle("policy");
  if (net.input_size() != m.net.input_size() || net.output_size() != m.net.output_size()) {
    fail(ErrorCode::ShapeMismatch, "policy checkpoint does not match the configured horizon");
  }
  m.net = net;
  return m;
}

}  // namespace irlvla::policy
