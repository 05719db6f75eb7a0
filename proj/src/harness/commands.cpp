#include "irlvla/harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "irlvla/anchors/kmeans.hpp"
#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"
#include "irlvla/diffgraph/checkpoint.hpp"
#include "irlvla/metrics/batch.hpp"
#include "irlvla/policy/diffusion_policy.hpp"
#include "irlvla/rl/ppo.hpp"
#include "irlvla/rwm/dataset.hpp"
#include "irlvla/rwm/train.hpp"
#include "irlvla/scene/expert.hpp"
#include "irlvla/scene/generator.hpp"
#include "irlvla/scene/raster.hpp"
#include "irlvla/scene/scene_io.hpp"

namespace irlvla::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool g_verbose = true;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << msg << std::endl;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path);
  os << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void echo_config(const RunConfig& cfg, const std::string& dir, const std::string& command) {
  write_json((fs::path(dir) / ("config_" + command + ".json")).string(), cfg.tree());
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void require_file(const std::string& path, ErrorCode code, const std::string& what) {
  if (!fs::exists(path)) fail(code, what + " not found: " + path);
}

scene::Difficulty difficulty_for(char c) {
  switch (c) {
    case 'E': return scene::Difficulty::Easy;
    case 'M': return scene::Difficulty::Medium;
    default: return scene::Difficulty::Hard;
  }
}

// Draws scenes from a tagged seed stream until `count` have a feasible expert.
std::vector<scene::SceneRecord> generate_split(const RunConfig& cfg, std::uint64_t tag, int count) {
  const auto scfg = cfg.scene_config();
  const auto cycle = cfg.get<std::string>("data.difficulty_cycle");
  const std::uint64_t seed = cfg.get<std::uint64_t>("seed");
  std::vector<scene::SceneRecord> out;
  long next = 0;
  while (static_cast<int>(out.size()) < count) {
    const long chunk = count - static_cast<long>(out.size());
    std::vector<std::optional<scene::SceneRecord>> got(chunk);
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < chunk; ++i) {
      const long idx = next + i;
      const std::uint64_t s = mix_seed(seed, tag, static_cast<std::uint64_t>(idx));
      scene::SceneRecord rec{scene::generate_scene(s, difficulty_for(cycle[idx % cycle.size()]), scfg),
                             std::nullopt};
      try {
        rec.expert = scene::expert_trajectory(rec.scene, scfg);
        got[i] = std::move(rec);
      } catch (const Error&) {
        // Infeasible draws are dropped; the stream continues with the next seed.
      }
    }
    next += chunk;
    for (auto& g : got) {
      if (g && static_cast<int>(out.size()) < count) out.push_back(std::move(*g));
    }
  }
  return out;
}

std::vector<scene::SceneRecord> load_scenes(const std::string& path) {
  return scene::read_scene_dataset(path);
}

std::vector<scene::FeatureGrid> rasterize_all(const std::vector<scene::SceneRecord>& recs,
                                              const scene::SceneConfig& scfg) {
  std::vector<scene::FeatureGrid> grids(recs.size());
  // Rasterization is parallel internally; scenes are processed in order.
  for (std::size_t i = 0; i < recs.size(); ++i) grids[i] = scene::rasterize(recs[i].scene, scfg);
  return grids;
}

std::vector<policy::ImitationItem> imitation_items(const policy::PolicyModel& m,
                                                   const std::vector<scene::SceneRecord>& recs,
                                                   const std::vector<scene::FeatureGrid>& grids) {
  std::vector<policy::ImitationItem> items;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!recs[i].expert) continue;
    const auto ego = policy::world_to_ego(*recs[i].expert, recs[i].scene.ego0.pose);
    policy::ImitationItem it;
    it.conditions = policy::scene_conditions(m, recs[i].scene, grids[i]);
    it.gt_z = policy::encode(m, ego);
    it.target = static_cast<int>(anchors::assign(ego, m.anchors));
    items.push_back(std::move(it));
  }
  return items;
}

struct HumanRef {
  metrics::MetricVector human;
  double reference = 0.0;
};

HumanRef human_ref(const scene::SceneRecord& rec, const metrics::MetricConfig& mcfg) {
  HumanRef h;
  h.reference = metrics::centerline_progress(*rec.expert, rec.scene);
  metrics::ScoringOptions opts;
  opts.reference_progress = h.reference;
  h.human = metrics::score_trajectory(*rec.expert, rec.scene, mcfg, opts);
  return h;
}

std::string eval_csv_header() { return "scene_id,NC,DAC,DDC,TLC,EP,TTC,LK,HC,EPDMS"; }

std::string eval_csv_row(const std::string& id, const metrics::MetricVector& m, double epdms) {
  std::ostringstream os;
  os << id;
  for (metrics::Metric k : metrics::kRewardMetrics) os << ',' << num(m.get(k));
  os << ',' << num(epdms);
  return os.str();
}

struct EvalOutcome {
  std::vector<std::string> ids;
  std::vector<metrics::MetricVector> scores;
  std::vector<double> epdms;
};

json summarize(const EvalOutcome& o) {
  json j;
  const double n = static_cast<double>(std::max<std::size_t>(1, o.ids.size()));
  for (metrics::Metric k : metrics::kRewardMetrics) {
    double s = 0.0;
    for (const auto& m : o.scores) s += m.get(k);
    j["mean"][std::string(metrics::metric_name(k))] = s / n;
  }
  j["epdms"] = std::accumulate(o.epdms.begin(), o.epdms.end(), 0.0) / n;
  j["scenes"] = o.ids.size();
  return j;
}

diffgraph::Checkpoint rl_state_checkpoint(const rl::RlState& s, const std::vector<std::string>& log) {
  diffgraph::Checkpoint ck = policy::policy_checkpoint(s.policy);
  ck.meta["kind"] = "policy";
  ck.meta["iteration"] = s.iteration;
  ck.meta["log"] = log;
  ck.put("critic", s.critic);
  diffgraph::put_adam_state(ck, "policy", s.policy.net, s.policy_opt);
  diffgraph::put_adam_state(ck, "critic", s.critic, s.critic_opt);
  return ck;
}

}  // namespace

void set_verbose(bool on) { g_verbose = on; }

std::string Paths::anchors(int K) const {
  return (fs::path(data_dir) / ("anchors_K" + std::to_string(K) + ".json")).string();
}

Paths paths_for(const RunConfig& cfg) {
  Paths p;
  const fs::path d(cfg.data_dir()), r(cfg.run_dir()), l(cfg.rl_dir());
  p.data_dir = d.string();
  p.scenes_train = (d / "scenes_train.jsonl").string();
  p.scenes_eval = (d / "scenes_eval.jsonl").string();
  p.rewards = (d / "rewards.jsonl").string();
  p.gen_summary = (d / "gen_summary.json").string();
  p.policy_pt = (r / "policy_pt.ckpt").string();
  p.pretrain_log = (r / "pretrain_log.csv").string();
  p.rwm = (r / "rwm.ckpt").string();
  p.rwm_report_json = (r / "rwm_report.json").string();
  p.rwm_report_csv = (r / "rwm_report.csv").string();
  p.rwm_epochs = (r / "rwm_epochs.csv").string();
  p.rwm_split = (r / "rwm_split.json").string();
  p.policy_rl = (l / "policy_rl.ckpt").string();
  p.rl_state = (l / "rl_state.ckpt").string();
  p.rl_log = (l / "rl_log.csv").string();
  p.rl_summary = (l / "rl_summary.json").string();
  return p;
}

json cmd_gen_data(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  fs::create_directories(P.data_dir);
  echo_config(cfg, P.data_dir, "gen-data");
  const auto scfg = cfg.scene_config();

  note("gen-data: scenes");
  const auto train = generate_split(cfg, 0x747261696e, cfg.get<int>("data.train_scenes"));
  const auto eval = generate_split(cfg, 0x6576616c, cfg.get<int>("data.eval_scenes"));
  scene::write_scene_dataset(P.scenes_train, train);
  scene::write_scene_dataset(P.scenes_eval, eval);

  note("gen-data: anchors");
  std::vector<scene::Trajectory> demos;
  for (const auto& r : train) demos.push_back(policy::world_to_ego(*r.expert, r.scene.ego0.pose));
  anchors::KMeansOptions ko;
  ko.max_iter = cfg.get<int>("anchors.max_iter");
  const int K = cfg.get<int>("anchors.K");
  std::set<int> ks{K};
  for (int k : cfg.get<std::vector<int>>("anchors.reward_Ks")) ks.insert(k);
  std::vector<anchors::AnchorSet> reward_sets;
  anchors::AnchorSet policy_set;
  const auto reward_Ks = cfg.get<std::vector<int>>("anchors.reward_Ks");
  for (int k : ks) {
    const auto set = anchors::kmeans_fit(demos, k, cfg.derived_seed("anchors"), ko);
    anchors::save_anchor_set(P.anchors(k), set);
    if (k == K) policy_set = set;
    if (std::find(reward_Ks.begin(), reward_Ks.end(), k) != reward_Ks.end()) reward_sets.push_back(set);
  }

  note("gen-data: reward samples");
  const policy::PolicyModel noise_model = policy::make_policy(policy_set, cfg.policy_config(), scfg);
  const auto samples =
      rwm::collect_reward_samples(train, reward_sets, noise_model, cfg.collect_config(),
                                  cfg.metric_config(), cfg.epdms_weights(), cfg.derived_seed("reward_data"));
  rwm::write_reward_dataset(P.rewards, samples);

  json summary;
  summary["train_scenes"] = train.size();
  summary["eval_scenes"] = eval.size();
  summary["anchor_sets"] = std::vector<int>(ks.begin(), ks.end());
  summary["reward_samples"] = samples.size();
  json tags = json::object();
  for (const auto& s : samples) {
    const auto fam = rwm::provenance_family(s.provenance);
    tags[fam] = tags.value(fam, 0) + 1;
  }
  summary["provenance_counts"] = tags;
  write_json(P.gen_summary, summary);
  return summary;
}

json cmd_pretrain(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  require_file(P.scenes_train, ErrorCode::MissingDataset, "scene dataset");
  const int K = cfg.get<int>("anchors.K");
  require_file(P.anchors(K), ErrorCode::MissingDataset, "anchor set");
  fs::create_directories(cfg.run_dir());
  echo_config(cfg, cfg.run_dir(), "pretrain");
  const auto scfg = cfg.scene_config();

  auto recs = load_scenes(P.scenes_train);
  const int limit = cfg.get<int>("pretrain.limit_scenes");
  if (limit > 0 && static_cast<std::size_t>(limit) < recs.size()) recs.resize(limit);
  policy::PolicyModel model =
      policy::make_policy(anchors::load_anchor_set(P.anchors(K)), cfg.policy_config(), scfg);
  const auto grids = rasterize_all(recs, scfg);
  const auto items = imitation_items(model, recs, grids);
  if (items.empty()) fail(ErrorCode::EmptyDataset, "no expert demonstrations in " + P.scenes_train);

  const auto n_val = std::min<std::size_t>(
      items.size() - 1,
      static_cast<std::size_t>(std::lround(cfg.get<double>("pretrain.val_fraction") * items.size())));
  const std::size_t n_train = items.size() - n_val;
  // Items follow record order; validation takes the tail.
  std::vector<std::size_t> val_records;
  {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (!recs[i].expert) continue;
      if (seen++ >= n_train) val_records.push_back(i);
    }
  }

  diffgraph::AdamConfig acfg;
  acfg.lr = cfg.get<double>("pretrain.lr");
  acfg.weight_decay = cfg.get<double>("pretrain.weight_decay");
  diffgraph::AdamState opt = diffgraph::make_adam_state(model.net);
  const int epochs = cfg.get<int>("pretrain.epochs");
  const int batch = cfg.get<int>("pretrain.batch");
  const double lambda = cfg.get<double>("pretrain.il_lambda");
  const std::uint64_t seed = cfg.derived_seed("pretrain");

  int start_epoch = 1;
  long step = 0;
  std::vector<std::string> log_rows;
  if (cfg.get<bool>("pretrain.resume") && fs::exists(P.policy_pt)) {
    const auto ck = diffgraph::load_checkpoint(P.policy_pt);
    model = policy::policy_from_checkpoint(ck, scfg);
    opt = diffgraph::get_adam_state(ck, "policy", model.net);
    start_epoch = ck.meta.value("epoch", 0) + 1;
    step = ck.meta.value("step", 0L);
    log_rows = ck.meta.value("log", std::vector<std::string>{});
    note("pretrain: resuming after epoch " + std::to_string(start_epoch - 1));
  }

  auto evaluate_val = [&](double& l1, double& acc) {
    l1 = 0.0;
    acc = 0.0;
    if (val_records.empty()) return;
    for (std::size_t v = 0; v < val_records.size(); ++v) {
      const auto& item = items[n_train + v];
      const auto& rec = recs[val_records[v]];
      const auto dec = policy::infer(model, rec.scene, item.conditions);
      const auto gt = policy::world_to_ego(*rec.expert, rec.scene.ego0.pose);
      double e = 0.0;
      for (int i = 0; i < model.horizon(); ++i) {
        e += std::hypot(dec.ego_traj.waypoints[i].x - gt.waypoints[i].x,
                        dec.ego_traj.waypoints[i].y - gt.waypoints[i].y);
      }
      l1 += e / model.horizon();
      acc += dec.anchor == item.target ? 1.0 : 0.0;
    }
    l1 /= static_cast<double>(val_records.size());
    acc /= static_cast<double>(val_records.size());
  };

  std::vector<std::size_t> order(n_train);
  double last_loss = 0.0, last_l1 = 0.0, val_l1 = 0.0, val_acc = 0.0;
  for (int epoch = start_epoch; epoch <= epochs; ++epoch) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    double sum_loss = 0.0, sum_l1 = 0.0, sum_bce = 0.0;
    int batches = 0;
    for (std::size_t s = 0; s < n_train; s += batch) {
      std::vector<const policy::ImitationItem*> b;
      for (std::size_t i = s; i < std::min(n_train, s + static_cast<std::size_t>(batch)); ++i) {
        b.push_back(&items[order[i]]);
      }
      ++step;
      auto r = policy::imitation_loss(model, b, lambda, mix_seed(seed, static_cast<std::uint64_t>(step), 7));
      if (!std::isfinite(r.loss) || !r.grads.all_finite()) {
        fail(ErrorCode::DivergenceDetected, "imitation loss is not finite at step " + std::to_string(step));
      }
      diffgraph::adam_step(model.net, r.grads, opt, acfg);
      sum_loss += r.loss;
      sum_l1 += r.l1;
      sum_bce += r.bce;
      ++batches;
    }
    last_loss = sum_loss / batches;
    last_l1 = sum_l1 / batches;
    evaluate_val(val_l1, val_acc);
    std::ostringstream row;
    row << epoch << ',' << step << ',' << num(last_loss) << ',' << num(last_l1) << ','
        << num(sum_bce / batches) << ',' << num(val_l1) << ',' << num(val_acc);
    log_rows.push_back(row.str());
    std::string csv = "epoch,step,train_loss,train_l1,train_bce,val_l1,val_accuracy\n";
    for (const auto& r : log_rows) csv += r + "\n";
    write_text(P.pretrain_log, csv);

    auto ck = policy::policy_checkpoint(model);
    ck.meta["epoch"] = epoch;
    ck.meta["step"] = step;
    ck.meta["log"] = log_rows;
    diffgraph::put_adam_state(ck, "policy", model.net, opt);
    diffgraph::save_checkpoint(P.policy_pt, ck);
    note("pretrain: epoch " + std::to_string(epoch) + " loss " + num(last_loss) + " val_l1 " +
         num(val_l1) + " val_acc " + num(val_acc));
  }
  json s;
  s["checkpoint"] = P.policy_pt;
  s["steps"] = step;
  s["train_loss"] = last_loss;
  s["train_l1"] = last_l1;
  s["val_l1"] = val_l1;
  s["val_accuracy"] = val_acc;
  s["train_items"] = n_train;
  s["val_items"] = val_records.size();
  return s;
}

json cmd_train_rwm(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  require_file(P.rewards, ErrorCode::MissingDataset, "reward dataset");
  require_file(P.scenes_train, ErrorCode::MissingDataset, "scene dataset");
  fs::create_directories(cfg.run_dir());
  echo_config(cfg, cfg.run_dir(), "train-rwm");
  const auto scfg = cfg.scene_config();

  const auto samples = rwm::read_reward_dataset(P.rewards);
  if (samples.empty()) fail(ErrorCode::EmptyDataset, "reward dataset is empty: " + P.rewards);
  const auto recs = load_scenes(P.scenes_train);
  const auto grids = rasterize_all(recs, scfg);
  rwm::SceneTable table;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    table.scenes[recs[i].scene.id] = &recs[i].scene;
    table.grids[recs[i].scene.id] = &grids[i];
  }
  note("train-rwm: features for " + std::to_string(samples.size()) + " samples");
  rwm::LabeledSet all;
  all.features = rwm::sample_features(samples, table, scfg);
  for (const auto& s : samples) {
    all.targets.push_back(s.metrics);
    all.oracle_epdms.push_back(s.oracle_epdms);
    all.scene_ids.push_back(s.scene_id);
  }
  if (cfg.get<bool>("rwm.permute_labels")) {
    std::vector<std::size_t> perm(all.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(cfg.derived_seed("rwm.permute"));
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    auto targets = all.targets;
    auto epdms = all.oracle_epdms;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      all.targets[i] = targets[perm[i]];
      all.oracle_epdms[i] = epdms[perm[i]];
    }
  }
  const auto split =
      rwm::split_scenes(all.scene_ids, cfg.get<double>("rwm.val_fraction"), cfg.derived_seed("rwm.split"));
  write_json(P.rwm_split, {{"train", split.train}, {"val", split.val}});
  const auto train = rwm::subset(all, rwm::select_scenes(all.scene_ids, split.train));
  const auto val = rwm::subset(all, rwm::select_scenes(all.scene_ids, split.val));

  std::string epochs_csv = "epoch,train_loss,val_loss\n";
  auto res = rwm::train_rwm(train, val, cfg.rwm_config(), cfg.rwm_train_config(), cfg.rwm_weights(),
                            [&](const rwm::EpochLog& e) {
                              epochs_csv += std::to_string(e.epoch) + "," + num(e.train_loss) + "," +
                                            num(e.val_loss) + "\n";
                              note("train-rwm: epoch " + std::to_string(e.epoch) + " train " +
                                   num(e.train_loss) + " val " + num(e.val_loss));
                            });
  write_text(P.rwm_epochs, epochs_csv);
  diffgraph::save_checkpoint(P.rwm, rwm::rwm_checkpoint(res.model));
  json report = rwm::to_json(res.report);
  json prior;
  for (metrics::Metric m : metrics::kRewardMetrics) {
    if (m == metrics::Metric::EP) continue;
    // Majority-class rate on validation, the accuracy of a constant predictor.
    std::map<int, int> counts;
    for (const auto& t : val.targets) {
      const double y = t.get(m);
      ++counts[metrics::metric_kind(m) == metrics::MetricKind::ThreeWay ? rwm::three_way_class(y)
                                                                        : (y >= 0.5 ? 1 : 0)];
    }
    int best = 0;
    for (const auto& [k, c] : counts) best = std::max(best, c);
    prior[std::string(metrics::metric_name(m))] =
        val.size() ? static_cast<double>(best) / static_cast<double>(val.size()) : 0.0;
  }
  report["majority_prior"] = prior;
  write_json(P.rwm_report_json, report);
  write_text(P.rwm_report_csv, rwm::report_csv(res.report));
  report["checkpoint"] = P.rwm;
  return report;
}

json cmd_rl_finetune(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  require_file(P.policy_pt, ErrorCode::MissingCheckpoint, "stage-1 policy checkpoint");
  require_file(P.rwm, ErrorCode::MissingCheckpoint, "reward model checkpoint");
  require_file(P.scenes_train, ErrorCode::MissingDataset, "scene dataset");
  require_file(P.scenes_eval, ErrorCode::MissingDataset, "eval scene dataset");
  fs::create_directories(cfg.rl_dir());
  echo_config(cfg, cfg.rl_dir(), "rl-finetune");
  const auto scfg = cfg.scene_config();
  const auto mcfg = cfg.metric_config();
  const auto ew = cfg.epdms_weights();
  const rl::PPOConfig pcfg = cfg.ppo_config();

  const policy::PolicyModel ref = policy::policy_from_checkpoint(diffgraph::load_checkpoint(P.policy_pt), scfg);
  const rwm::RwmModel reward = rwm::rwm_from_checkpoint(diffgraph::load_checkpoint(P.rwm));

  const auto train = load_scenes(P.scenes_train);
  const auto train_grids = rasterize_all(train, scfg);
  auto eval = load_scenes(P.scenes_eval);
  const int n_probe = std::min<int>(cfg.get<int>("ppo.probe_scenes"), static_cast<int>(eval.size()));
  eval.resize(n_probe);
  const auto probe_grids = rasterize_all(eval, scfg);

  std::vector<rl::RlScene> scenes;
  for (std::size_t i = 0; i < train.size(); ++i) {
    scenes.push_back({&train[i].scene, &train_grids[i], policy::scene_conditions(ref, train[i].scene, train_grids[i])});
  }
  const auto il_items = imitation_items(ref, train, train_grids);
  std::vector<rl::ProbeScene> probes;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (!eval[i].expert) continue;
    const HumanRef h = human_ref(eval[i], mcfg);
    probes.push_back({{&eval[i].scene, &probe_grids[i], policy::scene_conditions(ref, eval[i].scene, probe_grids[i])},
                      h.human,
                      h.reference});
  }

  rl::RlState state{ref, rl::make_critic(ref.cond_dim(), pcfg.critic_hidden, pcfg.seed), {}, {}, 0};
  state.policy_opt = diffgraph::make_adam_state(state.policy.net);
  state.critic_opt = diffgraph::make_adam_state(state.critic);
  std::vector<std::string> log_rows;
  if (cfg.get<bool>("ppo.resume") && fs::exists(P.rl_state)) {
    const auto ck = diffgraph::load_checkpoint(P.rl_state);
    state.policy = policy::policy_from_checkpoint(ck, scfg);
    state.critic = ck.bundle("critic");
    state.policy_opt = diffgraph::get_adam_state(ck, "policy", state.policy.net);
    state.critic_opt = diffgraph::get_adam_state(ck, "critic", state.critic);
    state.iteration = ck.meta.value("iteration", 0);
    log_rows = ck.meta.value("log", std::vector<std::string>{});
    note("rl-finetune: resuming after iteration " + std::to_string(state.iteration));
  }

  const double baseline = rl::probe_epdms(ref, probes, mcfg, ew);
  auto write_log = [&]() {
    std::string csv = rl::log_header() + "\n";
    for (const auto& r : log_rows) csv += r + "\n";
    write_text(P.rl_log, csv);
  };
  write_log();
  rl::RlHooks hooks;
  hooks.checkpoint_every = cfg.get<int>("ppo.checkpoint_every");
  hooks.on_iteration = [&](const rl::IterationLog& r) {
    log_rows.push_back(rl::log_row(r));
    write_log();
    note("rl-finetune: iteration " + std::to_string(r.iteration) + " reward " + num(r.reward_mean) +
         " probe_epdms " + num(r.probe_epdms) + " kl " + num(r.kl));
  };
  hooks.on_checkpoint = [&](const rl::RlState& s) {
    auto ck = rl_state_checkpoint(s, log_rows);
    diffgraph::save_checkpoint(P.rl_state, ck);
    auto pk = policy::policy_checkpoint(s.policy);
    pk.meta["iteration"] = s.iteration;
    diffgraph::save_checkpoint(P.policy_rl, pk);
  };
  const auto logs = rl::train_rl(state, ref, reward, scenes, il_items, probes, pcfg, mcfg, ew, hooks);
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);

  json s;
  s["checkpoint"] = P.policy_rl;
  s["iterations"] = state.iteration;
  s["baseline_probe_epdms"] = baseline;
  s["final_probe_epdms"] = logs.empty() ? baseline : logs.back().probe_epdms;
  s["final_kl"] = logs.empty() ? 0.0 : logs.back().kl;
  s["kl_bound"] = pcfg.kl_bound;
  s["w_il"] = pcfg.w_il;
  write_json(P.rl_summary, s);
  return s;
}

json cmd_eval(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  require_file(P.scenes_eval, ErrorCode::MissingDataset, "eval scene dataset");
  const auto scfg = cfg.scene_config();
  const auto mcfg = cfg.metric_config();
  const auto ew = cfg.epdms_weights();
  const auto kind = cfg.get<std::string>("eval.policy");
  std::string ckpt = cfg.get<std::string>("eval.checkpoint");
  std::optional<policy::PolicyModel> model;
  if (kind == "checkpoint") {
    if (ckpt.empty()) ckpt = P.policy_rl;
    require_file(ckpt, ErrorCode::MissingCheckpoint, "policy checkpoint");
    model = policy::policy_from_checkpoint(diffgraph::load_checkpoint(ckpt), scfg);
  }
  fs::create_directories(cfg.rl_dir());
  echo_config(cfg, cfg.rl_dir(), "eval");

  const auto filter = cfg.get<std::string>("eval.difficulty");
  auto recs = load_scenes(P.scenes_eval);
  std::vector<scene::SceneRecord> chosen;
  for (auto& r : recs) {
    if (!r.expert) continue;
    if (filter != "all" && scene::to_string(r.scene.difficulty) != filter) continue;
    chosen.push_back(std::move(r));
  }

  EvalOutcome o;
  o.ids.resize(chosen.size());
  o.scores.resize(chosen.size());
  o.epdms.resize(chosen.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(chosen.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& rec = chosen[i];
      const HumanRef h = human_ref(rec, mcfg);
      scene::Trajectory traj;
      if (kind == "expert") {
        traj = *rec.expert;
      } else if (kind == "cv") {
        traj = scene::constant_velocity_trajectory(rec.scene, scfg);
      } else {
        traj = policy::infer(*model, rec.scene, scene::rasterize_serial(rec.scene, scfg)).world_traj;
      }
      metrics::ScoringOptions opts;
      opts.reference_progress = h.reference;
      o.ids[i] = rec.scene.id;
      o.scores[i] = metrics::score_trajectory(traj, rec.scene, mcfg, opts);
      o.epdms[i] = metrics::aggregate_epdms(o.scores[i], h.human, ew);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::string name = cfg.get<std::string>("eval.name");
  if (name.empty()) name = "eval_" + kind;
  std::string csv = eval_csv_header() + "\n";
  for (std::size_t i = 0; i < o.ids.size(); ++i) csv += eval_csv_row(o.ids[i], o.scores[i], o.epdms[i]) + "\n";
  const fs::path dir(cfg.rl_dir());
  write_text((dir / (name + ".csv")).string(), csv);
  json s = summarize(o);
  s["policy"] = kind;
  if (kind == "checkpoint") s["checkpoint"] = ckpt;
  s["difficulty"] = filter;
  s["report"] = (dir / (name + ".csv")).string();
  write_json((dir / (name + ".json")).string(), s);
  return s;
}

json cmd_ablate_wil(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  require_file(P.policy_pt, ErrorCode::MissingCheckpoint, "stage-1 policy checkpoint");
  require_file(P.rwm, ErrorCode::MissingCheckpoint, "reward model checkpoint");
  echo_config(cfg, cfg.run_dir(), "ablate-wil");
  const auto values = cfg.get<std::vector<double>>("ablate.values");
  json rows = json::array();
  std::optional<RunConfig> first;
  std::string csv = "w_il,eval_epdms,final_probe_epdms,final_kl,iterations,stable\n";
  for (double v : values) {
    RunConfig child = cfg;
    std::ostringstream tag;
    tag << v;
    child.set("ppo.w_il", num(v));
    child.set("paths.rl_dir", (fs::path(cfg.run_dir()) / "ablate" / ("wil_" + tag.str())).string());
    child.set("eval.policy", "checkpoint");
    child.set("eval.checkpoint", "");
    child.set("eval.name", "eval_rl");
    note("ablate-wil: w_il = " + tag.str());
    const json rl = cmd_rl_finetune(child);
    const json ev = cmd_eval(child);

    // Stability: every logged value finite and iterations strictly increasing.
    bool stable = true;
    {
      std::ifstream is(paths_for(child).rl_log);
      std::string line;
      std::getline(is, line);
      long prev = 0;
      while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const long it = std::stol(cell);
        stable = stable && it > prev;
        prev = it;
        while (std::getline(ss, cell, ',')) stable = stable && std::isfinite(std::stod(cell));
      }
    }
    json row;
    row["w_il"] = v;
    row["eval_epdms"] = ev["epdms"];
    row["final_probe_epdms"] = rl["final_probe_epdms"];
    row["final_kl"] = rl["final_kl"];
    row["iterations"] = rl["iterations"];
    row["stable"] = stable;
    row["rl_dir"] = child.rl_dir();
    if (!first) {
      first = child;
      row["config_diff"] = json::array();
    } else {
      // Output locations differ by construction and are not part of the run's settings.
      std::vector<std::string> diff;
      for (auto& k : RunConfig::diff(*first, child)) {
        if (k.rfind("paths.", 0) != 0) diff.push_back(k);
      }
      row["config_diff"] = diff;
    }
    rows.push_back(row);
    csv += num(v) + "," + num(ev["epdms"].get<double>()) + "," + num(rl["final_probe_epdms"].get<double>()) +
           "," + num(rl["final_kl"].get<double>()) + "," + std::to_string(rl["iterations"].get<int>()) + "," +
           (stable ? "1" : "0") + "\n";
  }
  const fs::path dir(cfg.run_dir());
  write_text((dir / "ablation.csv").string(), csv);
  json s;
  s["rows"] = rows;
  s["table"] = (dir / "ablation.csv").string();
  write_json((dir / "ablation.json").string(), s);
  return s;
}

json cmd_score(const RunConfig& cfg) {
  const Paths P = paths_for(cfg);
  const auto mcfg = cfg.metric_config();
  const auto ew = cfg.epdms_weights();
  const auto source = cfg.get<std::string>("score.source");
  std::string input = cfg.get<std::string>("score.input");
  std::string output = cfg.get<std::string>("score.output");
  if (output.empty()) output = (fs::path(cfg.run_dir()) / "scores.csv").string();
  fs::path out_dir = fs::path(output).parent_path();
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  echo_config(cfg, out_dir.string(), "score");

  std::vector<std::string> ids;
  std::vector<metrics::MetricVector> humans;
  std::vector<metrics::ScoreJob> jobs;
  std::vector<scene::SceneRecord> recs;
  std::vector<rwm::RewardSample> samples;
  std::vector<scene::Scene> overridden;
  if (source == "scenes") {
    if (input.empty()) input = P.scenes_eval;
    recs = load_scenes(input);
    for (const auto& r : recs) {
      if (!r.expert) continue;
      const HumanRef h = human_ref(r, mcfg);
      ids.push_back(r.scene.id);
      humans.push_back(h.human);
      jobs.push_back({&r.scene, &*r.expert, h.reference});
    }
  } else {
    if (input.empty()) input = P.rewards;
    samples = rwm::read_reward_dataset(input);
    recs = load_scenes(P.scenes_train);
    std::map<std::string, const scene::Scene*> by_id;
    for (const auto& r : recs) by_id[r.scene.id] = &r.scene;
    overridden.reserve(samples.size());
    for (const auto& s : samples) {
      const auto it = by_id.find(s.scene_id);
      if (it == by_id.end()) fail(ErrorCode::MissingDataset, "no scene '" + s.scene_id + "' in " + P.scenes_train);
      const scene::Scene* sc = it->second;
      if (s.ego_override) {
        overridden.push_back(rwm::with_ego(*sc, *s.ego_override));
        sc = &overridden.back();
      }
      ids.push_back(s.scene_id);
      humans.push_back(s.human);
      jobs.push_back({sc, &s.traj, s.reference_progress});
    }
  }
  const auto scores = metrics::score_batch(jobs, mcfg);
  std::string csv = "scene_id,NC,DAC,DDC,TLC,EP,TTC,LK,HC,EPDMS\n";
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = metrics::aggregate_epdms(scores[i], humans[i], ew);
    total += e;
    csv += eval_csv_row(ids[i], scores[i], e) + "\n";
  }
  write_text(output, csv);
  json s;
  s["rows"] = scores.size();
  s["mean_epdms"] = scores.empty() ? 0.0 : total / static_cast<double>(scores.size());
  s["output"] = output;
  return s;
}

}  // namespace irlvla::harness
