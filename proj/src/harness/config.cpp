#include "irlvla/harness/config.hpp"

#include <fstream>
#include <set>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"

namespace irlvla::harness {

using nlohmann::json;

const json& RunConfig::defaults() {
  static const json d = {
      {"seed", 0},
      {"paths", {{"data_dir", "work/data"}, {"run_dir", "work/run"}, {"rl_dir", ""}}},
      {"scene",
       {{"horizon", 8},
        {"dt", 0.5},
        {"v_max", 25.0},
        {"footprint_length", 4.6},
        {"footprint_width", 1.9},
        {"grid_cell", 0.5},
        {"occupancy_buckets", 4}}},
      {"data",
       {{"train_scenes", 512},
        {"eval_scenes", 64},
        // One letter per scene, repeated: E(asy), M(edium), H(ard).
        {"difficulty_cycle", "EMMHH"}}},
      {"anchors", {{"K", 64}, {"reward_Ks", {32, 64, 128}}, {"max_iter", 100}}},
      {"reward_data",
       {{"strategies", {"expert", "diffusion-step", "kmeans", "ego-perturbation"}},
        {"diffusion_per_step", 2},
        {"kmeans_random", 5},
        {"ego_perturbations", 4}}},
      {"metrics",
       {{"w_ttc", 5.0}, {"w_ep", 5.0}, {"w_hc", 2.0}, {"w_lk", 2.0}, {"w_ec", 2.0},
        {"ec_enabled", false}}},
      {"policy",
       {{"hidden", 128},
        {"depth", 2},
        {"tau", 8},
        {"beta_start", 1e-4},
        {"beta_end", 0.2},
        {"sigma_scale", 1.0},
        {"sigma_min", 0.01},
        {"pos_scale", 4.0},
        {"heading_scale", 0.3}}},
      {"pretrain",
       {{"epochs", 60},
        {"batch", 32},
        {"lr", 1e-3},
        {"weight_decay", 0.0},
        {"il_lambda", 0.1},
        {"val_fraction", 0.1},
        {"limit_scenes", 0},  // train on the first N scenes only; 0 = all
        {"resume", false}}},
      {"rwm",
       {{"trunk_hidden", 128},
        {"trunk_out", 64},
        {"head_hidden", 32},
        {"max_epochs", 60},
        {"batch", 32},
        {"lr", 1e-3},
        {"weight_decay", 0.0},
        {"patience", 10},
        {"val_fraction", 0.2},
        {"permute_labels", false},
        // NC, DAC, DDC, TLC, EP, TTC, LK, HC
        {"weights", {14.0, 14.0, 14.0, 14.0, 5.0, 5.0, 2.0, 2.0}},
        {"loss_weights", {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}}}},
      {"ppo",
       {{"clip_eps", 0.2},
        {"gamma", 0.99},
        {"gae_lambda", 0.95},
        {"epochs", 4},
        {"lr", 1e-5},
        {"critic_lr", 1e-3},
        {"weight_decay", 0.0},
        {"w_il", 0.5},
        {"il_lambda", 0.1},
        {"il_batch", 32},
        {"kl_coef", 0.1},
        {"kl_bound", 1.0},
        {"group_size", 16},
        {"scenes_per_iter", 8},
        {"iterations", 50},
        {"critic_hidden", 64},
        {"probe_scenes", 16},
        {"checkpoint_every", 10},
        {"resume", false}}},
      {"eval",
       {{"policy", "checkpoint"},  // checkpoint | expert | cv
        {"checkpoint", ""},        // empty: <rl_dir>/policy_rl.ckpt
        {"difficulty", "all"},     // all | easy | medium | hard
        {"name", ""}}},            // report file stem; empty: eval_<policy>
      {"ablate", {{"values", {1.0, 0.5, 0.1}}}},
      {"score",
       {{"source", "scenes"},  // scenes: embedded experts | rewards: every reward sample
        {"input", ""},
        {"output", ""}}},
  };
  return d;
}

RunConfig::RunConfig() : data_(defaults()) {}

namespace {

bool compatible(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

void merge_into(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) fail(ErrorCode::ConfigInvalid, "config section '" + prefix + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
      continue;
    }
    if (!compatible(slot, it.value())) {
      fail(ErrorCode::ConfigInvalid, "config key '" + key + "' expects " + std::string(slot.type_name()));
    }
    slot = slot.is_number_float() ? json(it.value().get<double>()) : it.value();
  }
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const std::size_t dot = dotted.find('.', start);
    p += "/" + dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

void collect_diff(const json& a, const json& b, const std::string& prefix, std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
    for (const auto& k : keys) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (!a.contains(k) || !b.contains(k)) {
        out.push_back(key);
      } else {
        collect_diff(a[k], b[k], key, out);
      }
    }
    return;
  }
  if (a != b) out.push_back(prefix);
}

}  // namespace

void RunConfig::merge(const json& overlay) { merge_into(data_, overlay, ""); }

void RunConfig::merge_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "config file not found: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, "config file " + path + " is not valid JSON: " + e.what());
  }
  merge(j);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto ptr = pointer(key);
  if (!data_.contains(ptr)) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
  const json& current = data_.at(ptr);
  if (current.is_object()) fail(ErrorCode::ConfigInvalid, "config key '" + key + "' is a section");
  json v;
  if (current.is_string()) {
    v = value;
  } else {
    try {
      v = json::parse(value);
    } catch (const json::parse_error&) {
      fail(ErrorCode::ConfigInvalid, "cannot parse value '" + value + "' for '" + key + "'");
    }
  }
  json overlay;
  overlay[ptr] = v;
  merge(overlay);
}

const json& RunConfig::at(const std::string& key) const {
  const auto ptr = pointer(key);
  if (!data_.contains(ptr)) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
  return data_.at(ptr);
}

std::vector<std::string> RunConfig::diff(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  collect_diff(a.data_, b.data_, "", out);
  return out;
}

std::uint64_t RunConfig::derived_seed(const std::string& name) const {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ull;
  return mix_seed(get<std::uint64_t>("seed"), h);
}

std::string RunConfig::data_dir() const { return get<std::string>("paths.data_dir"); }
std::string RunConfig::run_dir() const { return get<std::string>("paths.run_dir"); }
std::string RunConfig::rl_dir() const {
  const auto d = get<std::string>("paths.rl_dir");
  return d.empty() ? run_dir() : d;
}

scene::SceneConfig RunConfig::scene_config() const {
  scene::SceneConfig c;
  c.horizon = get<int>("scene.horizon");
  c.dt = get<double>("scene.dt");
  c.v_max = get<double>("scene.v_max");
  c.ego_footprint = {get<double>("scene.footprint_length"), get<double>("scene.footprint_width")};
  c.grid_cell = get<double>("scene.grid_cell");
  c.occupancy_buckets = get<int>("scene.occupancy_buckets");
  return c;
}

metrics::MetricConfig RunConfig::metric_config() const {
  metrics::MetricConfig c;
  c.ego_footprint = scene_config().ego_footprint;
  return c;
}

metrics::EpdmsWeights RunConfig::epdms_weights() const {
  metrics::EpdmsWeights w;
  w.ttc = get<double>("metrics.w_ttc");
  w.ep = get<double>("metrics.w_ep");
  w.hc = get<double>("metrics.w_hc");
  w.lk = get<double>("metrics.w_lk");
  w.ec = get<double>("metrics.w_ec");
  w.ec_enabled = get<bool>("metrics.ec_enabled");
  return w;
}

policy::PolicyConfig RunConfig::policy_config() const {
  policy::PolicyConfig c;
  c.hidden = get<int>("policy.hidden");
  c.depth = get<int>("policy.depth");
  c.tau = get<int>("policy.tau");
  c.beta_start = get<double>("policy.beta_start");
  c.beta_end = get<double>("policy.beta_end");
  c.sigma_scale = get<double>("policy.sigma_scale");
  c.sigma_min = get<double>("policy.sigma_min");
  c.pos_scale = get<double>("policy.pos_scale");
  c.heading_scale = get<double>("policy.heading_scale");
  c.seed = derived_seed("policy");
  return c;
}

rwm::RwmConfig RunConfig::rwm_config() const {
  rwm::RwmConfig c;
  c.trunk_hidden = get<int>("rwm.trunk_hidden");
  c.trunk_out = get<int>("rwm.trunk_out");
  c.head_hidden = get<int>("rwm.head_hidden");
  c.loss_weights = get<std::array<double, rwm::kNumHeads>>("rwm.loss_weights");
  c.seed = derived_seed("rwm");
  return c;
}

rwm::RwmTrainConfig RunConfig::rwm_train_config() const {
  rwm::RwmTrainConfig c;
  c.max_epochs = get<int>("rwm.max_epochs");
  c.batch = get<int>("rwm.batch");
  c.lr = get<double>("rwm.lr");
  c.weight_decay = get<double>("rwm.weight_decay");
  c.patience = get<int>("rwm.patience");
  c.seed = derived_seed("rwm.train");
  return c;
}

rwm::RwmWeights RunConfig::rwm_weights() const {
  rwm::RwmWeights w;
  w.w = get<std::array<double, rwm::kNumHeads>>("rwm.weights");
  return w;
}

rwm::CollectConfig RunConfig::collect_config() const {
  rwm::CollectConfig c;
  const auto s = get<std::vector<std::string>>("reward_data.strategies");
  const std::set<std::string> on(s.begin(), s.end());
  c.expert = on.count("expert") > 0;
  c.diffusion_step = on.count("diffusion-step") > 0;
  c.kmeans = on.count("kmeans") > 0;
  c.ego_perturbation = on.count("ego-perturbation") > 0;
  c.diffusion_per_step = get<int>("reward_data.diffusion_per_step");
  c.kmeans_random = get<int>("reward_data.kmeans_random");
  c.ego_perturbations = get<int>("reward_data.ego_perturbations");
  return c;
}

rl::PPOConfig RunConfig::ppo_config() const {
  rl::PPOConfig c;
  c.clip_eps = get<double>("ppo.clip_eps");
  c.gamma = get<double>("ppo.gamma");
  c.gae_lambda = get<double>("ppo.gae_lambda");
  c.epochs = get<int>("ppo.epochs");
  c.lr = get<double>("ppo.lr");
  c.critic_lr = get<double>("ppo.critic_lr");
  c.weight_decay = get<double>("ppo.weight_decay");
  c.w_il = get<double>("ppo.w_il");
  c.il_lambda = get<double>("ppo.il_lambda");
  c.il_batch = get<int>("ppo.il_batch");
  c.kl_coef = get<double>("ppo.kl_coef");
  c.kl_bound = get<double>("ppo.kl_bound");
  c.group_size = get<int>("ppo.group_size");
  c.scenes_per_iter = get<int>("ppo.scenes_per_iter");
  c.iterations = get<int>("ppo.iterations");
  c.critic_hidden = get<int>("ppo.critic_hidden");
  c.seed = derived_seed("ppo");
  return c;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::ConfigInvalid, m); };
  const auto sc = scene_config();
  if (sc.horizon < 1) bad("scene.horizon must be >= 1");
  if (!(sc.dt > 0.0)) bad("scene.dt must be > 0");
  if (sc.occupancy_buckets < 1) bad("scene.occupancy_buckets must be >= 1");
  if (get<int>("data.train_scenes") < 1 || get<int>("data.eval_scenes") < 1) bad("data scene counts must be >= 1");
  const auto cycle = get<std::string>("data.difficulty_cycle");
  if (cycle.empty() || cycle.find_first_not_of("EMH") != std::string::npos) {
    bad("data.difficulty_cycle must be a non-empty string over E, M, H");
  }
  if (get<int>("anchors.K") < 1) bad("anchors.K must be >= 1");
  for (int k : get<std::vector<int>>("anchors.reward_Ks")) {
    if (k < 1) bad("anchors.reward_Ks entries must be >= 1");
  }
  for (const auto& s : get<std::vector<std::string>>("reward_data.strategies")) {
    if (s != "expert" && s != "diffusion-step" && s != "kmeans" && s != "ego-perturbation") {
      bad("unknown reward_data strategy '" + s + "'");
    }
  }
  const auto ew = epdms_weights();
  if (!(ew.ttc > 0 && ew.ep > 0 && ew.hc > 0 && ew.lk > 0 && ew.ec > 0)) bad("metric weights must be > 0");
  for (double w : rwm_weights().w) {
    if (!(w > 0.0)) bad("rwm.weights must be > 0");
  }
  if (get<std::vector<double>>("rwm.loss_weights").size() != rwm::kNumHeads ||
      get<std::vector<double>>("rwm.weights").size() != rwm::kNumHeads) {
    bad("rwm.weights and rwm.loss_weights need 8 entries");
  }
  const auto pc = policy_config();
  if (pc.tau < 1 || pc.hidden < 1 || pc.depth < 1) bad("policy sizes must be >= 1");
  if (!(pc.beta_start > 0.0 && pc.beta_start <= pc.beta_end && pc.beta_end < 1.0)) {
    bad("policy betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  if (!(pc.sigma_scale > 0.0 || pc.sigma_min > 0.0)) bad("policy transition stddev must be > 0");
  if (get<int>("pretrain.batch") < 1 || get<int>("rwm.batch") < 1) bad("batch sizes must be >= 1");
  const double vf = get<double>("rwm.val_fraction");
  if (!(vf > 0.0 && vf < 1.0)) bad("rwm.val_fraction must be in (0, 1)");
  rl::validate(ppo_config());
  const auto ep = get<std::string>("eval.policy");
  if (ep != "checkpoint" && ep != "expert" && ep != "cv") bad("eval.policy must be checkpoint, expert or cv");
  const auto ed = get<std::string>("eval.difficulty");
  if (ed != "all" && ed != "easy" && ed != "medium" && ed != "hard") bad("eval.difficulty is invalid");
  const auto src = get<std::string>("score.source");
  if (src != "scenes" && src != "rewards") bad("score.source must be scenes or rewards");
  for (double v : get<std::vector<double>>("ablate.values")) {
    if (v < 0.0) bad("ablate.values must be >= 0");
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (!path.empty()) c.merge_file(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      fail(ErrorCode::ConfigInvalid, "override '" + o + "' is not key=value");
    }
    c.set(o.substr(0, eq), o.substr(eq + 1));
  }
  c.validate();
  return c;
}

}  // namespace irlvla::harness
