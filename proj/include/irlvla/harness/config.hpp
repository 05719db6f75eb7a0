#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "irlvla/metrics/oracle.hpp"
#include "irlvla/policy/diffusion_policy.hpp"
#include "irlvla/rl/ppo.hpp"
#include "irlvla/rwm/dataset.hpp"
#include "irlvla/rwm/reward_model.hpp"
#include "irlvla/rwm/train.hpp"
#include "irlvla/scene/types.hpp"

namespace irlvla::harness {

// Layered run configuration: built-in defaults, then a JSON file, then
// `key=value` overrides on dotted paths. Every key must already exist in the
// defaults and keep its JSON type (integers may be given where a number is
// expected).
class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& defaults();

  // Throws ConfigInvalid / IoError.
  void merge_file(const std::string& path);
  void merge(const nlohmann::json& overlay);
  void set(const std::string& dotted_key, const std::string& value);
  void validate() const;

  const nlohmann::json& tree() const { return data_; }
  const nlohmann::json& at(const std::string& dotted_key) const;
  template <typename T>
  T get(const std::string& dotted_key) const {
    return at(dotted_key).get<T>();
  }

  // Keys whose values differ between two configs, in dotted form.
  static std::vector<std::string> diff(const RunConfig& a, const RunConfig& b);

  // Stream seed for a named component, derived from the top-level seed.
  std::uint64_t derived_seed(const std::string& name) const;

  std::string data_dir() const;
  std::string run_dir() const;
  std::string rl_dir() const;  // defaults to run_dir when empty

  scene::SceneConfig scene_config() const;
  metrics::MetricConfig metric_config() const;
  metrics::EpdmsWeights epdms_weights() const;
  policy::PolicyConfig policy_config() const;
  rwm::RwmConfig rwm_config() const;
  rwm::RwmTrainConfig rwm_train_config() const;
  rwm::RwmWeights rwm_weights() const;
  rwm::CollectConfig collect_config() const;
  rl::PPOConfig ppo_config() const;

 private:
  nlohmann::json data_;
};

// Loads defaults <- file (when non-empty) <- overrides, then validates.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace irlvla::harness
