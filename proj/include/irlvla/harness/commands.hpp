#pragma once

#include <string>

#include "json.hpp"

#include "irlvla/harness/config.hpp"

namespace irlvla::harness {

// Every command writes its materialized config as config_<command>.json into
// the directory it produces outputs in, and returns a JSON summary.
nlohmann::json cmd_gen_data(const RunConfig& cfg);
nlohmann::json cmd_pretrain(const RunConfig& cfg);
nlohmann::json cmd_train_rwm(const RunConfig& cfg);
nlohmann::json cmd_rl_finetune(const RunConfig& cfg);
nlohmann::json cmd_eval(const RunConfig& cfg);
nlohmann::json cmd_ablate_wil(const RunConfig& cfg);
nlohmann::json cmd_score(const RunConfig& cfg);

// Progress lines go to stderr unless disabled.
void set_verbose(bool on);

// Artifact locations shared by the commands.
struct Paths {
  std::string scenes_train, scenes_eval, rewards, gen_summary;
  std::string policy_pt, pretrain_log;
  std::string rwm, rwm_report_json, rwm_report_csv, rwm_epochs, rwm_split;
  std::string policy_rl, rl_state, rl_log, rl_summary;

  std::string anchors(int K) const;
  std::string data_dir;
};
Paths paths_for(const RunConfig& cfg);

}  // namespace irlvla::harness
