#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include "json.hpp"

#include "irlvla/common/error.hpp"
#include "irlvla/harness/commands.hpp"
#include "irlvla/harness/config.hpp"

namespace {

using Command = std::function<nlohmann::json(const irlvla::harness::RunConfig&)>;

// Error lines are single-line JSON on stdout so scripts can parse them.
int report_error(std::string_view code, const std::string& message) {
  nlohmann::json j{{"status", "error"}, {"code", code}, {"message", message}};
  std::cout << j.dump() << std::endl;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale diffusion planner trained with imitation, a learned reward model and PPO"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;

  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"gen-data", {"Generate scenes, anchor sets and the labeled reward dataset", irlvla::harness::cmd_gen_data}},
      {"pretrain", {"Imitation-pretrain the diffusion policy", irlvla::harness::cmd_pretrain}},
      {"train-rwm", {"Train the reward world model on oracle labels", irlvla::harness::cmd_train_rwm}},
      {"rl-finetune", {"Fine-tune the policy with PPO against the reward model", irlvla::harness::cmd_rl_finetune}},
      {"eval", {"Score a policy on held-out scenes with the rule-based oracle", irlvla::harness::cmd_eval}},
      {"ablate-wil", {"Sweep the imitation loss weight during fine-tuning", irlvla::harness::cmd_ablate_wil}},
      {"score", {"Batch-score a scene or reward dataset with the oracle", irlvla::harness::cmd_score}},
  };

  std::map<std::string, std::vector<std::string>> positional;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config,-c", config_path, "JSON config file layered over the defaults");
    sub->add_option("--set,-s", overrides, "Override a config key, key=value (repeatable)");
    sub->add_option("overrides", positional[name], "Additional key=value overrides");
    sub->add_flag("--quiet,-q", quiet, "Suppress progress output on stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what());
  }

  for (const auto& [name, entry] : commands) {
    if (!app.got_subcommand(name)) continue;
    auto all = overrides;
    all.insert(all.end(), positional[name].begin(), positional[name].end());
    try {
      irlvla::harness::set_verbose(!quiet);
      const auto cfg = irlvla::harness::load_config(config_path, all);
      nlohmann::json out = entry.second(cfg);
      out["status"] = "ok";
      out["command"] = name;
      std::cout << out.dump() << std::endl;
      return 0;
    } catch (const irlvla::Error& e) {
      return report_error(irlvla::to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      return report_error("InternalError", e.what());
    }
  }
  return report_error("UsageError", "no subcommand");
}
