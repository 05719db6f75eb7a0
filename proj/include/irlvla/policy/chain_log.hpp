#pragma once

#include <string>
#include <vector>

#include "irlvla/policy/diffusion_policy.hpp"

namespace irlvla::policy {

// A chain plus the per-transition reference log-probabilities and terminal
// reward recorded at collection time.
struct ChainRecord {
  DenoiseChain chain;
  std::vector<double> ref_logprobs;
  double reward = 0.0;
  int group = 0;
};

// Binary replay log: "IRLVCHN1" | u32 count | records, each
//   i32 group | i32 anchor | u32 steps | u32 dim | u32 cond_dim | f64 reward
//   | cond | states (steps+1) | means (steps) | sigmas | ref_logprobs.
void write_chain_log(const std::string& path, const std::vector<ChainRecord>& records);
std::vector<ChainRecord> read_chain_log(const std::string& path);

}  // namespace irlvla::policy
