#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "irlvla/diffgraph/adam.hpp"
#include "irlvla/diffgraph/mlp.hpp"

namespace irlvla::diffgraph {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (little-endian):
//   "IRLVCKPT" | u32 version | u32 meta_len | meta JSON bytes | u32 n_bundles
//   per bundle: str name | u64 seed | u32 n_layers
//   per layer:  str name | u8 activation | u32 rows | u32 cols | rows*cols f64
//               (row-major) | rows f64 bias
// where str is u32 length followed by bytes.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, ParamBundle>> bundles;

  const ParamBundle& bundle(const std::string& name) const;
  bool has(const std::string& name) const;
  void put(const std::string& name, const ParamBundle& p);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws MissingCheckpoint when the file is absent, IoError when malformed.
Checkpoint load_checkpoint(const std::string& path);

// Optimizer state travels as two extra bundles, "<name>.adam_m" and
// "<name>.adam_v", with the step count in meta["adam_steps"][name].
void put_adam_state(Checkpoint& ckpt, const std::string& name, const ParamBundle& like,
                    const AdamState& state);
AdamState get_adam_state(const Checkpoint& ckpt, const std::string& name, const ParamBundle& like);

}  // namespace irlvla::diffgraph
