#include "irlvla/diffgraph/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "irlvla/common/error.hpp"

namespace irlvla::diffgraph {

namespace {

constexpr char kMagic[8] = {'I', 'R', 'L', 'V', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    fail(ErrorCode::IoError, "truncated checkpoint " + path);
  }
  return v;
}

std::string get_str(std::istream& is, const std::string& path) {
  const auto n = get<std::uint32_t>(is, path);
  if (n > (1u << 26)) fail(ErrorCode::IoError, "corrupt string length in " + path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) fail(ErrorCode::IoError, "truncated checkpoint " + path);
  return s;
}

ParamBundle grads_as_bundle(const ParamBundle& like, const Gradients& g) {
  ParamBundle b = like;
  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    b.layers[i].weight = g.layers[i].weight;
    b.layers[i].bias = g.layers[i].bias;
  }
  return b;
}

Gradients bundle_as_grads(const ParamBundle& b) {
  Gradients g;
  for (const auto& l : b.layers) g.layers.push_back({l.weight, l.bias});
  return g;
}

}  // namespace

const ParamBundle& Checkpoint::bundle(const std::string& name) const {
  for (const auto& [n, b] : bundles) {
    if (n == name) return b;
  }
  fail(ErrorCode::IoError, "checkpoint has no bundle '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& entry : bundles) {
    if (entry.first == name) return true;
  }
  return false;
}

void Checkpoint::put(const std::string& name, const ParamBundle& p) {
  for (auto& [n, b] : bundles) {
    if (n == name) {
      b = p;
      return;
    }
  }
  bundles.emplace_back(name, p);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  // Write to a sibling temp file and rename so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::IoError, "cannot write " + tmp);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put_str(os, ckpt.meta.dump());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.bundles.size()));
    for (const auto& [name, b] : ckpt.bundles) {
      put_str(os, name);
      put<std::uint64_t>(os, b.seed);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(b.layers.size()));
      for (const auto& l : b.layers) {
        put_str(os, l.name);
        put<std::uint8_t>(os, static_cast<std::uint8_t>(l.activation));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.rows()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.cols()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
          for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put<double>(os, l.weight(r, c));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) put<double>(os, l.bias(r));
      }
    }
    if (!os) fail(ErrorCode::IoError, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::MissingCheckpoint, "checkpoint not found: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    fail(ErrorCode::IoError, "not a checkpoint file: " + path);
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::IoError, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(get_str(is, path));
  const auto nb = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < nb; ++i) {
    std::string name = get_str(is, path);
    ParamBundle b;
    b.seed = get<std::uint64_t>(is, path);
    const auto nl = get<std::uint32_t>(is, path);
    for (std::uint32_t j = 0; j < nl; ++j) {
      DenseLayer l;
      l.name = get_str(is, path);
      l.activation = static_cast<Activation>(get<std::uint8_t>(is, path));
      const auto rows = get<std::uint32_t>(is, path);
      const auto cols = get<std::uint32_t>(is, path);
      l.weight.resize(rows, cols);
      l.bias.resize(rows);
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = get<double>(is, path);
      }
      for (std::uint32_t r = 0; r < rows; ++r) l.bias(r) = get<double>(is, path);
      b.layers.push_back(std::move(l));
    }
    ckpt.bundles.emplace_back(std::move(name), std::move(b));
  }
  return ckpt;
}

void put_adam_state(Checkpoint& ckpt, const std::string& name, const ParamBundle& like,
                    const AdamState& state) {
  ckpt.put(name + ".adam_m", grads_as_bundle(like, state.m));
  ckpt.put(name + ".adam_v", grads_as_bundle(like, state.v));
  ckpt.meta["adam_steps"][name] = state.step;
}

AdamState get_adam_state(const Checkpoint& ckpt, const std::string& name, const ParamBundle& like) {
  if (!ckpt.has(name + ".adam_m")) return make_adam_state(like);
  AdamState s;
  s.m = bundle_as_grads(ckpt.bundle(name + ".adam_m"));
  s.v = bundle_as_grads(ckpt.bundle(name + ".adam_v"));
  s.step = ckpt.meta.value("adam_steps", nlohmann::json::object()).value(name, 0L);
  return s;
}

}  // namespace irlvla::diffgraph
