#include "irlvla/policy/chain_log.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "irlvla/common/error.hpp"

namespace irlvla::policy {

namespace {

constexpr char kMagic[8] = {'I', 'R', 'L', 'V', 'C', 'H', 'N', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_vec(std::ostream& os, const Vector& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::IoError, "truncated chain log");
  return v;
}

Vector get_vec(std::istream& is, std::uint32_t n) {
  Vector v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    fail(ErrorCode::IoError, "truncated chain log");
  }
  return v;
}

}  // namespace

void write_chain_log(const std::string& path, const std::vector<ChainRecord>& records) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    const auto& c = r.chain;
    const auto steps = static_cast<std::uint32_t>(c.means.size());
    const auto dim = static_cast<std::uint32_t>(c.states.front().size());
    put<std::int32_t>(os, r.group);
    put<std::int32_t>(os, c.anchor);
    put<std::uint32_t>(os, steps);
    put<std::uint32_t>(os, dim);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.condition.size()));
    put<double>(os, r.reward);
    put_vec(os, c.condition);
    for (const auto& s : c.states) put_vec(os, s);
    for (const auto& mu : c.means) put_vec(os, mu);
    for (double s : c.sigmas) put<double>(os, s);
    for (std::uint32_t i = 0; i < steps; ++i) {
      put<double>(os, i < r.ref_logprobs.size() ? r.ref_logprobs[i] : 0.0);
    }
  }
  if (!os) fail(ErrorCode::IoError, "write failed for " + path);
}

std::vector<ChainRecord> read_chain_log(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open chain log " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    fail(ErrorCode::IoError, "not a chain log: " + path);
  }
  const auto n = get<std::uint32_t>(is);
  std::vector<ChainRecord> out(n);
  for (auto& r : out) {
    r.group = get<std::int32_t>(is);
    r.chain.anchor = get<std::int32_t>(is);
    const auto steps = get<std::uint32_t>(is);
    const auto dim = get<std::uint32_t>(is);
    const auto cdim = get<std::uint32_t>(is);
    r.reward = get<double>(is);
    r.chain.condition = get_vec(is, cdim);
    for (std::uint32_t i = 0; i <= steps; ++i) r.chain.states.push_back(get_vec(is, dim));
    for (std::uint32_t i = 0; i < steps; ++i) r.chain.means.push_back(get_vec(is, dim));
    for (std::uint32_t i = 0; i < steps; ++i) r.chain.sigmas.push_back(get<double>(is));
    for (std::uint32_t i = 0; i < steps; ++i) r.ref_logprobs.push_back(get<double>(is));
  }
  return out;
}

}  // namespace irlvla::policy
