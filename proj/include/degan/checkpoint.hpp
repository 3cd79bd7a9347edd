// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "degan/discriminator.hpp"
#include "degan/error.hpp"
#include "degan/generator.hpp"

namespace degan {

// Layout (little-endian):
//   "DEGANCKP" | u32 version | u64 header bytes | JSON header | float32 payload | u64 FNV-1a
// The header lists every array as {name, section, shape, offset, count}, with
// offsets counted in floats from the start of the payload. The checksum covers
// every preceding byte.
inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'E', 'G', 'A', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string section;  // "generator", "discriminator", "adam.generator.m", ...
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointData {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& section, const std::string& name) const {
    for (const auto& a : arrays)
      if (a.section == section && a.name == name) return &a;
    return nullptr;
  }
  bool has_section(const std::string& section) const {
    for (const auto& a : arrays)
      if (a.section == section) return true;
    return false;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const char* p, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename U>
void put(std::string& out, U v) {
  char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  out.append(b, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(U) > in.size()) throw IncompatibleCheckpoint("'" + path + "' is truncated");
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return v;
}

}  // namespace detail

/// Writes via a temporary file and rename, so an interrupted save never
/// replaces a good checkpoint with a partial one.
inline void write_checkpoint(const std::filesystem::path& path, const CheckpointData& ck) {
  nlohmann::json header;
  header["meta"] = ck.meta;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : ck.arrays) {
    std::size_t expect = 1;
    for (int d : a.shape) expect *= static_cast<std::size_t>(d);
    if (expect != a.data.size())
      throw Error("checkpoint array '" + a.name + "': shape does not match data size");
    header["arrays"].push_back({{"section", a.section},
                                {"name", a.name},
                                {"shape", a.shape},
                                {"offset", offset},
                                {"count", a.data.size()}});
    offset += a.data.size();
  }
  const std::string htext = header.dump();

  std::string out(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, htext.size());
  out += htext;
  for (const auto& a : ck.arrays)
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
  detail::put<std::uint64_t>(out, detail::fnv1a(out.data(), out.size()));

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

/// Reads and fully validates a checkpoint. Any structural problem (wrong
/// magic, other version, truncation, checksum mismatch, malformed header)
/// raises IncompatibleCheckpoint.
inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + p + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < kCheckpointMagic.size() ||
      std::memcmp(buf.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0)
    throw IncompatibleCheckpoint("'" + p + "' is not a degan checkpoint");
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::get<std::uint32_t>(buf, pos, p);
  if (version != kCheckpointVersion)
    throw IncompatibleCheckpoint("'" + p + "' has format version " + std::to_string(version) +
                                 ", this build reads version " +
                                 std::to_string(kCheckpointVersion));
  const auto hlen = detail::get<std::uint64_t>(buf, pos, p);
  if (hlen > buf.size() - pos) throw IncompatibleCheckpoint("'" + p + "' is truncated");
  if (buf.size() < sizeof(std::uint64_t)) throw IncompatibleCheckpoint("'" + p + "' is truncated");
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::size_t cpos = body;
  const auto stored = detail::get<std::uint64_t>(buf, cpos, p);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                   buf.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
  } catch (const nlohmann::json::exception&) {
    throw IncompatibleCheckpoint("'" + p + "' has a damaged header (truncated?)");
  }
  pos += hlen;
  if (body < pos) throw IncompatibleCheckpoint("'" + p + "' is truncated");
  if (detail::fnv1a(buf.data(), body) != stored)
    throw IncompatibleCheckpoint("'" + p + "' is truncated or corrupted (checksum mismatch)");

  CheckpointData ck;
  try {
    ck.meta = header.at("meta");
    const std::size_t payload = (body - pos) / sizeof(float);
    if ((body - pos) % sizeof(float) != 0)
      throw IncompatibleCheckpoint("'" + p + "' has a misaligned payload");
    for (const auto& e : header.at("arrays")) {
      NamedArray a;
      a.section = e.at("section").get<std::string>();
      a.name = e.at("name").get<std::string>();
      a.shape = e.at("shape").get<std::vector<int>>();
      const auto off = e.at("offset").get<std::uint64_t>();
      const auto cnt = e.at("count").get<std::uint64_t>();
      if (off > payload || cnt > payload - off)
        throw IncompatibleCheckpoint("'" + p + "': array '" + a.name + "' lies outside the payload");
      a.data.resize(cnt);
      std::memcpy(a.data.data(), buf.data() + pos + off * sizeof(float), cnt * sizeof(float));
      ck.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw IncompatibleCheckpoint("'" + p + "' has a malformed header: " + ex.what());
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Network sections

inline nlohmann::json config_json(const GeneratorConfig& c) {
  return {{"depth", c.depth}, {"base_channels", c.base_channels}, {"kernel_size", c.kernel_size}};
}
inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.depth = j.at("depth").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  return c;
}
inline nlohmann::json config_json(const DiscriminatorConfig& c) {
  return {{"base_channels", c.base_channels},
          {"kernel_size", c.kernel_size},
          {"leaky_slope", c.leaky_slope}};
}
inline DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.base_channels = j.at("base_channels").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<float>();
  return c;
}

template <typename Net>
void append_params(CheckpointData& ck, const std::string& section, Net& net) {
  for (const auto& pv : net.params())
    ck.arrays.push_back({section, pv.name, pv.shape, {pv.value.begin(), pv.value.end()}});
}

/// Copies a section into `net`. Either every array matches by name and shape
/// and all are copied, or nothing is modified.
template <typename Net>
void restore_params(const CheckpointData& ck, const std::string& section, Net& net) {
  auto params = net.params();
  std::vector<const NamedArray*> src;
  std::size_t in_section = 0;
  for (const auto& a : ck.arrays) in_section += a.section == section;
  if (in_section != params.size())
    throw IncompatibleCheckpoint("checkpoint section '" + section + "' holds " +
                                 std::to_string(in_section) + " arrays, the network has " +
                                 std::to_string(params.size()));
  for (const auto& pv : params) {
    const NamedArray* a = ck.find(section, pv.name);
    if (a == nullptr) throw IncompatibleCheckpoint("checkpoint lacks '" + section + "/" + pv.name + "'");
    if (a->shape != pv.shape || a->data.size() != pv.value.size())
      throw IncompatibleCheckpoint("checkpoint array '" + section + "/" + pv.name +
                                   "' has a different shape than the network");
    src.push_back(a);
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(src[i]->data.begin(), src[i]->data.end(), params[i].value.begin());
}

/// Generator from a checkpoint written by the trainer (enough for inference).
inline Generator<float> load_generator(const std::filesystem::path& path) {
  const auto ck = read_checkpoint(path);
  GeneratorConfig cfg;
  try {
    cfg = generator_config_from_json(ck.meta.at("generator"));
  } catch (const nlohmann::json::exception&) {
    throw IncompatibleCheckpoint("'" + path.string() + "' has no generator configuration");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw IncompatibleCheckpoint("'" + path.string() + "': " + e.what());
  }
  Generator<float> g(cfg, 0);
  restore_params(ck, "generator", g);
  return g;
}

}  // namespace degan
