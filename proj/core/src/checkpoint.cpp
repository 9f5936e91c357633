#include "depthcod/checkpoint.hpp"

#include <charconv>

#include "depthcod/error.hpp"
#include "depthcod/tensor_archive.hpp"

namespace depthcod {
namespace {

constexpr std::string_view kConfigPrefix = "config.";

template <typename T>
T parse_counter(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw Error(ErrorCode::CorruptArchive, "checkpoint lacks '" + key + "'");
  T v{};
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorCode::CorruptArchive, "bad '" + key + "' in checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  TensorArchive archive;
  archive.version = checkpoint.version;
  archive.meta["epoch"] = std::to_string(checkpoint.epoch);
  archive.meta["step"] = std::to_string(checkpoint.step);
  for (const auto& [k, v] : checkpoint.config) archive.meta[std::string(kConfigPrefix) + k] = v;
  archive.tensors = checkpoint.tensors;
  write_tensor_archive(path, archive, kCheckpointMagic);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_version) {
  auto archive = read_tensor_archive(path, kCheckpointMagic);
  if (archive.version != expected_version)
    throw Error(ErrorCode::VersionMismatch, "checkpoint " + path.string() + " has version '" +
                                                archive.version + "', reader expects '" +
                                                std::string(expected_version) + "'");
  Checkpoint c;
  c.version = archive.version;
  c.epoch = parse_counter<int>(archive.meta, "epoch");
  c.step = parse_counter<std::int64_t>(archive.meta, "step");
  for (const auto& [k, v] : archive.meta)
    if (k.starts_with(kConfigPrefix)) c.config.emplace_back(k.substr(kConfigPrefix.size()), v);
  c.tensors = std::move(archive.tensors);
  return c;
}

}  // namespace depthcod
