#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/types.h>

namespace depthcod {

inline constexpr std::string_view kCheckpointVersion = "v1";

/// Everything needed to resume training bit-exactly: parameters and buffers of every
/// network, optimizer moments, the latent-sampling RNG state and the loop counters.
/// Stored as a `DCODCKPT` tensor archive (see tensor_archive.hpp).
struct Checkpoint {
  std::string version{kCheckpointVersion};
  std::vector<std::pair<std::string, std::string>> config;  // comes back sorted by key
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws VersionMismatch when the stored version differs from `expected_version`
/// and CorruptArchive for damaged files.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::string_view expected_version = kCheckpointVersion);

}  // namespace depthcod
