#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

namespace depthcod {

/// Flat, ordered collection of named tensors plus string metadata.
///
/// On-disk layout (all integers little-endian):
///
///   magic[8]  u32 version_len  version bytes
///   u64 meta_count   { u32 klen key  u32 vlen value }*
///   u64 tensor_count { u32 nlen name  u8 dtype  u32 ndim  i64 dims[ndim]  u64 nbytes  bytes }*
///   u64 fnv1a64 checksum of everything above
///
/// dtype codes: 0 float32, 1 float64, 2 int64, 3 uint8, 4 int32.
struct TensorArchive {
  std::string version;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

inline constexpr char kTensorArchiveMagic[9] = "DCODTNSR";
inline constexpr char kCheckpointMagic[9] = "DCODCKPT";

/// Writes to a temporary sibling and renames it into place.
void write_tensor_archive(const std::filesystem::path& path, const TensorArchive& archive,
                          const char (&magic)[9] = kTensorArchiveMagic);

/// Throws CorruptArchive on bad magic, truncation or checksum failure.
TensorArchive read_tensor_archive(const std::filesystem::path& path,
                                  const char (&magic)[9] = kTensorArchiveMagic);

}  // namespace depthcod
