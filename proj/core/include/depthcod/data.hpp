#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <torch/types.h>

namespace depthcod::data {

struct ManifestEntry {
  std::string stem;
  std::filesystem::path image_path;
  std::filesystem::path depth_path;
  std::filesystem::path mask_path;
};

/// Entries are unique by stem and sorted lexicographically.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
};

/// Scans `root/Images`, `root/Depth` and `root/GT`.
/// Throws MissingDirectory when a subdirectory is absent and StemMismatch when an
/// image stem has no depth or mask partner (the message lists every offending stem).
DatasetManifest load_manifest(const std::filesystem::path& root);

struct LoadOptions {
  int size = 352;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  bool load_depth = true;  // when false the depth file is not decoded; depth is all zeros
};

/// One aligned triplet at a common square resolution.
///   image [3,S,S] standardized, depth [1,S,S] in [0,1], mask [1,S,S] in {0,1}.
struct Sample {
  torch::Tensor image;
  torch::Tensor depth;
  torch::Tensor mask;
  std::string stem;
  std::vector<std::string> warnings;
};

struct Batch {
  torch::Tensor image;  // [B,3,S,S]
  torch::Tensor depth;  // [B,1,S,S]
  torch::Tensor mask;   // [B,1,S,S]
  std::vector<std::string> stems;

  int64_t batch_size() const { return image.size(0); }
};

Sample load_sample(const DatasetManifest& manifest, std::size_t index, const LoadOptions& options);

/// Flips image, depth and mask together along the width axis.
Sample flip_horizontal(const Sample& sample);

/// Flips with probability 0.5; no other augmentation is applied.
Sample augment(const Sample& sample, std::mt19937_64& rng);

/// Stacks samples along a new leading dimension; all samples must share one size.
Batch collate(std::span<const Sample> samples);

/// Converts every decodable image in `src_dir` to an 8-bit single-channel PNG
/// min-max stretched to [0,255], written under the same stem in `dst_dir`.
/// Undecodable files are skipped and their names appended to `skipped`.
int import_external_depth(const std::filesystem::path& src_dir,
                          const std::filesystem::path& dst_dir,
                          std::vector<std::string>* skipped = nullptr);

/// Fair coin from the top bit of one draw; stable across standard library implementations.
inline bool coin_flip(std::mt19937_64& rng) { return (rng() >> 63) != 0; }

}  // namespace depthcod::data
