#pragma once

#include <cstdint>
#include <filesystem>

namespace depthcod::synthetic {

struct ToySpec {
  int count = 10;
  int size = 64;
  std::uint64_t seed = 7;
  /// Color offset between object and background; smaller values camouflage harder.
  double contrast = 0.25;
};

/// Writes a toy dataset (`Images/`, `Depth/`, `GT/`) of textured ellipses whose
/// depth is nearer than the surrounding ramp. Output is a pure function of `spec`.
void write_toy_dataset(const std::filesystem::path& root, const ToySpec& spec);

}  // namespace depthcod::synthetic
