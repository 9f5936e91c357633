#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "depthcod/config.hpp"
#include "depthcod/synthetic.hpp"

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "depthcod") {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
      path_ = base / (tag + "_" + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path toy_dataset(const TempDir& dir, int count = 10, int size = 64) {
  const auto root = dir / "toy";
  depthcod::synthetic::ToySpec spec;
  spec.count = count;
  spec.size = size;
  depthcod::synthetic::write_toy_dataset(root, spec);
  return root;
}

inline depthcod::TrainConfig tiny_config(depthcod::ModelVariant variant, int size = 64) {
  depthcod::TrainConfig c;
  c.variant = variant;
  c.backbone = depthcod::BackboneKind::Tiny;
  c.image_size = size;
  c.batch_size = 2;
  c.feature_channels = 8;
  c.latent_dim = 4;
  c.dis_channels = 8;
  c.confidence_samples = 2;
  return c;
}

}  // namespace fixture
