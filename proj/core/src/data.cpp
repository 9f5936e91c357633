#include "depthcod/data.hpp"

#include <algorithm>
#include <map>

#include <torch/torch.h>

#include "depthcod/error.hpp"
#include "depthcod/image_io.hpp"

namespace depthcod::data {
namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> scan_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingDirectory, dir.string());
  std::map<std::string, fs::path> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    auto [it, inserted] = stems.emplace(entry.path().stem().string(), entry.path());
    if (!inserted) {
      // Two files share a stem (e.g. a.png and a.jpg); keep the lexicographically smaller path.
      if (entry.path() < it->second) it->second = entry.path();
    }
  }
  return stems;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root) {
  const auto images = scan_stems(root / "Images");
  const auto depths = scan_stems(root / "Depth");
  const auto masks = scan_stems(root / "GT");

  DatasetManifest manifest;
  manifest.root = root;
  std::vector<std::string> missing;
  for (const auto& [stem, image_path] : images) {
    const auto d = depths.find(stem);
    const auto m = masks.find(stem);
    if (d == depths.end() || m == masks.end()) {
      missing.push_back(stem);
      continue;
    }
    manifest.entries.push_back({stem, image_path, d->second, m->second});
  }
  if (!missing.empty()) {
    std::string msg = "stems without depth or mask partner:";
    for (const auto& s : missing) msg += " " + s;
    throw Error(ErrorCode::StemMismatch, msg);
  }
  // std::map iteration already yields lexicographic stem order.
  return manifest;
}

Sample load_sample(const DatasetManifest& manifest, std::size_t index, const LoadOptions& options) {
  if (index >= manifest.size())
    throw Error(ErrorCode::BadConfig, "sample index " + std::to_string(index) + " out of range");
  if (options.size <= 0 || options.size % 32 != 0)
    throw Error(ErrorCode::BadShape, "sample size must be a positive multiple of 32");
  const auto& entry = manifest.entries[index];
  const int s = options.size;

  Sample sample;
  sample.stem = entry.stem;

  auto image = image_io::resize(image_io::read_rgb(entry.image_path), s, s);
  const auto mean = torch::tensor({options.mean[0], options.mean[1], options.mean[2]},
                                  torch::kFloat32).view({3, 1, 1});
  const auto stdv = torch::tensor({options.std[0], options.std[1], options.std[2]},
                                  torch::kFloat32).view({3, 1, 1});
  sample.image = ((image - mean) / stdv).contiguous();

  auto mask = image_io::resize(image_io::read_gray(entry.mask_path), s, s, /*nearest=*/true);
  sample.mask = (mask >= 0.5).to(torch::kFloat32).contiguous();

  if (options.load_depth) {
    auto depth = image_io::resize(image_io::read_gray_raw(entry.depth_path), s, s);
    const double lo = depth.min().item<double>();
    const double hi = depth.max().item<double>();
    if (hi > lo) {
      sample.depth = ((depth - lo) / (hi - lo)).clamp(0.0, 1.0).contiguous();
    } else {
      sample.depth = torch::zeros({1, s, s});
      sample.warnings.push_back("ConstantDepth: " + entry.depth_path.string());
    }
  } else {
    sample.depth = torch::zeros({1, s, s});
  }
  return sample;
}

Sample flip_horizontal(const Sample& sample) {
  Sample out = sample;
  out.image = sample.image.flip({2}).contiguous();
  out.depth = sample.depth.flip({2}).contiguous();
  out.mask = sample.mask.flip({2}).contiguous();
  return out;
}

Sample augment(const Sample& sample, std::mt19937_64& rng) {
  return coin_flip(rng) ? flip_horizontal(sample) : sample;
}

Batch collate(std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "cannot collate an empty batch");
  std::vector<torch::Tensor> images, depths, masks;
  Batch batch;
  for (const auto& s : samples) {
    if (!images.empty() && !s.image.sizes().equals(images.front().sizes()))
      throw Error(ErrorCode::ShapeMismatch, "samples in a batch must share one size");
    images.push_back(s.image);
    depths.push_back(s.depth);
    masks.push_back(s.mask);
    batch.stems.push_back(s.stem);
  }
  batch.image = torch::stack(images);
  batch.depth = torch::stack(depths);
  batch.mask = torch::stack(masks);
  return batch;
}

int import_external_depth(const fs::path& src_dir, const fs::path& dst_dir,
                          std::vector<std::string>* skipped) {
  if (!fs::is_directory(src_dir)) throw Error(ErrorCode::MissingDirectory, src_dir.string());
  fs::create_directories(dst_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(src_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  int converted = 0;
  for (const auto& file : files) {
    torch::Tensor raw;
    try {
      raw = image_io::read_gray_raw(file);
    } catch (const Error&) {
      if (skipped) skipped->push_back(file.filename().string());
      continue;
    }
    const double lo = raw.min().item<double>();
    const double hi = raw.max().item<double>();
    auto normalized = hi > lo ? (raw - lo) / (hi - lo) : torch::zeros_like(raw);
    image_io::write_gray(dst_dir / (file.stem().string() + ".png"), normalized);
    ++converted;
  }
  return converted;
}

}  // namespace depthcod::data
