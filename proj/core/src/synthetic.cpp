#include "depthcod/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include <torch/torch.h>

#include "depthcod/image_io.hpp"

namespace depthcod::synthetic {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace

void write_toy_dataset(const std::filesystem::path& root, const ToySpec& spec) {
  namespace fs = std::filesystem;
  for (const char* sub : {"Images", "Depth", "GT"}) fs::create_directories(root / sub);

  std::mt19937_64 rng(spec.seed);
  const int n = spec.size;
  for (int i = 0; i < spec.count; ++i) {
    const double cx = uniform(rng, 0.3, 0.7) * n;
    const double cy = uniform(rng, 0.3, 0.7) * n;
    const double rx = uniform(rng, 0.15, 0.3) * n;
    const double ry = uniform(rng, 0.15, 0.3) * n;
    double bg[3], fg[3];
    for (int c = 0; c < 3; ++c) {
      bg[c] = uniform(rng, 0.25, 0.75);
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      fg[c] = std::clamp(bg[c] + sign * spec.contrast, 0.0, 1.0);
    }
    const double ramp_angle = uniform(rng, 0.0, 6.283185307179586);
    const double stripe = uniform(rng, 4.0, 9.0);

    auto image = torch::empty({3, n, n});
    auto depth = torch::empty({1, n, n});
    auto mask = torch::empty({1, n, n});
    auto img_a = image.accessor<float, 3>();
    auto dep_a = depth.accessor<float, 3>();
    auto msk_a = mask.accessor<float, 3>();
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const bool inside = dx * dx + dy * dy <= 1.0;
        const double texture = 0.06 * std::sin((x + y) / stripe) + uniform(rng, -0.04, 0.04);
        for (int c = 0; c < 3; ++c)
          img_a[c][y][x] = static_cast<float>(std::clamp((inside ? fg[c] : bg[c]) + texture, 0.0, 1.0));
        const double ramp = 0.5 + 0.25 * (std::cos(ramp_angle) * (x - n / 2.0) +
                                          std::sin(ramp_angle) * (y - n / 2.0)) / n;
        const double d = (inside ? 0.9 : ramp * 0.6) + uniform(rng, -0.03, 0.03);
        dep_a[0][y][x] = static_cast<float>(std::clamp(d, 0.0, 1.0));
        msk_a[0][y][x] = inside ? 1.0f : 0.0f;
      }
    }
    char stem[32];
    std::snprintf(stem, sizeof(stem), "toy_%04d", i);
    image_io::write_rgb(root / "Images" / (std::string(stem) + ".png"), image);
    image_io::write_gray(root / "Depth" / (std::string(stem) + ".png"), depth);
    image_io::write_gray(root / "GT" / (std::string(stem) + ".png"), mask);
  }
}

}  // namespace depthcod::synthetic
