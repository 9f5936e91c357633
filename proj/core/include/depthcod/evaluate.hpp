#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "depthcod/data.hpp"
#include "depthcod/generator.hpp"
#include "depthcod/metrics.hpp"

namespace depthcod {

struct EvalOptions {
  int size = 352;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  int sample_eval = 0;  // 0: z = 0; T > 0: mean of T latent draws
  std::uint64_t seed = 0;
  std::string dataset;
};

/// Map scored for one image: the fusion head when present, otherwise the primary head.
/// Returns [B,1,H,W] probabilities; the generator is switched to eval mode.
torch::Tensor predict_map(GeneratorImpl& generator, const torch::Tensor& x, const torch::Tensor& d,
                          int sample_eval, torch::Generator* rng);

/// Scores every image of `manifest`. Ground truth is compared at the evaluation size.
metrics::MetricReport evaluate(GeneratorImpl& generator, const data::DatasetManifest& manifest,
                               const EvalOptions& options);

}  // namespace depthcod
