#pragma once

#include <span>
#include <vector>

#include <torch/types.h>

#include "depthcod/generator.hpp"

namespace depthcod::uncertainty {

inline constexpr double kProbClamp = 1e-8;
inline constexpr double kWeightGuard = 1e-8;

/// Confidence of each modality and the pixel-wise weights derived from it.
/// All maps lie in [0,1]; w_rgb + w_rgbd == 1 per pixel.
struct ConfidenceMaps {
  torch::Tensor c_rgb, c_rgbd;
  torch::Tensor u_rgb, u_rgbd;
  torch::Tensor w_rgb, w_rgbd;
};

struct SampledPredictions {
  std::vector<torch::Tensor> rgb;   // T probability maps
  std::vector<torch::Tensor> rgbd;  // T probability maps
  torch::Tensor depth;              // d', computed once
};

/// Pixel-wise arithmetic mean; throws EmptyList for an empty list.
torch::Tensor mean_prediction(std::span<const torch::Tensor> maps);

/// Binary entropy in bits with p clamped to [1e-8, 1 - 1e-8].
torch::Tensor entropy(const torch::Tensor& p);

/// 1 - entropy(p_mean).
torch::Tensor confidence(const torch::Tensor& p_mean);

struct ModalWeights {
  torch::Tensor rgb, rgbd;
};

/// c / (c_rgb + c_rgbd); pixels whose confidence sum is at most 1e-8 get (0.5, 0.5).
ModalWeights modal_weights(const torch::Tensor& c_rgb, const torch::Tensor& c_rgbd);

ConfidenceMaps confidence_maps(std::span<const torch::Tensor> rgb_samples,
                               std::span<const torch::Tensor> rgbd_samples);

/// T independent (z, z_d) draws through the Full generator. Encoders run once; only
/// latent injection and the two camouflage decoders are repeated. Runs without grad.
SampledPredictions sample_predictions(GeneratorImpl& generator, const EncodedFeatures& features,
                                      int samples, torch::Generator& rng);

SampledPredictions sample_predictions(GeneratorImpl& generator, const torch::Tensor& x,
                                      const torch::Tensor& d, int samples, torch::Generator& rng);

/// Uncertainty (entropy of the mean) over predictions made at several input sizes and
/// resampled to the size of `x`. Uses the fusion head when present and z = 0.
torch::Tensor multi_size_uncertainty(GeneratorImpl& generator, const torch::Tensor& x,
                                     const torch::Tensor& d, std::span<const int> sizes,
                                     bool fusion_head);

}  // namespace depthcod::uncertainty
