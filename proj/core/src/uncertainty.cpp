#include "depthcod/uncertainty.hpp"

#include <torch/torch.h>

#include "depthcod/blocks.hpp"
#include "depthcod/error.hpp"

namespace depthcod::uncertainty {

torch::Tensor mean_prediction(std::span<const torch::Tensor> maps) {
  if (maps.empty()) throw Error(ErrorCode::EmptyList, "mean_prediction needs at least one map");
  auto sum = maps.front().clone();
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (!maps[i].sizes().equals(sum.sizes()))
      throw Error(ErrorCode::ShapeMismatch, "prediction maps differ in shape");
    sum += maps[i];
  }
  return sum / static_cast<double>(maps.size());
}

torch::Tensor entropy(const torch::Tensor& p) {
  // 1 - 1e-8 rounds to 1 in float32, so clamp and evaluate in double.
  const auto q = p.to(torch::kFloat64).clamp(kProbClamp, 1.0 - kProbClamp);
  return (-(q * torch::log2(q) + (1.0 - q) * torch::log2(1.0 - q))).to(p.scalar_type());
}

torch::Tensor confidence(const torch::Tensor& p_mean) { return 1.0 - entropy(p_mean); }

ModalWeights modal_weights(const torch::Tensor& c_rgb, const torch::Tensor& c_rgbd) {
  if (!c_rgb.sizes().equals(c_rgbd.sizes()))
    throw Error(ErrorCode::ShapeMismatch, "confidence maps differ in shape");
  const auto total = c_rgb + c_rgbd;
  const auto degenerate = total <= kWeightGuard;
  const auto safe_total = torch::where(degenerate, torch::ones_like(total), total);
  const auto half = torch::full_like(total, 0.5);
  ModalWeights w;
  w.rgb = torch::where(degenerate, half, c_rgb / safe_total);
  w.rgbd = torch::where(degenerate, half, c_rgbd / safe_total);
  return w;
}

ConfidenceMaps confidence_maps(std::span<const torch::Tensor> rgb_samples,
                               std::span<const torch::Tensor> rgbd_samples) {
  ConfidenceMaps m;
  m.c_rgb = confidence(mean_prediction(rgb_samples)).clamp(0.0, 1.0);
  m.c_rgbd = confidence(mean_prediction(rgbd_samples)).clamp(0.0, 1.0);
  m.u_rgb = 1.0 - m.c_rgb;
  m.u_rgbd = 1.0 - m.c_rgbd;
  auto w = modal_weights(m.c_rgb, m.c_rgbd);
  m.w_rgb = w.rgb;
  m.w_rgbd = w.rgbd;
  return m;
}

SampledPredictions sample_predictions(GeneratorImpl& generator, const EncodedFeatures& features,
                                      int samples, torch::Generator& rng) {
  if (!generator.caps().latent)
    throw Error(ErrorCode::VariantUnsupported, "latent sampling needs the full variant");
  if (samples < 1) throw Error(ErrorCode::BadConfig, "sample count must be at least 1");
  torch::NoGradGuard guard;
  const auto batch = features.rgb[0].size(0);
  SampledPredictions out;
  out.depth = torch::sigmoid(generator.depth_head(features));
  for (int t = 0; t < samples; ++t) {
    const auto z = generator.sample_latent(batch, rng);
    const auto z_d = generator.sample_latent(batch, rng);
    out.rgb.push_back(torch::sigmoid(generator.primary_head(features, z)));
    out.rgbd.push_back(torch::sigmoid(generator.fusion_head(features, z_d)));
  }
  return out;
}

SampledPredictions sample_predictions(GeneratorImpl& generator, const torch::Tensor& x,
                                      const torch::Tensor& d, int samples, torch::Generator& rng) {
  if (!generator.caps().latent)
    throw Error(ErrorCode::VariantUnsupported, "latent sampling needs the full variant");
  torch::NoGradGuard guard;
  return sample_predictions(generator, generator.encode(x, d), samples, rng);
}

torch::Tensor multi_size_uncertainty(GeneratorImpl& generator, const torch::Tensor& x,
                                     const torch::Tensor& d, std::span<const int> sizes,
                                     bool fusion_head) {
  if (sizes.empty()) throw Error(ErrorCode::EmptyList, "multi-size uncertainty needs sizes");
  torch::NoGradGuard guard;
  const auto h = x.size(2), w = x.size(3);
  std::vector<torch::Tensor> maps;
  for (const int s : sizes) {
    const auto xs = nn::upsample_to(x, s, s);
    const auto ds = d.defined() ? nn::upsample_to(d, s, s) : torch::Tensor();
    const auto bundle = generator.forward(xs, ds);
    const auto prob = fusion_head && bundle.has_rgbd() ? bundle.rgbd_prob() : bundle.rgb_prob();
    maps.push_back(nn::upsample_to(prob, h, w));
  }
  return entropy(mean_prediction(maps));
}

}  // namespace depthcod::uncertainty
