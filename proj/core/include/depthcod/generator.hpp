#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "depthcod/backbone.hpp"
#include "depthcod/blocks.hpp"
#include "depthcod/config.hpp"

namespace depthcod {

/// Which heads and training machinery a variant carries.
struct Capabilities {
  bool depth_head = false;     // auxiliary depth decoder (or, for CrossFusion, the depth-input decoder)
  bool fusion_head = false;    // multi-modal fusion convolutions + fusion decoder
  bool latent = false;         // z / z_d injection
  bool discriminator = false;  // adversarial training with confidence weighting
  bool depth_input = false;    // consumes the depth map as a network input
};

Capabilities capabilities(ModelVariant variant);

struct GeneratorOptions {
  BackboneKind backbone = BackboneKind::ResNet50;
  int64_t feature_channels = 32;
  int64_t latent_dim = 32;
  bool freeze_bn = false;

  static GeneratorOptions from(const TrainConfig& config);
};

/// Per-branch reduced feature pyramids produced by `GeneratorImpl::encode`.
struct EncodedFeatures {
  nn::FeaturePyramid rgb;
  std::optional<nn::FeaturePyramid> depth;
  std::optional<nn::FeaturePyramid> fused;
  int64_t height = 0;
  int64_t width = 0;
};

/// Outputs of one generator run. Absent heads hold undefined tensors.
struct PredictionBundle {
  torch::Tensor rgb_logits;    // primary camouflage head (the single head for Base/Early/Late)
  torch::Tensor rgbd_logits;   // fusion head
  torch::Tensor depth_logits;  // depth head before the logistic function

  bool has_rgbd() const { return rgbd_logits.defined(); }
  bool has_depth() const { return depth_logits.defined(); }

  torch::Tensor rgb_prob() const;
  torch::Tensor rgbd_prob() const;
  torch::Tensor depth() const;  // d' in [0,1]

  /// The head evaluated by default: fusion when present, otherwise the primary head.
  torch::Tensor eval_prob() const { return has_rgbd() ? rgbd_prob() : rgb_prob(); }
};

/// Reduced encoder: backbone followed by one multi-scale dilated block per stage.
class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(BackboneKind kind, int64_t in_channels, int64_t feature_channels, bool freeze_bn);
  nn::FeaturePyramid forward(const torch::Tensor& x);

  nn::Backbone& backbone() { return backbone_; }

 private:
  nn::Backbone backbone_{nullptr};
  torch::nn::ModuleList reducers_;
};
TORCH_MODULE(Encoder);

/// Three-headed camouflage generator and its ablation / fusion-baseline variants.
///
/// Parameter groups: theta_y (RGB encoder, plus the input adapter for EarlyFusion),
/// beta_y (RGB decoder), theta_d / beta_d (depth-branch encoder / decoder),
/// alpha (fusion convolutions and fusion decoder, or the late-fusion convolution),
/// latent_rgb / latent_rgbd (z and z_d injection).
class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(ModelVariant variant, GeneratorOptions options);

  ModelVariant variant() const noexcept { return variant_; }
  const Capabilities& caps() const noexcept { return caps_; }
  const GeneratorOptions& options() const noexcept { return options_; }

  /// Runs every encoder once. `d` is required only when the variant takes depth as input.
  EncodedFeatures encode(const torch::Tensor& x, const torch::Tensor& d = {});

  /// Primary head from cached features; `z` is ignored by variants without latents
  /// and defaults to the zero code for Full.
  torch::Tensor primary_head(const EncodedFeatures& features, const torch::Tensor& z = {});
  torch::Tensor depth_head(const EncodedFeatures& features);
  torch::Tensor fusion_head(const EncodedFeatures& features, const torch::Tensor& z_d = {});

  PredictionBundle forward(const torch::Tensor& x, const torch::Tensor& d = {},
                           const torch::Tensor& z = {}, const torch::Tensor& z_d = {});

  /// RGB camouflage logits f(x, z) (variants whose primary head sees only the image).
  torch::Tensor forward_rgb(const torch::Tensor& x, const torch::Tensor& z = {});
  /// d' = logistic(depth decoder(depth encoder(x))) for ADE, A_D and Full.
  torch::Tensor forward_depth(const torch::Tensor& x);
  /// All three heads for variants that fuse image-derived depth features (A_D, Full).
  PredictionBundle forward_fusion(const torch::Tensor& x, const torch::Tensor& z = {},
                                  const torch::Tensor& z_d = {});

  /// Group name -> ordered (name, parameter) list. Only groups the variant owns appear.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, torch::Tensor>>>>
  parameter_groups() const;

  std::vector<torch::Tensor> trainable_parameters() const;

  /// Loads backbone weights from a tensor archive into every encoder whose input
  /// layer matches; returns the number of tensors copied.
  int load_backbone_weights(const std::filesystem::path& path);

  /// Draws a [B,K] standard-normal code.
  torch::Tensor sample_latent(int64_t batch, torch::Generator& rng) const;

 private:
  void require(bool ok, const char* what) const;

  ModelVariant variant_;
  GeneratorOptions options_;
  Capabilities caps_;
  std::vector<std::pair<std::string, std::vector<std::string>>> groups_;

  torch::nn::Conv2d input_adapter_{nullptr};
  Encoder rgb_encoder_{nullptr};
  nn::Decoder rgb_decoder_{nullptr};
  Encoder depth_encoder_{nullptr};
  nn::Decoder depth_decoder_{nullptr};
  torch::nn::ModuleList fuse_convs_{nullptr};
  nn::Decoder fusion_decoder_{nullptr};
  torch::nn::Conv2d late_fuse_{nullptr};
  nn::LatentInjector latent_rgb_{nullptr};
  nn::LatentInjector latent_rgbd_{nullptr};
};
TORCH_MODULE(Generator);

/// Generator plus (for Full) the discriminator gamma.
struct CodModel {
  Generator generator{nullptr};
  nn::Discriminator discriminator{nullptr};
};

/// Builds a freshly initialized model for `config.variant`; seeds torch's global RNG
/// with `config.seed` first so construction is reproducible.
CodModel build_variant(const TrainConfig& config);

}  // namespace depthcod
