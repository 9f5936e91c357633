#pragma once

#include <array>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

namespace depthcod::nn {

/// Reduced multi-level features s'_1..s'_4 (strides 4..32), C channels each.
using FeaturePyramid = std::array<torch::Tensor, 4>;

/// Parallel dilated 3x3 convolutions fused by a 1x1 convolution to `out_channels`.
class MultiScaleDilatedImpl : public torch::nn::Module {
 public:
  static constexpr std::array<int64_t, 4> kRates{1, 3, 5, 7};

  MultiScaleDilatedImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::ModuleList branches_;
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(MultiScaleDilated);

/// Tiles a latent code over the feature map, concatenates, and convolves back to C channels.
class LatentInjectorImpl : public torch::nn::Module {
 public:
  LatentInjectorImpl(int64_t channels, int64_t latent_dim);

  /// feature [B,C,H,W], z [B,K] (or [K], broadcast over the batch).
  torch::Tensor forward(const torch::Tensor& feature, const torch::Tensor& z);

  int64_t latent_dim() const noexcept { return latent_dim_; }
  torch::nn::Conv2d& conv() { return conv_; }

 private:
  int64_t latent_dim_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(LatentInjector);

/// x + conv(relu(conv(relu(x)))).
class ResidualConvUnitImpl : public torch::nn::Module {
 public:
  explicit ResidualConvUnitImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResidualConvUnit);

/// Top-down refinement decoder: each level runs a residual unit, the coarser path is
/// upsampled x2 and added, and a 3x3 head emits one-channel logits at the output size.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(int64_t channels);
  torch::Tensor forward(const FeaturePyramid& pyramid, int64_t out_height, int64_t out_width);

 private:
  torch::nn::ModuleList units_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Decoder);

/// Fully convolutional discriminator over image (+) one-channel map: five 4x4 stride-2
/// convolutions with widths {w, 2w, 4w, 8w, 1} and leaky-ReLU(0.2) in between.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(int64_t image_channels = 3, int64_t base_width = 64);

  /// image [B,3,S,S], map [B,1,S,S] -> score logits [B,1,S/32,S/32].
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& map);

  std::vector<torch::nn::Conv2d>& layers() { return layers_; }

 private:
  std::vector<torch::nn::Conv2d> layers_;
};
TORCH_MODULE(Discriminator);

/// Bilinear (align_corners = false) resize of an NCHW tensor.
torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width);

/// Broadcasts a latent code over the spatial grid: [B,K] -> [B,K,H,W].
torch::Tensor tile_latent(const torch::Tensor& z, int64_t batch, int64_t height, int64_t width);

}  // namespace depthcod::nn
