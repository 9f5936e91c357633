#include "depthcod/blocks.hpp"

#include <torch/torch.h>

#include "depthcod/error.hpp"

namespace depthcod::nn {

namespace tnn = torch::nn;
namespace F = torch::nn::functional;

torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor tile_latent(const torch::Tensor& z, int64_t batch, int64_t height, int64_t width) {
  auto code = z.dim() == 1 ? z.unsqueeze(0).expand({batch, z.size(0)}) : z;
  if (code.dim() != 2 || code.size(0) != batch)
    throw Error(ErrorCode::ShapeMismatch, "latent code must be [K] or [B,K]");
  return code.view({batch, code.size(1), 1, 1}).expand({batch, code.size(1), height, width});
}

MultiScaleDilatedImpl::MultiScaleDilatedImpl(int64_t in_channels, int64_t out_channels) {
  for (const auto rate : kRates)
    branches_->push_back(tnn::Conv2d(
        tnn::Conv2dOptions(in_channels, out_channels, 3).padding(rate).dilation(rate)));
  register_module("branches", branches_);
  fuse_ = register_module(
      "fuse", tnn::Conv2d(tnn::Conv2dOptions(out_channels * int64_t(kRates.size()), out_channels, 1)));
}

torch::Tensor MultiScaleDilatedImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> outs;
  outs.reserve(branches_->size());
  for (const auto& branch : *branches_) outs.push_back(branch->as<tnn::Conv2d>()->forward(x));
  return fuse_(torch::cat(outs, 1));
}

LatentInjectorImpl::LatentInjectorImpl(int64_t channels, int64_t latent_dim)
    : latent_dim_(latent_dim) {
  conv_ = register_module(
      "conv", tnn::Conv2d(tnn::Conv2dOptions(channels + latent_dim, channels, 3).padding(1)));
}

torch::Tensor LatentInjectorImpl::forward(const torch::Tensor& feature, const torch::Tensor& z) {
  const auto k = z.size(-1);
  if (k != latent_dim_)
    throw Error(ErrorCode::ShapeMismatch, "latent code has dimension " + std::to_string(k) +
                                              ", expected " + std::to_string(latent_dim_));
  const auto tiled = tile_latent(z.to(feature.dtype()), feature.size(0), feature.size(2), feature.size(3));
  return conv_(torch::cat({feature, tiled}, 1));
}

ResidualConvUnitImpl::ResidualConvUnitImpl(int64_t channels) {
  conv1_ = register_module("conv1", tnn::Conv2d(tnn::Conv2dOptions(channels, channels, 3).padding(1)));
  conv2_ = register_module("conv2", tnn::Conv2d(tnn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResidualConvUnitImpl::forward(const torch::Tensor& x) {
  return x + conv2_(torch::relu(conv1_(torch::relu(x))));
}

DecoderImpl::DecoderImpl(int64_t channels) {
  for (int k = 0; k < 4; ++k) units_->push_back(ResidualConvUnit(channels));
  register_module("units", units_);
  head_ = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(channels, 1, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(const FeaturePyramid& pyramid, int64_t out_height,
                                   int64_t out_width) {
  for (int k = 0; k < 3; ++k) {
    const auto& fine = pyramid[k];
    const auto& coarse = pyramid[k + 1];
    if (fine.size(2) != 2 * coarse.size(2) || fine.size(3) != 2 * coarse.size(3))
      throw Error(ErrorCode::ShapeMismatch, "pyramid levels must halve in size");
  }
  auto path = units_[3]->as<ResidualConvUnit>()->forward(pyramid[3]);
  for (int k = 2; k >= 0; --k) {
    const auto& level = pyramid[k];
    path = upsample_to(path, level.size(2), level.size(3)) +
           units_[k]->as<ResidualConvUnit>()->forward(level);
  }
  return upsample_to(head_(path), out_height, out_width);
}

DiscriminatorImpl::DiscriminatorImpl(int64_t image_channels, int64_t base_width) {
  const std::array<int64_t, 5> widths{base_width, base_width * 2, base_width * 4, base_width * 8, 1};
  int64_t in = image_channels + 1;
  for (size_t i = 0; i < widths.size(); ++i) {
    auto layer = tnn::Conv2d(tnn::Conv2dOptions(in, widths[i], 4).stride(2).padding(1));
    layers_.push_back(register_module("conv" + std::to_string(i + 1), layer));
    in = widths[i];
  }
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& image, const torch::Tensor& map) {
  if (image.size(0) != map.size(0) || image.size(2) != map.size(2) || image.size(3) != map.size(3))
    throw Error(ErrorCode::ShapeMismatch, "discriminator image and map disagree in shape");
  auto y = torch::cat({image, map.to(image.dtype())}, 1);
  for (size_t i = 0; i < layers_.size(); ++i) {
    y = layers_[i](y);
    if (i + 1 < layers_.size()) y = F::leaky_relu(y, F::LeakyReLUFuncOptions().negative_slope(0.2));
  }
  return y;
}

}  // namespace depthcod::nn
