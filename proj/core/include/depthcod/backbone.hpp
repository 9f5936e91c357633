#pragma once

#include <array>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/pimpl.h>

#include "depthcod/config.hpp"

namespace depthcod::nn {

/// Four backbone stages at strides 4, 8, 16, 32.
using StageFeatures = std::array<torch::Tensor, 4>;

/// ResNet-50 and Res2Net-50 (26w x 4s) emit 256/512/1024/2048 channels; the tiny
/// backbone emits 16/32/64/128 through the same interface.
class BackboneImpl : public torch::nn::Module {
 public:
  BackboneImpl(BackboneKind kind, int64_t in_channels, bool freeze_bn = false);

  /// Throws BadShape unless both spatial sizes are multiples of 32.
  StageFeatures forward(const torch::Tensor& x);

  const std::array<int64_t, 4>& stage_channels() const noexcept { return channels_; }
  BackboneKind kind() const noexcept { return kind_; }

  /// Frozen batch-norm layers stay in inference mode regardless of `on`.
  void train(bool on = true) override;

 private:
  BackboneKind kind_;
  bool freeze_bn_;
  std::array<int64_t, 4> channels_{};
  torch::nn::Sequential stem_{nullptr};
  std::array<torch::nn::Sequential, 4> stages_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(Backbone);

/// Throws BadShape unless the tensor's last two dimensions are positive multiples of 32.
void check_input_shape(const torch::Tensor& x);

}  // namespace depthcod::nn
