#include "depthcod/backbone.hpp"

#include <torch/torch.h>

#include "depthcod/error.hpp"

namespace depthcod::nn {
namespace {

namespace tnn = torch::nn;

tnn::Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1, int64_t pad = 0) {
  return tnn::Conv2d(tnn::Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(false));
}

tnn::BatchNorm2d bn(int64_t c) { return tnn::BatchNorm2d(c); }

// Standard ResNet bottleneck (expansion 4).
struct BottleneckImpl : tnn::Module {
  BottleneckImpl(int64_t in, int64_t planes, int64_t stride) {
    const int64_t out = planes * 4;
    conv1 = register_module("conv1", conv(in, planes, 1));
    bn1 = register_module("bn1", bn(planes));
    conv2 = register_module("conv2", conv(planes, planes, 3, stride, 1));
    bn2 = register_module("bn2", bn(planes));
    conv3 = register_module("conv3", conv(planes, out, 1));
    bn3 = register_module("bn3", bn(out));
    if (stride != 1 || in != out)
      downsample = register_module("downsample", tnn::Sequential(conv(in, out, 1, stride), bn(out)));
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = torch::relu(bn2(conv2(y)));
    y = bn3(conv3(y));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
  }

  tnn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  tnn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  tnn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

// Res2Net bottleneck: hierarchical residual-like 3x3 convolutions over `scale` splits.
struct Bottle2neckImpl : tnn::Module {
  Bottle2neckImpl(int64_t in, int64_t planes, int64_t stride, bool first_in_stage,
                  int64_t base_width = 26, int64_t scale = 4)
      : scale_(scale), first_(first_in_stage), stride_(stride) {
    width_ = planes * base_width / 64;
    const int64_t out = planes * 4;
    conv1 = register_module("conv1", conv(in, width_ * scale, 1));
    bn1 = register_module("bn1", bn(width_ * scale));
    const int64_t nums = scale == 1 ? 1 : scale - 1;
    for (int64_t i = 0; i < nums; ++i) {
      convs->push_back(conv(width_, width_, 3, stride, 1));
      bns->push_back(bn(width_));
    }
    register_module("convs", convs);
    register_module("bns", bns);
    if (first_)
      pool = register_module("pool", tnn::AvgPool2d(tnn::AvgPool2dOptions(3).stride(stride).padding(1)));
    conv3 = register_module("conv3", conv(width_ * scale, out, 1));
    bn3 = register_module("bn3", bn(out));
    if (stride != 1 || in != out)
      downsample = register_module("downsample", tnn::Sequential(conv(in, out, 1, stride), bn(out)));
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = torch::relu(bn1(conv1(x)));
    auto splits = torch::split(y, width_, 1);
    std::vector<torch::Tensor> outs;
    torch::Tensor sp;
    const auto nums = convs->size();
    for (size_t i = 0; i < nums; ++i) {
      sp = (i == 0 || first_) ? splits[i] : sp + splits[i];
      sp = torch::relu(bns[i]->as<tnn::BatchNorm2d>()->forward(convs[i]->as<tnn::Conv2d>()->forward(sp)));
      outs.push_back(sp);
    }
    if (scale_ != 1) outs.push_back(first_ ? pool(splits[nums]) : splits[nums]);
    y = bn3(conv3(torch::cat(outs, 1)));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
  }

  int64_t scale_, width_;
  bool first_;
  int64_t stride_;
  tnn::Conv2d conv1{nullptr}, conv3{nullptr};
  tnn::BatchNorm2d bn1{nullptr}, bn3{nullptr};
  tnn::ModuleList convs, bns;
  tnn::AvgPool2d pool{nullptr};
  tnn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottle2neck);

struct BasicBlockImpl : tnn::Module {
  BasicBlockImpl(int64_t in, int64_t out, int64_t stride) {
    conv1 = register_module("conv1", conv(in, out, 3, stride, 1));
    bn1 = register_module("bn1", bn(out));
    conv2 = register_module("conv2", conv(out, out, 3, 1, 1));
    bn2 = register_module("bn2", bn(out));
    if (stride != 1 || in != out)
      downsample = register_module("downsample", tnn::Sequential(conv(in, out, 1, stride), bn(out)));
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = bn2(conv2(y));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
  }

  tnn::Conv2d conv1{nullptr}, conv2{nullptr};
  tnn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  tnn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

tnn::Sequential resnet_layer(BackboneKind kind, int64_t& in, int64_t planes, int blocks, int64_t stride) {
  tnn::Sequential layer;
  for (int i = 0; i < blocks; ++i) {
    const int64_t s = i == 0 ? stride : 1;
    if (kind == BackboneKind::Res2Net50) {
      layer->push_back(Bottle2neck(in, planes, s, i == 0));
    } else {
      layer->push_back(Bottleneck(in, planes, s));
    }
    in = planes * 4;
  }
  return layer;
}

void init_weights(tnn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/false)) {
    if (auto* c = m->as<tnn::Conv2d>()) {
      tnn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
    } else if (auto* b = m->as<tnn::BatchNorm2d>()) {
      tnn::init::ones_(b->weight);
      tnn::init::zeros_(b->bias);
    }
  }
}

}  // namespace

void check_input_shape(const torch::Tensor& x) {
  if (x.dim() < 2) throw Error(ErrorCode::BadShape, "input must have spatial dimensions");
  const auto h = x.size(-2), w = x.size(-1);
  if (h <= 0 || w <= 0 || h % 32 != 0 || w % 32 != 0)
    throw Error(ErrorCode::BadShape, "spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                                         " is not a multiple of 32");
}

BackboneImpl::BackboneImpl(BackboneKind kind, int64_t in_channels, bool freeze_bn)
    : kind_(kind), freeze_bn_(freeze_bn) {
  if (kind == BackboneKind::Tiny) {
    channels_ = {16, 32, 64, 128};
    stem_ = tnn::Sequential(conv(in_channels, 16, 3, 2, 1), bn(16), tnn::ReLU());
    int64_t in = 16;
    for (int k = 0; k < 4; ++k) {
      stages_[k] = tnn::Sequential(BasicBlock(in, channels_[k], 2));
      in = channels_[k];
    }
  } else {
    channels_ = {256, 512, 1024, 2048};
    stem_ = tnn::Sequential(conv(in_channels, 64, 7, 2, 3), bn(64), tnn::ReLU(),
                            tnn::MaxPool2d(tnn::MaxPool2dOptions(3).stride(2).padding(1)));
    int64_t in = 64;
    const std::array<int, 4> blocks{3, 4, 6, 3};
    const std::array<int64_t, 4> planes{64, 128, 256, 512};
    for (int k = 0; k < 4; ++k) stages_[k] = resnet_layer(kind, in, planes[k], blocks[k], k == 0 ? 1 : 2);
  }
  register_module("stem", stem_);
  for (int k = 0; k < 4; ++k) register_module("layer" + std::to_string(k + 1), stages_[k]);
  init_weights(*this);
  if (freeze_bn_) {
    for (auto& m : modules(false))
      if (auto* b = m->as<tnn::BatchNorm2d>()) {
        b->weight.set_requires_grad(false);
        b->bias.set_requires_grad(false);
      }
  }
}

StageFeatures BackboneImpl::forward(const torch::Tensor& x) {
  check_input_shape(x);
  StageFeatures out;
  auto y = stem_->forward(x);
  for (int k = 0; k < 4; ++k) {
    y = stages_[k]->forward(y);
    out[k] = y;
  }
  return out;
}

void BackboneImpl::train(bool on) {
  tnn::Module::train(on);
  if (freeze_bn_)
    for (auto& m : modules(false))
      if (auto* b = m->as<tnn::BatchNorm2d>()) b->eval();
}

}  // namespace depthcod::nn
