#include "depthcod/generator.hpp"

#include <map>

#include <torch/torch.h>

#include "depthcod/error.hpp"
#include "depthcod/tensor_archive.hpp"

namespace depthcod {

namespace tnn = torch::nn;

Capabilities capabilities(ModelVariant variant) {
  Capabilities c;
  switch (variant) {
    case ModelVariant::Base:
      break;
    case ModelVariant::ADE:
      c.depth_head = true;
      break;
    case ModelVariant::A_D:
      c.depth_head = c.fusion_head = true;
      break;
    case ModelVariant::Full:
      c.depth_head = c.fusion_head = c.latent = c.discriminator = true;
      break;
    case ModelVariant::EarlyFusion:
      c.depth_input = true;
      break;
    case ModelVariant::CrossFusion:
      c.depth_head = c.fusion_head = c.depth_input = true;
      break;
    case ModelVariant::LateFusion:
      c.depth_input = true;
      break;
  }
  return c;
}

GeneratorOptions GeneratorOptions::from(const TrainConfig& config) {
  GeneratorOptions o;
  o.backbone = config.backbone;
  o.feature_channels = config.feature_channels;
  o.latent_dim = config.latent_dim;
  o.freeze_bn = config.freeze_bn;
  return o;
}

torch::Tensor PredictionBundle::rgb_prob() const { return torch::sigmoid(rgb_logits); }
torch::Tensor PredictionBundle::rgbd_prob() const {
  return has_rgbd() ? torch::sigmoid(rgbd_logits) : torch::Tensor();
}
torch::Tensor PredictionBundle::depth() const {
  return has_depth() ? torch::sigmoid(depth_logits) : torch::Tensor();
}

EncoderImpl::EncoderImpl(BackboneKind kind, int64_t in_channels, int64_t feature_channels,
                         bool freeze_bn) {
  backbone_ = register_module("backbone", nn::Backbone(kind, in_channels, freeze_bn));
  for (const auto c : backbone_->stage_channels())
    reducers_->push_back(nn::MultiScaleDilated(c, feature_channels));
  register_module("reducers", reducers_);
}

nn::FeaturePyramid EncoderImpl::forward(const torch::Tensor& x) {
  const auto stages = backbone_->forward(x);
  nn::FeaturePyramid out;
  for (int k = 0; k < 4; ++k) out[k] = reducers_[k]->as<nn::MultiScaleDilated>()->forward(stages[k]);
  return out;
}

GeneratorImpl::GeneratorImpl(ModelVariant variant, GeneratorOptions options)
    : variant_(variant), options_(options), caps_(capabilities(variant)) {
  const auto c = options_.feature_channels;
  const auto kind = options_.backbone;
  const bool freeze = options_.freeze_bn;

  std::vector<std::string> theta_y, alpha;
  if (variant_ == ModelVariant::EarlyFusion) {
    input_adapter_ = register_module("input_adapter", tnn::Conv2d(tnn::Conv2dOptions(4, 3, 3).padding(1)));
    theta_y.push_back("input_adapter");
  }
  rgb_encoder_ = register_module("rgb_encoder", Encoder(kind, 3, c, freeze));
  rgb_decoder_ = register_module("rgb_decoder", nn::Decoder(c));
  theta_y.push_back("rgb_encoder");
  groups_.emplace_back("theta_y", theta_y);
  groups_.emplace_back("beta_y", std::vector<std::string>{"rgb_decoder"});

  const bool has_depth_net = caps_.depth_head || variant_ == ModelVariant::LateFusion;
  if (has_depth_net) {
    const int64_t in = caps_.depth_input ? 1 : 3;
    depth_encoder_ = register_module("depth_encoder", Encoder(kind, in, c, freeze));
    depth_decoder_ = register_module("depth_decoder", nn::Decoder(c));
    groups_.emplace_back("theta_d", std::vector<std::string>{"depth_encoder"});
    groups_.emplace_back("beta_d", std::vector<std::string>{"depth_decoder"});
  }
  if (caps_.fusion_head) {
    fuse_convs_ = tnn::ModuleList();
    for (int k = 0; k < 4; ++k)
      fuse_convs_->push_back(tnn::Conv2d(tnn::Conv2dOptions(2 * c, c, 3).padding(1)));
    register_module("fuse_convs", fuse_convs_);
    fusion_decoder_ = register_module("fusion_decoder", nn::Decoder(c));
    alpha = {"fuse_convs", "fusion_decoder"};
  }
  if (variant_ == ModelVariant::LateFusion) {
    late_fuse_ = register_module("late_fuse", tnn::Conv2d(tnn::Conv2dOptions(2, 1, 3).padding(1)));
    alpha = {"late_fuse"};
  }
  if (!alpha.empty()) groups_.emplace_back("alpha", alpha);
  if (caps_.latent) {
    latent_rgb_ = register_module("latent_rgb", nn::LatentInjector(c, options_.latent_dim));
    latent_rgbd_ = register_module("latent_rgbd", nn::LatentInjector(c, options_.latent_dim));
    groups_.emplace_back("latent_rgb", std::vector<std::string>{"latent_rgb"});
    groups_.emplace_back("latent_rgbd", std::vector<std::string>{"latent_rgbd"});
  }
}

void GeneratorImpl::require(bool ok, const char* what) const {
  if (!ok)
    throw Error(ErrorCode::VariantUnsupported,
                std::string(what) + " is not available for variant '" +
                    std::string(to_string(variant_)) + "'");
}

EncodedFeatures GeneratorImpl::encode(const torch::Tensor& x, const torch::Tensor& d) {
  nn::check_input_shape(x);
  EncodedFeatures f;
  f.height = x.size(2);
  f.width = x.size(3);
  if (caps_.depth_input) {
    if (!d.defined())
      throw Error(ErrorCode::BadConfig, "variant '" + std::string(to_string(variant_)) +
                                            "' needs the depth map as input");
    if (d.size(0) != x.size(0) || d.size(1) != 1 || d.size(2) != x.size(2) || d.size(3) != x.size(3))
      throw Error(ErrorCode::ShapeMismatch, "depth input must be [B,1,H,W] matching the image");
  }

  if (variant_ == ModelVariant::EarlyFusion) {
    f.rgb = rgb_encoder_->forward(input_adapter_(torch::cat({x, d.to(x.dtype())}, 1)));
  } else {
    f.rgb = rgb_encoder_->forward(x);
  }
  if (depth_encoder_) f.depth = depth_encoder_->forward(caps_.depth_input ? d.to(x.dtype()) : x);
  if (caps_.fusion_head) {
    nn::FeaturePyramid fused;
    for (int k = 0; k < 4; ++k)
      fused[k] = fuse_convs_[k]->as<tnn::Conv2d>()->forward(torch::cat({f.rgb[k], (*f.depth)[k]}, 1));
    f.fused = fused;
  }
  return f;
}

torch::Tensor GeneratorImpl::primary_head(const EncodedFeatures& f, const torch::Tensor& z) {
  nn::FeaturePyramid pyramid = f.rgb;
  if (caps_.latent) {
    const auto code = z.defined() ? z : torch::zeros({f.rgb[3].size(0), options_.latent_dim},
                                                     f.rgb[3].options());
    pyramid[3] = latent_rgb_->forward(pyramid[3], code);
  }
  auto logits = rgb_decoder_->forward(pyramid, f.height, f.width);
  if (variant_ == ModelVariant::LateFusion) {
    const auto depth_logits = depth_decoder_->forward(*f.depth, f.height, f.width);
    logits = late_fuse_(torch::cat({torch::sigmoid(logits), torch::sigmoid(depth_logits)}, 1));
  }
  return logits;
}

torch::Tensor GeneratorImpl::depth_head(const EncodedFeatures& f) {
  require(caps_.depth_head, "depth head");
  return depth_decoder_->forward(*f.depth, f.height, f.width);
}

torch::Tensor GeneratorImpl::fusion_head(const EncodedFeatures& f, const torch::Tensor& z_d) {
  require(caps_.fusion_head, "fusion head");
  nn::FeaturePyramid pyramid = *f.fused;
  if (caps_.latent) {
    const auto code = z_d.defined() ? z_d : torch::zeros({pyramid[3].size(0), options_.latent_dim},
                                                         pyramid[3].options());
    pyramid[3] = latent_rgbd_->forward(pyramid[3], code);
  }
  return fusion_decoder_->forward(pyramid, f.height, f.width);
}

PredictionBundle GeneratorImpl::forward(const torch::Tensor& x, const torch::Tensor& d,
                                        const torch::Tensor& z, const torch::Tensor& z_d) {
  const auto f = encode(x, d);
  PredictionBundle b;
  b.rgb_logits = primary_head(f, z);
  if (caps_.depth_head) b.depth_logits = depth_head(f);
  if (caps_.fusion_head) b.rgbd_logits = fusion_head(f, z_d);
  return b;
}

torch::Tensor GeneratorImpl::forward_rgb(const torch::Tensor& x, const torch::Tensor& z) {
  require(variant_ != ModelVariant::EarlyFusion && variant_ != ModelVariant::LateFusion,
          "image-only RGB head");
  nn::check_input_shape(x);
  EncodedFeatures f;
  f.height = x.size(2);
  f.width = x.size(3);
  f.rgb = rgb_encoder_->forward(x);
  return primary_head(f, z);
}

torch::Tensor GeneratorImpl::forward_depth(const torch::Tensor& x) {
  require(caps_.depth_head && !caps_.depth_input, "image-to-depth head");
  nn::check_input_shape(x);
  return torch::sigmoid(depth_decoder_->forward(depth_encoder_->forward(x), x.size(2), x.size(3)));
}

PredictionBundle GeneratorImpl::forward_fusion(const torch::Tensor& x, const torch::Tensor& z,
                                               const torch::Tensor& z_d) {
  require(caps_.fusion_head && !caps_.depth_input, "image-only fusion");
  return forward(x, {}, z, z_d);
}

std::vector<std::pair<std::string, std::vector<std::pair<std::string, torch::Tensor>>>>
GeneratorImpl::parameter_groups() const {
  std::map<std::string, std::shared_ptr<tnn::Module>> children;
  for (const auto& item : named_children()) children.emplace(item.key(), item.value());

  std::vector<std::pair<std::string, std::vector<std::pair<std::string, torch::Tensor>>>> out;
  for (const auto& [group, modules] : groups_) {
    std::vector<std::pair<std::string, torch::Tensor>> params;
    for (const auto& name : modules)
      for (const auto& p : children.at(name)->named_parameters(true))
        params.emplace_back(name + "." + p.key(), p.value());
    out.emplace_back(group, std::move(params));
  }
  return out;
}

std::vector<torch::Tensor> GeneratorImpl::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : parameters(true))
    if (p.requires_grad()) out.push_back(p);
  return out;
}

int GeneratorImpl::load_backbone_weights(const std::filesystem::path& path) {
  const auto archive = read_tensor_archive(path);
  std::map<std::string, torch::Tensor> by_name(archive.tensors.begin(), archive.tensors.end());
  int copied = 0;
  torch::NoGradGuard guard;
  for (Encoder* enc : {&rgb_encoder_, &depth_encoder_}) {
    if (!*enc) continue;
    auto& backbone = (*enc)->backbone();
    auto copy_matching = [&](const torch::OrderedDict<std::string, torch::Tensor>& named) {
      for (const auto& item : named) {
        const auto it = by_name.find(item.key());
        if (it == by_name.end() || !it->second.sizes().equals(item.value().sizes())) continue;
        item.value().copy_(it->second);
        ++copied;
      }
    };
    copy_matching(backbone->named_parameters(true));
    copy_matching(backbone->named_buffers(true));
  }
  return copied;
}

torch::Tensor GeneratorImpl::sample_latent(int64_t batch, torch::Generator& rng) const {
  return torch::randn({batch, options_.latent_dim}, rng,
                      torch::TensorOptions().dtype(parameters().front().dtype()));
}

CodModel build_variant(const TrainConfig& config) {
  config.validate();
  torch::manual_seed(config.seed);
  CodModel model;
  model.generator = Generator(config.variant, GeneratorOptions::from(config));
  if (capabilities(config.variant).discriminator)
    model.discriminator = nn::Discriminator(3, config.dis_channels);
  if (!config.backbone_weights.empty()) {
    if (model.generator->load_backbone_weights(config.backbone_weights) == 0)
      throw Error(ErrorCode::BadConfig,
                  "no tensors in " + config.backbone_weights.string() + " matched the backbone");
  }
  return model;
}

}  // namespace depthcod
