#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depthcod {

/// Ablation and fusion-baseline variants of the generator.
enum class ModelVariant { Base, ADE, A_D, Full, EarlyFusion, CrossFusion, LateFusion };

enum class BackboneKind { ResNet50, Res2Net50, Tiny };

std::string_view to_string(ModelVariant variant);
std::string_view to_string(BackboneKind kind);

/// Parses `base|ade|a_d|full|early|cross|late`; throws BadConfig otherwise.
ModelVariant parse_variant(std::string_view name);
/// Parses `resnet50|res2net50|tiny`; throws BadConfig otherwise.
BackboneKind parse_backbone(std::string_view name);

const std::vector<std::string>& variant_names();

struct TrainConfig {
  ModelVariant variant = ModelVariant::Full;
  BackboneKind backbone = BackboneKind::ResNet50;

  int image_size = 352;
  int batch_size = 6;
  int epochs = 50;
  double lr_gen = 2.5e-5;
  double lr_dis = 2.5e-5;
  double lambda_adv = 0.1;
  double lambda_ssim = 0.85;
  int confidence_samples = 5;  // T
  int latent_dim = 32;         // K
  int feature_channels = 32;   // C
  int dis_channels = 64;       // width of the first discriminator layer
  std::uint64_t seed = 0;

  // ImageNet statistics; any standardization constants can be supplied.
  std::array<double, 3> image_mean{0.485, 0.456, 0.406};
  std::array<double, 3> image_std{0.229, 0.224, 0.225};

  bool augment = true;
  bool freeze_bn = false;
  double grad_clip = 10.0;      // global-norm clip; 0 disables
  bool cross_depth_loss = false;  // CrossFusion: regress depth with the depth head
  int max_steps = 0;            // 0: no cap
  int checkpoint_every = 1;     // numbered checkpoint every N epochs (latest.ckpt always)

  std::filesystem::path data_root;
  std::filesystem::path out_dir;
  std::filesystem::path backbone_weights;  // optional tensor archive
  std::string experiment = "default";

  /// Applies one `key=value` setting; throws BadConfig on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  /// Throws BadConfig when a field violates its constraints.
  void validate() const;

  /// Ordered key/value view used for snapshots; `from_pairs(to_pairs())` reproduces the config.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

/// Reads a flat `key = value` file (`#` starts a comment).
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path);

void write_kv_file(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& pairs);

/// Defaults, then file, then overrides (later wins).
TrainConfig resolve_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace depthcod
