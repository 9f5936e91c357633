#pragma once

#include <optional>

#include <torch/types.h>

namespace depthcod::losses {

inline constexpr double kLambdaAdv = 0.1;    // adversarial weight in the generator objective
inline constexpr double kLambdaSsim = 0.85;  // SSIM share of the depth regression loss

/// Scalar components of one optimization step. Absent components were not part
/// of the variant's objective (distinct from a zero value).
struct LossReport {
  std::optional<double> l_rgb, l_rgbd, l_cod, l_depth, l_adv, l_gen, l_dis;
};

struct StructureLoss {
  torch::Tensor value;  // scalar, mean over the batch
  torch::Tensor map;    // [B,1,H,W]; its per-image spatial mean equals that image's loss
};

/// Boundary-weighted BCE plus weighted IoU.
///   w    = 1 + 5 * |avgpool31(y) - y|     (stride 1, zero padding counted)
///   wbce = sum(w * bce(logits, y)) / sum(w)
///   wiou = 1 - (sum(w*p*y) + 1) / (sum(w*(p+y)) - sum(w*p*y) + 1)
/// The map is w * bce * HW / sum(w) + wiou, so mean(map) per image == wbce + wiou.
StructureLoss structure_aware_loss(const torch::Tensor& logits, const torch::Tensor& target);

/// Gaussian-window SSIM (11x11, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2), averaged over
/// valid (unpadded) window positions. Inputs smaller than the window use the largest
/// odd window that fits. Accepts [H,W], [C,H,W] or [B,C,H,W].
torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b);

/// (1 - lambda) * mean|d - d'| + lambda * (1 - ssim(d, d')) / 2.
torch::Tensor depth_loss(const torch::Tensor& pred, const torch::Tensor& target,
                         double lambda_ssim = kLambdaSsim);

/// Mean binary cross-entropy of score logits against a constant target (0 or 1).
torch::Tensor bce_against(const torch::Tensor& score_logits, double target);

/// Both generator heads try to make the discriminator answer "real".
torch::Tensor adversarial_loss(const torch::Tensor& score_rgb, const torch::Tensor& score_rgbd);

/// mean(w_rgb * map_rgb + w_rgbd * map_rgbd); the weights are detached.
torch::Tensor confidence_weighted_cod_loss(const torch::Tensor& map_rgb, const torch::Tensor& map_rgbd,
                                           const torch::Tensor& w_rgb, const torch::Tensor& w_rgbd);

torch::Tensor generator_loss(const torch::Tensor& l_cod, const torch::Tensor& l_depth,
                             const torch::Tensor& l_adv, double lambda_adv = kLambdaAdv);
double generator_loss(double l_cod, double l_depth, double l_adv, double lambda_adv = kLambdaAdv);

/// BCE(real, 1) + BCE(fake_rgb, 0) + BCE(fake_rgbd, 0). Callers score detached
/// predictions so no gradient reaches the generator.
torch::Tensor discriminator_loss(const torch::Tensor& score_real, const torch::Tensor& score_fake_rgb,
                                 const torch::Tensor& score_fake_rgbd);

}  // namespace depthcod::losses
