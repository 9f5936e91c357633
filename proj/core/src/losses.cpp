#include "depthcod/losses.hpp"

#include <cmath>

#include <torch/torch.h>

#include "depthcod/error.hpp"

namespace depthcod::losses {
namespace F = torch::nn::functional;

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes()))
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": operand shapes differ");
}

torch::Tensor as_nchw(const torch::Tensor& t) {
  switch (t.dim()) {
    case 2: return t.unsqueeze(0).unsqueeze(0);
    case 3: return t.unsqueeze(0);
    case 4: return t;
    default: throw Error(ErrorCode::ShapeMismatch, "expected a 2-, 3- or 4-dimensional map");
  }
}

torch::Tensor gaussian_window(int64_t size, double sigma, const torch::TensorOptions& opts) {
  auto x = torch::arange(size, opts.dtype(torch::kFloat64)) - static_cast<double>(size / 2);
  auto g = torch::exp(-(x * x) / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g).to(opts.dtype());
}

}  // namespace

StructureLoss structure_aware_loss(const torch::Tensor& logits, const torch::Tensor& target) {
  require_same_shape(logits, target, "structure_aware_loss");
  const auto pred = as_nchw(logits);
  const auto mask = as_nchw(target).to(pred.dtype());
  const auto weight =
      1.0 + 5.0 * torch::abs(F::avg_pool2d(mask, F::AvgPool2dFuncOptions(31).stride(1).padding(15)) - mask);

  const auto bce = F::binary_cross_entropy_with_logits(
      pred, mask, F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone));
  const auto weight_sum = weight.sum({2, 3}, /*keepdim=*/true);
  const auto wbce = (weight * bce).sum({2, 3}, true) / weight_sum;

  const auto prob = torch::sigmoid(pred);
  const auto inter = (prob * mask * weight).sum({2, 3}, true);
  const auto uni = ((prob + mask) * weight).sum({2, 3}, true);
  const auto wiou = 1.0 - (inter + 1.0) / (uni - inter + 1.0);

  const double pixels = static_cast<double>(pred.size(2) * pred.size(3));
  StructureLoss out;
  out.map = weight * bce * (pixels / weight_sum) + wiou;
  out.value = (wbce + wiou).mean();
  if (logits.dim() != 4) out.map = out.map.reshape(logits.sizes());
  return out;
}

torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "ssim");
  const auto x = as_nchw(a);
  const auto y = as_nchw(b).to(x.dtype());
  const auto channels = x.size(1);
  int64_t win = std::min<int64_t>({11, x.size(2), x.size(3)});
  if (win % 2 == 0) --win;
  const auto window =
      gaussian_window(win, 1.5, x.options()).expand({channels, 1, win, win}).contiguous();
  auto filt = [&](const torch::Tensor& t) {
    return F::conv2d(t, window, F::Conv2dFuncOptions().groups(channels));
  };
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto mu_x = filt(x);
  const auto mu_y = filt(y);
  const auto mu_xx = mu_x * mu_x;
  const auto mu_yy = mu_y * mu_y;
  const auto mu_xy = mu_x * mu_y;
  const auto var_x = filt(x * x) - mu_xx;
  const auto var_y = filt(y * y) - mu_yy;
  const auto cov = filt(x * y) - mu_xy;
  const auto map = ((2.0 * mu_xy + c1) * (2.0 * cov + c2)) / ((mu_xx + mu_yy + c1) * (var_x + var_y + c2));
  return map.mean();
}

torch::Tensor depth_loss(const torch::Tensor& pred, const torch::Tensor& target, double lambda_ssim) {
  require_same_shape(pred, target, "depth_loss");
  const auto l1 = torch::abs(target - pred).mean();
  return (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - ssim(target, pred)) / 2.0;
}

torch::Tensor bce_against(const torch::Tensor& score_logits, double target) {
  return F::binary_cross_entropy_with_logits(score_logits, torch::full_like(score_logits, target));
}

torch::Tensor adversarial_loss(const torch::Tensor& score_rgb, const torch::Tensor& score_rgbd) {
  return bce_against(score_rgb, 1.0) + bce_against(score_rgbd, 1.0);
}

torch::Tensor confidence_weighted_cod_loss(const torch::Tensor& map_rgb, const torch::Tensor& map_rgbd,
                                           const torch::Tensor& w_rgb, const torch::Tensor& w_rgbd) {
  require_same_shape(map_rgb, map_rgbd, "confidence_weighted_cod_loss");
  require_same_shape(map_rgb, w_rgb, "confidence_weighted_cod_loss");
  require_same_shape(map_rgb, w_rgbd, "confidence_weighted_cod_loss");
  return (w_rgb.detach() * map_rgb + w_rgbd.detach() * map_rgbd).mean();
}

torch::Tensor generator_loss(const torch::Tensor& l_cod, const torch::Tensor& l_depth,
                             const torch::Tensor& l_adv, double lambda_adv) {
  return l_cod + l_depth + lambda_adv * l_adv;
}

double generator_loss(double l_cod, double l_depth, double l_adv, double lambda_adv) {
  return l_cod + l_depth + lambda_adv * l_adv;
}

torch::Tensor discriminator_loss(const torch::Tensor& score_real, const torch::Tensor& score_fake_rgb,
                                 const torch::Tensor& score_fake_rgbd) {
  return bce_against(score_real, 1.0) + bce_against(score_fake_rgb, 0.0) +
         bce_against(score_fake_rgbd, 0.0);
}

}  // namespace depthcod::losses
