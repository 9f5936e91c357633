#include <cmath>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "depthcod/losses.hpp"
#include "expect_error.hpp"
#include "oracles.hpp"

using namespace depthcod;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

torch::Tensor binary_mask(int b, int h, int w, std::uint64_t seed) {
  torch::manual_seed(seed);
  return (torch::rand({b, 1, h, w}, kF64) > 0.5).to(torch::kFloat64);
}

}  // namespace

TEST(StructureLoss, PerfectPredictionVanishes) {
  const auto y = binary_mask(2, 16, 16, 1);
  const auto logits = (y * 2 - 1) * 40.0;
  const auto l = losses::structure_aware_loss(logits, y);
  EXPECT_LT(l.value.item<double>(), 1e-6);
}

TEST(StructureLoss, ZeroLogitsBceIsLn2) {
  auto y = torch::zeros({1, 1, 8, 8}, kF64);
  y.index_put_({0, 0, torch::indexing::Slice(), torch::indexing::Slice(0, 4)}, 1.0);
  const auto l = losses::structure_aware_loss(torch::zeros_like(y), y);
  // Weighted BCE of a constant ln 2 map is ln 2 regardless of the weights.
  const double wiou = oracle::structure_loss(oracle::from_tensor(torch::zeros({8, 8}, kF64)),
                                             oracle::from_tensor(y[0][0])) - std::log(2.0);
  EXPECT_NEAR(l.value.item<double>() - wiou, std::log(2.0), 1e-12);
}

TEST(StructureLoss, MatchesOracleAndMapMean) {
  torch::manual_seed(11);
  const auto logits = torch::randn({3, 1, 12, 9}, kF64) * 2;
  const auto y = binary_mask(3, 12, 9, 12);
  const auto l = losses::structure_aware_loss(logits, y);
  double expect = 0;
  for (int b = 0; b < 3; ++b) {
    const double ob = oracle::structure_loss(oracle::from_tensor(logits[b][0]), oracle::from_tensor(y[b][0]));
    expect += ob / 3;
    EXPECT_NEAR(l.map[b].mean().item<double>(), ob, 1e-10);
  }
  EXPECT_NEAR(l.value.item<double>(), expect, 1e-10);
  EXPECT_EQ(l.map.sizes(), logits.sizes());
}

TEST(StructureLoss, ShapeMismatch) {
  EXPECT_DCOD_ERROR(losses::structure_aware_loss(torch::zeros({1, 1, 8, 8}), torch::zeros({1, 1, 8, 7})),
                    ErrorCode::ShapeMismatch);
}

TEST(StructureLoss, Gradient) {
  torch::manual_seed(2);
  const auto y = binary_mask(1, 8, 8, 3);
  const auto f = [&](const torch::Tensor& x) { return losses::structure_aware_loss(x, y).value; };
  EXPECT_LT(oracle::gradcheck(f, torch::randn({1, 1, 8, 8}, kF64)), 1e-3);
}

TEST(Ssim, IdentitySymmetryAndOracle) {
  torch::manual_seed(4);
  const auto a = torch::rand({1, 1, 16, 16}, kF64);
  const auto b = torch::rand({1, 1, 16, 16}, kF64);
  EXPECT_NEAR(losses::ssim(a, a).item<double>(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(losses::ssim(a, b).item<double>(), losses::ssim(b, a).item<double>());
  EXPECT_NEAR(losses::ssim(a, b).item<double>(),
              oracle::ssim(oracle::from_tensor(a[0][0]), oracle::from_tensor(b[0][0])), 1e-12);
  // 8x8 inputs fall back to a 7x7 window.
  const auto c = torch::rand({8, 8}, kF64), d = torch::rand({8, 8}, kF64);
  EXPECT_NEAR(losses::ssim(c, d).item<double>(), oracle::ssim(oracle::from_tensor(c), oracle::from_tensor(d)),
              1e-12);
}

TEST(Ssim, CheckerboardAgainstComplement) {
  auto x = torch::zeros({32, 32}, kF64);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) x[r][c] = (r + c) % 2;
  const double s = losses::ssim(x, 1 - x).item<double>();
  EXPECT_LT(s, 0.1);
  EXPECT_NEAR(s, oracle::ssim(oracle::from_tensor(x), oracle::from_tensor(1 - x)), 1e-12);
}

TEST(DepthLoss, IdentityAndConstants) {
  const auto d = torch::rand({2, 1, 16, 16}, kF64);
  EXPECT_NEAR(losses::depth_loss(d, d).item<double>(), 0.0, 1e-12);
  const auto zero = torch::zeros({1, 1, 16, 16}, kF64), one = torch::ones({1, 1, 16, 16}, kF64);
  const double c1 = 1e-4;
  const double ssim01 = oracle::ssim(oracle::from_tensor(zero[0][0]), oracle::from_tensor(one[0][0]));
  EXPECT_NEAR(ssim01, c1 / (1 + c1), 1e-15);
  EXPECT_NEAR(losses::depth_loss(zero, one).item<double>(), 0.15 + 0.85 * (1 - ssim01) / 2, 1e-12);
  EXPECT_DOUBLE_EQ(losses::kLambdaSsim, 0.85);
}

TEST(DepthLoss, L1TermSymmetric) {
  const auto a = torch::rand({1, 1, 16, 16}, kF64), b = torch::rand({1, 1, 16, 16}, kF64);
  EXPECT_NEAR(losses::depth_loss(a, b, 0.0).item<double>(), losses::depth_loss(b, a, 0.0).item<double>(), 1e-15);
  EXPECT_NEAR(losses::depth_loss(a, b, 0.0).item<double>(), (a - b).abs().mean().item<double>(), 1e-15);
}

TEST(DepthLoss, Gradient) {
  torch::manual_seed(5);
  const auto d = torch::rand({1, 1, 8, 8}, kF64);
  const auto f = [&](const torch::Tensor& p) { return losses::depth_loss(p, d); };
  EXPECT_LT(oracle::gradcheck(f, torch::rand({1, 1, 8, 8}, kF64) * 0.8 + 0.1), 1e-3);
}

TEST(Adversarial, ClosedForms) {
  const auto zero = torch::zeros({2, 1, 2, 2}, kF64);
  EXPECT_NEAR(losses::adversarial_loss(zero, zero).item<double>(), 2 * std::log(2.0), 1e-12);
  const auto big = torch::full({2, 1, 2, 2}, 50.0, kF64);
  EXPECT_LT(losses::adversarial_loss(big, big).item<double>(), 1e-12);
}

TEST(Adversarial, Gradient) {
  torch::manual_seed(6);
  const auto other = torch::randn({1, 1, 2, 2}, kF64);
  const auto f = [&](const torch::Tensor& s) { return losses::adversarial_loss(s, other * s); };
  EXPECT_LT(oracle::gradcheck(f, torch::randn({1, 1, 2, 2}, kF64)), 1e-3);
}

TEST(Discriminator, ClosedForms) {
  const auto zero = torch::zeros({1, 1, 3, 3}, kF64);
  EXPECT_NEAR(losses::discriminator_loss(zero, zero, zero).item<double>(), 3 * std::log(2.0), 1e-12);
  const auto big = torch::full({1, 1, 3, 3}, 60.0, kF64);
  EXPECT_LT(losses::discriminator_loss(big, -big, -big).item<double>(), 1e-12);
}

TEST(Discriminator, DetachedFakesCarryNoGeneratorGradient) {
  auto gen_param = torch::randn({1, 1, 4, 4}, kF64).set_requires_grad(true);
  auto dis_param = torch::randn({1}, kF64).set_requires_grad(true);
  const auto fake = torch::sigmoid(gen_param);
  const auto score = [&](const torch::Tensor& m) { return m * dis_param; };
  const auto l = losses::discriminator_loss(score(torch::ones_like(fake)), score(fake.detach()),
                                            score(fake.detach()));
  l.backward();
  EXPECT_FALSE(gen_param.grad().defined());
  EXPECT_NE(dis_param.grad().item<double>(), 0.0);
}

TEST(ConfidenceWeighted, DegenerateAndLinear) {
  const auto a = torch::rand({1, 1, 8, 8}, kF64), b = torch::rand({1, 1, 8, 8}, kF64);
  const auto one = torch::ones_like(a), zero = torch::zeros_like(a), half = one * 0.5;
  EXPECT_NEAR(losses::confidence_weighted_cod_loss(a, b, one, zero).item<double>(), a.mean().item<double>(), 1e-15);
  EXPECT_NEAR(losses::confidence_weighted_cod_loss(a, b, half, half).item<double>(),
              (a.mean().item<double>() + b.mean().item<double>()) / 2, 1e-15);
}

TEST(ConfidenceWeighted, ConvexBounds) {
  torch::manual_seed(8);
  for (int i = 0; i < 100; ++i) {
    const auto a = torch::rand({1, 1, 6, 6}, kF64), b = torch::rand({1, 1, 6, 6}, kF64) * 3;
    const auto w = torch::rand({1, 1, 6, 6}, kF64);
    // Pixel-wise convex combination stays between the pixel-wise extremes.
    const double v = losses::confidence_weighted_cod_loss(a, b, w, 1 - w).item<double>();
    EXPECT_GE(v, torch::minimum(a, b).mean().item<double>() - 1e-12);
    EXPECT_LE(v, torch::maximum(a, b).mean().item<double>() + 1e-12);
    // Uniform weights give a convex combination of the two means.
    const auto u = torch::full_like(w, w.mean().item<double>());
    const double vu = losses::confidence_weighted_cod_loss(a, b, u, 1 - u).item<double>();
    EXPECT_GE(vu, std::min(a.mean().item<double>(), b.mean().item<double>()) - 1e-12);
    EXPECT_LE(vu, std::max(a.mean().item<double>(), b.mean().item<double>()) + 1e-12);
  }
}

TEST(ConfidenceWeighted, WeightsAreConstants) {
  const auto a = torch::rand({1, 1, 4, 4}, kF64).set_requires_grad(true);
  const auto w = torch::rand({1, 1, 4, 4}, kF64).set_requires_grad(true);
  losses::confidence_weighted_cod_loss(a, a, w, 1 - w).backward();
  EXPECT_FALSE(w.grad().defined());
  EXPECT_TRUE(a.grad().defined());
}

TEST(ConfidenceWeighted, Gradient) {
  torch::manual_seed(9);
  const auto y = binary_mask(1, 8, 8, 10);
  const auto w = torch::rand({1, 1, 8, 8}, kF64);
  const auto other = torch::randn({1, 1, 8, 8}, kF64);
  const auto f = [&](const torch::Tensor& x) {
    const auto a = losses::structure_aware_loss(x, y);
    const auto b = losses::structure_aware_loss(x * 0.5 + other, y);
    return losses::confidence_weighted_cod_loss(a.map, b.map, w, 1 - w);
  };
  EXPECT_LT(oracle::gradcheck(f, torch::randn({1, 1, 8, 8}, kF64)), 1e-3);
}

TEST(GeneratorLoss, Recombination) {
  EXPECT_NEAR(losses::generator_loss(1.0, 0.5, 2.0), 1.7, 1e-15);
  EXPECT_EQ(losses::generator_loss(0.0, 0.0, 0.0), 0.0);
  EXPECT_NEAR(losses::generator_loss(1.0, 0.5, 3.0) - losses::generator_loss(1.0, 0.5, 2.0), 0.1, 1e-15);
  const auto t = losses::generator_loss(torch::tensor(1.0, kF64), torch::tensor(0.5, kF64), torch::tensor(2.0, kF64));
  EXPECT_NEAR(t.item<double>(), 1.7, 1e-15);
  EXPECT_DOUBLE_EQ(losses::kLambdaAdv, 0.1);
}
