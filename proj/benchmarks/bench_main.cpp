#include <random>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "depthcod/generator.hpp"
#include "depthcod/losses.hpp"
#include "depthcod/metrics.hpp"
#include "depthcod/uncertainty.hpp"

using namespace depthcod;

namespace {

struct Maps {
  std::vector<double> p, y;
  int n;
  explicit Maps(int side) : p(side * side), y(side * side), n(side) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : p) v = u(rng);
    for (auto& v : y) v = u(rng) > 0.7;
  }
  metrics::MapView pv() const { return {p, n, n}; }
  metrics::MapView yv() const { return {y, n, n}; }
};

void BM_Mae(benchmark::State& state) {
  const Maps m(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::mae(m.pv(), m.yv()));
}
BENCHMARK(BM_Mae)->Arg(352);

void BM_FMeasure(benchmark::State& state) {
  const Maps m(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::f_measure_mean(m.pv(), m.yv()));
}
BENCHMARK(BM_FMeasure)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_EMeasure(benchmark::State& state) {
  const Maps m(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::e_measure_mean(m.pv(), m.yv()));
}
BENCHMARK(BM_EMeasure)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_SMeasure(benchmark::State& state) {
  const Maps m(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::s_measure(m.pv(), m.yv()));
}
BENCHMARK(BM_SMeasure)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_StructureLoss(benchmark::State& state) {
  torch::NoGradGuard guard;
  const auto s = state.range(0);
  const auto logits = torch::randn({2, 1, s, s});
  const auto y = (torch::rand({2, 1, s, s}) > 0.5).to(torch::kFloat32);
  for (auto _ : state) benchmark::DoNotOptimize(losses::structure_aware_loss(logits, y).value.item<float>());
}
BENCHMARK(BM_StructureLoss)->Arg(64)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_DepthLoss(benchmark::State& state) {
  torch::NoGradGuard guard;
  const auto s = state.range(0);
  const auto a = torch::rand({2, 1, s, s}), b = torch::rand({2, 1, s, s});
  for (auto _ : state) benchmark::DoNotOptimize(losses::depth_loss(a, b).item<float>());
}
BENCHMARK(BM_DepthLoss)->Arg(64)->Arg(352)->Unit(benchmark::kMillisecond);

void BM_ConfidenceWeights(benchmark::State& state) {
  const auto s = state.range(0);
  std::vector<torch::Tensor> rgb, rgbd;
  for (int t = 0; t < 5; ++t) {
    rgb.push_back(torch::rand({1, 1, s, s}));
    rgbd.push_back(torch::rand({1, 1, s, s}));
  }
  for (auto _ : state) benchmark::DoNotOptimize(uncertainty::confidence_maps(rgb, rgbd).w_rgb.data_ptr());
}
BENCHMARK(BM_ConfidenceWeights)->Arg(352)->Unit(benchmark::kMillisecond);

TrainConfig tiny(ModelVariant variant) {
  TrainConfig c;
  c.variant = variant;
  c.backbone = BackboneKind::Tiny;
  return c;
}

void BM_GeneratorForward(benchmark::State& state) {
  torch::NoGradGuard guard;
  const auto variant = static_cast<ModelVariant>(state.range(0));
  const auto s = state.range(1);
  auto model = build_variant(tiny(variant));
  model.generator->eval();
  const auto x = torch::randn({1, 3, s, s});
  const auto d = torch::rand({1, 1, s, s});
  for (auto _ : state) benchmark::DoNotOptimize(model.generator->forward(x, d).eval_prob().data_ptr());
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_GeneratorForward)
    ->ArgsProduct({{static_cast<int>(ModelVariant::Base), static_cast<int>(ModelVariant::Full),
                    static_cast<int>(ModelVariant::EarlyFusion)},
                   {64, 352}})
    ->Unit(benchmark::kMillisecond);

void BM_SamplePredictions(benchmark::State& state) {
  auto model = build_variant(tiny(ModelVariant::Full));
  model.generator->eval();
  const auto s = state.range(0);
  const auto x = torch::randn({1, 3, s, s});
  auto rng = at::make_generator<at::CPUGeneratorImpl>(0);
  for (auto _ : state) {
    const auto out = uncertainty::sample_predictions(*model.generator, x, {}, 5, rng);
    benchmark::DoNotOptimize(out.rgbd.back().data_ptr());
  }
}
BENCHMARK(BM_SamplePredictions)->Arg(64)->Arg(352)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
