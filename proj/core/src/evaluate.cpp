#include "depthcod/evaluate.hpp"

#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "depthcod/error.hpp"
#include "depthcod/uncertainty.hpp"

namespace depthcod {

torch::Tensor predict_map(GeneratorImpl& generator, const torch::Tensor& x, const torch::Tensor& d,
                          int sample_eval, torch::Generator* rng) {
  torch::NoGradGuard guard;
  generator.eval();
  if (sample_eval <= 0 || !generator.caps().latent) return generator.forward(x, d).eval_prob();
  if (!rng) throw Error(ErrorCode::BadConfig, "sampled evaluation needs an RNG");
  const auto samples = uncertainty::sample_predictions(generator, x, d, sample_eval, *rng);
  return uncertainty::mean_prediction(generator.caps().fusion_head ? samples.rgbd : samples.rgb);
}

metrics::MetricReport evaluate(GeneratorImpl& generator, const data::DatasetManifest& manifest,
                               const EvalOptions& options) {
  if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation manifest is empty");
  data::LoadOptions load;
  load.size = options.size;
  load.mean = options.mean;
  load.std = options.std;
  load.load_depth = generator.caps().depth_input;
  auto rng = at::make_generator<at::CPUGeneratorImpl>(options.seed);

  std::vector<metrics::ImageMetrics> per_image;
  per_image.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto sample = data::load_sample(manifest, i, load);
    const auto x = sample.image.unsqueeze(0);
    const auto d = sample.depth.unsqueeze(0);
    const auto prob = predict_map(generator, x, d, options.sample_eval, &rng)
                          .reshape({options.size, options.size})
                          .to(torch::kFloat64)
                          .contiguous();
    const auto gt = sample.mask.reshape({options.size, options.size}).to(torch::kFloat64).contiguous();
    const auto n = static_cast<std::size_t>(prob.numel());
    const metrics::MapView p{{prob.data_ptr<double>(), n}, options.size, options.size};
    const metrics::MapView y{{gt.data_ptr<double>(), n}, options.size, options.size};
    per_image.push_back(metrics::compute_all(p, y, sample.stem));
  }
  auto name = options.dataset;
  if (name.empty()) {
    auto root = manifest.root.lexically_normal();
    name = (root.has_filename() ? root : root.parent_path()).filename().string();
  }
  return metrics::aggregate(name, std::move(per_image));
}

}  // namespace depthcod
