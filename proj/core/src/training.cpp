#include "depthcod/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "depthcod/error.hpp"
#include "depthcod/uncertainty.hpp"

namespace depthcod {
namespace fs = std::filesystem;

namespace {

std::vector<torch::Tensor> trainable(const torch::nn::Module& module) {
  std::vector<torch::Tensor> out;
  for (const auto& p : module.parameters(true))
    if (p.requires_grad()) out.push_back(p);
  return out;
}

void clip(const std::vector<torch::Tensor>& params, double max_norm) {
  if (max_norm > 0) torch::nn::utils::clip_grad_norm_(params, max_norm);
}

double scalar(const torch::Tensor& t) { return t.item<double>(); }

// splitmix64 finalizer; derives independent stream seeds from (seed, epoch, index).
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void put_module(std::vector<std::pair<std::string, torch::Tensor>>& out, const std::string& prefix,
                const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(true)) out.emplace_back(prefix + ".param." + p.key(), p.value());
  for (const auto& b : module.named_buffers(true)) out.emplace_back(prefix + ".buffer." + b.key(), b.value());
}

void put_optimizer(std::vector<std::pair<std::string, torch::Tensor>>& out, const std::string& prefix,
                   torch::optim::Adam& opt) {
  const auto& params = opt.param_groups().front().params();
  auto& state = opt.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto it = state.find(params[i].unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const auto base = prefix + "." + std::to_string(i);
    out.emplace_back(base + ".step", torch::tensor(s.step(), torch::kInt64));
    out.emplace_back(base + ".exp_avg", s.exp_avg());
    out.emplace_back(base + ".exp_avg_sq", s.exp_avg_sq());
  }
}

void load_module(const std::map<std::string, torch::Tensor>& tensors, const std::string& prefix,
                 torch::nn::Module& module) {
  torch::NoGradGuard guard;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::CorruptArchive, "checkpoint lacks " + name);
    if (!it->second.sizes().equals(dst.sizes()) || it->second.scalar_type() != dst.scalar_type())
      throw Error(ErrorCode::CorruptArchive, "checkpoint tensor " + name + " has the wrong shape");
    dst.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) assign(prefix + ".param." + p.key(), p.value());
  for (auto& b : module.named_buffers(true)) assign(prefix + ".buffer." + b.key(), b.value());
}

void load_optimizer(const std::map<std::string, torch::Tensor>& tensors, const std::string& prefix,
                    torch::optim::Adam& opt) {
  const auto& params = opt.param_groups().front().params();
  auto& state = opt.state();
  state.clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto base = prefix + "." + std::to_string(i);
    const auto step = tensors.find(base + ".step");
    if (step == tensors.end()) continue;
    const auto avg = tensors.find(base + ".exp_avg");
    const auto sq = tensors.find(base + ".exp_avg_sq");
    if (avg == tensors.end() || sq == tensors.end())
      throw Error(ErrorCode::CorruptArchive, "incomplete optimizer state for " + base);
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(step->second.item<int64_t>());
    s->exp_avg(avg->second.clone());
    s->exp_avg_sq(sq->second.clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return {};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      model_(build_variant(config_)),
      rng_(at::make_generator<at::CPUGeneratorImpl>(config_.seed)) {
  gen_opt_ = std::make_unique<torch::optim::Adam>(model_.generator->trainable_parameters(),
                                                  torch::optim::AdamOptions(config_.lr_gen));
  if (model_.discriminator)
    dis_opt_ = std::make_unique<torch::optim::Adam>(trainable(*model_.discriminator),
                                                    torch::optim::AdamOptions(config_.lr_dis));
}

void Trainer::check_finite(const losses::LossReport& r) const {
  const std::pair<const char*, const std::optional<double>*> parts[] = {
      {"l_rgb", &r.l_rgb},   {"l_rgbd", &r.l_rgbd}, {"l_cod", &r.l_cod}, {"l_depth", &r.l_depth},
      {"l_adv", &r.l_adv},   {"l_gen", &r.l_gen},   {"l_dis", &r.l_dis}};
  std::string bad;
  for (const auto& [name, value] : parts)
    if (*value && !std::isfinite(**value)) bad += std::string(" ") + name + "=" + std::to_string(**value);
  if (bad.empty()) return;
  std::string dump;
  for (const auto& [name, value] : parts)
    dump += std::string(" ") + name + "=" + (*value ? std::to_string(**value) : "absent");
  throw Error(ErrorCode::NonFiniteLoss, "at step " + std::to_string(step_ + 1) + ":" + bad +
                                            " (all components:" + dump + ")");
}

losses::LossReport Trainer::step(const data::Batch& batch) {
  return config_.variant == ModelVariant::Full ? train_step(batch) : reduced_step(batch);
}

losses::LossReport Trainer::train_step(const data::Batch& batch) {
  if (config_.variant != ModelVariant::Full)
    throw Error(ErrorCode::VariantUnsupported, "train_step drives the full variant only");
  auto& gen = *model_.generator;
  auto& dis = model_.discriminator;
  gen.train();
  dis->train();
  const auto& x = batch.image;
  const auto& y = batch.mask;
  const auto& d = batch.depth;
  const auto b = x.size(0);

  // Loss-bearing pass with its own latent draws.
  const auto features = gen.encode(x, d);
  const auto z = gen.sample_latent(b, rng_);
  const auto z_d = gen.sample_latent(b, rng_);
  const auto rgb_logits = gen.primary_head(features, z);
  const auto rgbd_logits = gen.fusion_head(features, z_d);
  const auto depth_pred = torch::sigmoid(gen.depth_head(features));

  // T further draws give the confidence maps; they are constants for this update.
  const auto samples = uncertainty::sample_predictions(gen, features, config_.confidence_samples, rng_);
  const auto conf = uncertainty::confidence_maps(samples.rgb, samples.rgbd);

  const auto s_rgb = losses::structure_aware_loss(rgb_logits, y);
  const auto s_rgbd = losses::structure_aware_loss(rgbd_logits, y);
  const auto l_cod = losses::confidence_weighted_cod_loss(s_rgb.map, s_rgbd.map, conf.w_rgb, conf.w_rgbd);
  const auto l_depth = losses::depth_loss(depth_pred, d, config_.lambda_ssim);
  const auto p_rgb = torch::sigmoid(rgb_logits);
  const auto p_rgbd = torch::sigmoid(rgbd_logits);
  const auto l_adv = losses::adversarial_loss(dis->forward(x, p_rgb), dis->forward(x, p_rgbd));
  const auto l_gen = losses::generator_loss(l_cod, l_depth, l_adv, config_.lambda_adv);

  losses::LossReport report;
  report.l_rgb = scalar(s_rgb.value);
  report.l_rgbd = scalar(s_rgbd.value);
  report.l_cod = scalar(l_cod);
  report.l_depth = scalar(l_depth);
  report.l_adv = scalar(l_adv);
  report.l_gen = scalar(l_gen);
  check_finite(report);

  gen_opt_->zero_grad();
  l_gen.backward();
  clip(gen_opt_->param_groups().front().params(), config_.grad_clip);
  gen_opt_->step();
  notify(StepPhase::GeneratorUpdated);

  // Discriminator: ground truth is real, both detached predictions are fake.
  dis_opt_->zero_grad();
  const auto l_dis = losses::discriminator_loss(dis->forward(x, y), dis->forward(x, p_rgb.detach()),
                                                dis->forward(x, p_rgbd.detach()));
  report.l_dis = scalar(l_dis);
  check_finite(report);
  l_dis.backward();
  clip(dis_opt_->param_groups().front().params(), config_.grad_clip);
  dis_opt_->step();
  gen_opt_->zero_grad();
  notify(StepPhase::DiscriminatorUpdated);
  ++step_;
  return report;
}

losses::LossReport Trainer::reduced_step(const data::Batch& batch) {
  if (config_.variant == ModelVariant::Full)
    throw Error(ErrorCode::VariantUnsupported, "the full variant trains with train_step");
  auto& gen = *model_.generator;
  gen.train();
  const auto& y = batch.mask;
  const auto& d = batch.depth;
  const auto bundle = gen.forward(batch.image, d);

  losses::LossReport report;
  const auto s_rgb = losses::structure_aware_loss(bundle.rgb_logits, y);
  auto l_cod = s_rgb.value;
  report.l_rgb = scalar(s_rgb.value);
  if (bundle.has_rgbd()) {
    const auto s_rgbd = losses::structure_aware_loss(bundle.rgbd_logits, y);
    report.l_rgbd = scalar(s_rgbd.value);
    l_cod = l_cod + s_rgbd.value;
  }
  auto l_gen = l_cod;
  if (bundle.has_depth()) {
    const bool cod_head = config_.variant == ModelVariant::CrossFusion && !config_.cross_depth_loss;
    if (cod_head) {
      // CrossFusion's depth-input decoder predicts camouflage; it joins the COD term.
      l_cod = l_cod + losses::structure_aware_loss(bundle.depth_logits, y).value;
      l_gen = l_cod;
    } else {
      const auto l_depth = losses::depth_loss(bundle.depth(), d, config_.lambda_ssim);
      report.l_depth = scalar(l_depth);
      l_gen = l_cod + l_depth;
    }
  }
  report.l_cod = scalar(l_cod);
  report.l_gen = scalar(l_gen);
  check_finite(report);

  gen_opt_->zero_grad();
  l_gen.backward();
  clip(gen_opt_->param_groups().front().params(), config_.grad_clip);
  gen_opt_->step();
  notify(StepPhase::GeneratorUpdated);
  ++step_;
  return report;
}

double Trainer::discriminator_step(const data::Batch& batch) {
  if (!model_.discriminator)
    throw Error(ErrorCode::VariantUnsupported, "variant has no discriminator");
  auto& gen = *model_.generator;
  auto& dis = model_.discriminator;
  dis->train();
  torch::Tensor p_rgb, p_rgbd;
  {
    torch::NoGradGuard guard;
    const auto b = batch.image.size(0);
    const auto bundle = gen.forward(batch.image, batch.depth, gen.sample_latent(b, rng_),
                                    gen.sample_latent(b, rng_));
    p_rgb = bundle.rgb_prob();
    p_rgbd = bundle.rgbd_prob();
  }
  dis_opt_->zero_grad();
  const auto l_dis = losses::discriminator_loss(dis->forward(batch.image, batch.mask),
                                                dis->forward(batch.image, p_rgb),
                                                dis->forward(batch.image, p_rgbd));
  l_dis.backward();
  clip(dis_opt_->param_groups().front().params(), config_.grad_clip);
  dis_opt_->step();
  return scalar(l_dis);
}

std::vector<LossRow> Trainer::run_epoch(const data::DatasetManifest& manifest,
                                        const std::function<void(const LossRow&)>& on_row) {
  if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "training manifest is empty");
  const int epoch = epoch_ + 1;
  std::vector<std::size_t> order(manifest.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(mix(config_.seed ^ mix(static_cast<std::uint64_t>(epoch))));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  data::LoadOptions load;
  load.size = config_.image_size;
  load.mean = config_.image_mean;
  load.std = config_.image_std;
  load.load_depth = config_.variant != ModelVariant::Base;

  std::vector<LossRow> rows;
  for (std::size_t start = 0; start < order.size() && !reached_max_steps();
       start += static_cast<std::size_t>(config_.batch_size)) {
    const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config_.batch_size));
    std::vector<data::Sample> samples;
    for (std::size_t i = start; i < stop; ++i) {
      auto sample = data::load_sample(manifest, order[i], load);
      if (config_.augment) {
        std::mt19937_64 flip_rng(mix(mix(config_.seed + 1) ^ mix((std::uint64_t(epoch) << 32) ^ i)));
        sample = data::augment(sample, flip_rng);
      }
      samples.push_back(std::move(sample));
    }
    LossRow row;
    row.report = step(data::collate(samples));
    row.epoch = epoch;
    row.step = step_;
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  epoch_ = epoch;
  return rows;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint c;
  c.config = config_.to_pairs();
  c.epoch = epoch_;
  c.step = step_;
  put_module(c.tensors, "gen", *model_.generator);
  put_optimizer(c.tensors, "opt_gen", *gen_opt_);
  if (model_.discriminator) {
    put_module(c.tensors, "dis", *model_.discriminator);
    put_optimizer(c.tensors, "opt_dis", *dis_opt_);
  }
  c.tensors.emplace_back("rng.latent", rng_.get_state());
  return c;
}

void Trainer::restore(const Checkpoint& checkpoint) {
  std::map<std::string, torch::Tensor> tensors(checkpoint.tensors.begin(), checkpoint.tensors.end());
  load_module(tensors, "gen", *model_.generator);
  load_optimizer(tensors, "opt_gen", *gen_opt_);
  if (model_.discriminator) {
    load_module(tensors, "dis", *model_.discriminator);
    load_optimizer(tensors, "opt_dis", *dis_opt_);
  }
  const auto rng = tensors.find("rng.latent");
  if (rng == tensors.end()) throw Error(ErrorCode::CorruptArchive, "checkpoint lacks rng state");
  rng_.set_state(rng->second);
  epoch_ = checkpoint.epoch;
  step_ = checkpoint.step;
}

std::string loss_csv_header() { return "epoch,step,l_rgb,l_rgbd,l_cod,l_depth,l_adv,l_gen,l_dis"; }

std::string format_loss_row(const LossRow& row) {
  const auto& r = row.report;
  return std::to_string(row.epoch) + "," + std::to_string(row.step) + "," + fmt_opt(r.l_rgb) + "," +
         fmt_opt(r.l_rgbd) + "," + fmt_opt(r.l_cod) + "," + fmt_opt(r.l_depth) + "," +
         fmt_opt(r.l_adv) + "," + fmt_opt(r.l_gen) + "," + fmt_opt(r.l_dis);
}

TrainResult train(const TrainConfig& config, const std::optional<fs::path>& resume) {
  config.validate();
  if (config.out_dir.empty()) throw Error(ErrorCode::BadConfig, "out_dir is required");
  const auto manifest = data::load_manifest(config.data_root);
  if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "no samples under " + config.data_root.string());

  const auto ckpt_dir = config.out_dir / "ckpt";
  fs::create_directories(ckpt_dir);
  {
    auto tmp = config.out_dir / "config.txt.tmp";
    write_kv_file(tmp, config.to_pairs());
    fs::rename(tmp, config.out_dir / "config.txt");
  }

  Trainer trainer(config);
  TrainResult result;
  result.loss_csv = config.out_dir / "losses.csv";

  // Keep rows up to the resumed epoch so the curve stays continuous.
  std::vector<std::string> kept;
  if (resume) {
    trainer.restore(load_checkpoint(*resume));
    std::ifstream existing(result.loss_csv);
    std::string line;
    std::getline(existing, line);
    while (std::getline(existing, line)) {
      if (line.empty()) continue;
      if (std::stoi(line.substr(0, line.find(','))) <= trainer.epoch()) kept.push_back(line);
    }
  }
  std::ofstream csv(result.loss_csv, std::ios::trunc);
  if (!csv) throw Error(ErrorCode::IoError, "cannot write " + result.loss_csv.string());
  csv << loss_csv_header() << "\n";
  for (const auto& line : kept) csv << line << "\n";
  csv.flush();

  auto numbered = [&](int epoch) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
    return ckpt_dir / name;
  };
  const auto latest = ckpt_dir / "latest.ckpt";
  if (!resume) {
    const auto initial = trainer.snapshot();
    save_checkpoint(initial, numbered(0));
    save_checkpoint(initial, latest);
  }

  while (trainer.epoch() < config.epochs && !trainer.reached_max_steps()) {
    auto rows = trainer.run_epoch(manifest, [&](const LossRow& row) {
      csv << format_loss_row(row) << "\n";
    });
    csv.flush();
    const auto state = trainer.snapshot();
    save_checkpoint(state, latest);
    if (trainer.epoch() % config.checkpoint_every == 0 || trainer.epoch() == config.epochs ||
        trainer.reached_max_steps())
      save_checkpoint(state, numbered(trainer.epoch()));
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }
  result.final_checkpoint = latest;
  return result;
}

CodModel load_model(const fs::path& path, TrainConfig* config_out) {
  const auto checkpoint = load_checkpoint(path);
  TrainConfig config;
  for (const auto& [k, v] : checkpoint.config) config.set(k, v);
  config.backbone_weights.clear();
  config.validate();
  auto model = build_variant(config);
  std::map<std::string, torch::Tensor> tensors(checkpoint.tensors.begin(), checkpoint.tensors.end());
  load_module(tensors, "gen", *model.generator);
  if (model.discriminator) load_module(tensors, "dis", *model.discriminator);
  if (config_out) *config_out = config;
  return model;
}

}  // namespace depthcod
