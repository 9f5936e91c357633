// depthcod command-line tool: train | eval | predict | visualize | prepare-depth | bench
//
// Exit status: 0 success, 2 usage or configuration error, 1 runtime error.
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <CLI11.hpp>
#include <torch/torch.h>

#include "depthcod/config.hpp"
#include "depthcod/data.hpp"
#include "depthcod/error.hpp"
#include "depthcod/evaluate.hpp"
#include "depthcod/image_io.hpp"
#include "depthcod/metrics.hpp"
#include "depthcod/synthetic.hpp"
#include "depthcod/training.hpp"
#include "depthcod/uncertainty.hpp"
#include "depthcod/variants_bench.hpp"

namespace fs = std::filesystem;
using namespace depthcod;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// Thrown for command-line mistakes the library never sees (missing files, bad combinations).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::VariantUnsupported:
    case ErrorCode::VersionMismatch:
      return kUsage;
    default:
      return kRuntime;
  }
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

// Flags given on the command line; unset ones leave the file/default value alone.
struct TrainFlags {
  std::optional<fs::path> config_file;
  std::vector<std::string> sets;
  std::optional<std::string> variant, backbone, experiment;
  std::optional<int> size, epochs, batch, max_steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr_gen, lr_dis;
  std::optional<fs::path> data_root, out, resume, backbone_weights;
  bool no_augment = false, no_clip = false;

  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto put = [&](const char* key, const auto& v) {
      if (!v) return;
      if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, fs::path>) kv.emplace_back(key, v->string());
      else if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>) kv.emplace_back(key, *v);
      else {
        std::ostringstream os;
        os.precision(17);
        os << *v;
        kv.emplace_back(key, os.str());
      }
    };
    put("variant", variant);
    put("backbone", backbone);
    put("experiment", experiment);
    put("image_size", size);
    put("epochs", epochs);
    put("batch_size", batch);
    put("max_steps", max_steps);
    put("seed", seed);
    put("lr_gen", lr_gen);
    put("lr_dis", lr_dis);
    put("data_root", data_root);
    put("out_dir", out);
    put("backbone_weights", backbone_weights);
    if (no_augment) kv.emplace_back("augment", "false");
    if (no_clip) kv.emplace_back("grad_clip", "0");
    return kv;
  }
};

int cmd_train(const TrainFlags& flags) {
  if (flags.config_file) require_file(*flags.config_file, "config file");
  if (flags.resume) require_file(*flags.resume, "checkpoint");
  const auto config = resolve_config(flags.config_file, flags.overrides());
  if (config.data_root.empty()) throw UsageError("--data-root is required");
  if (config.out_dir.empty()) throw UsageError("--out is required");
  config.validate();

  std::printf("training %s (%s, size %d) on %s -> %s\n", std::string(to_string(config.variant)).c_str(),
              std::string(to_string(config.backbone)).c_str(), config.image_size, config.data_root.c_str(),
              config.out_dir.c_str());
  const auto result = train(config, flags.resume);
  std::printf("%s\n", loss_csv_header().c_str());
  for (const auto& row : result.rows)
    if (row.step % 50 == 0 || &row == &result.rows.back()) std::printf("%s\n", format_loss_row(row).c_str());
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return kOk;
}

struct EvalFlags {
  fs::path checkpoint;
  std::vector<fs::path> roots;
  fs::path out;
  std::optional<int> size;
  int sample_eval = 0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalFlags& flags) {
  require_file(flags.checkpoint, "checkpoint");
  TrainConfig config;
  auto model = load_model(flags.checkpoint, &config);
  EvalOptions options;
  options.size = flags.size.value_or(config.image_size);
  options.mean = config.image_mean;
  options.std = config.image_std;
  options.sample_eval = flags.sample_eval;
  options.seed = flags.seed;

  std::vector<metrics::MetricReport> reports;
  std::set<std::string> names;
  for (const auto& root : flags.roots) {
    auto report = evaluate(*model.generator, data::load_manifest(root), options);
    // Two roots with the same leaf name would overwrite each other's per-image file.
    for (int k = 2; names.count(report.dataset); ++k) report.dataset += "_" + std::to_string(k);
    names.insert(report.dataset);
    std::printf("%-16s S %.4f  F %.4f  E %.4f  MAE %.4f  (%zu images)\n", report.dataset.c_str(),
                report.s_measure, report.f_measure_mean, report.e_measure_mean, report.mae,
                report.per_image.size());
    reports.push_back(std::move(report));
  }
  const auto dir = flags.out / "reports";
  fs::create_directories(dir);
  metrics::write_report_csv(dir / "metrics.csv", reports);
  metrics::write_report_table(dir / "metrics.txt", reports);
  for (const auto& r : reports) metrics::write_per_image_csv(dir / ("per_image_" + r.dataset + ".csv"), r);
  return kOk;
}

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> list_images(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw UsageError("input not found: " + input.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyDataset, "no images under " + input.string());
  return files;
}

// Depth partner of `image`: the file itself when `depth` is a file, otherwise the
// first file in `depth` sharing the stem.
std::optional<fs::path> find_depth(const fs::path& image, const std::optional<fs::path>& depth) {
  if (!depth) return std::nullopt;
  if (fs::is_regular_file(*depth)) return *depth;
  for (const char* ext : {".png", ".jpg", ".jpeg", ".bmp"}) {
    auto p = *depth / (image.stem().string() + ext);
    if (fs::is_regular_file(p)) return p;
  }
  throw UsageError("no depth map for " + image.filename().string() + " under " + depth->string());
}

struct Input {
  torch::Tensor x, d;  // [1,3,S,S] standardized, [1,1,S,S] in [0,1]
  int64_t height = 0, width = 0;
};

Input load_input(const fs::path& image, const std::optional<fs::path>& depth, const TrainConfig& config,
                 int size) {
  Input in;
  const auto rgb = image_io::read_rgb(image);
  in.height = rgb.size(1);
  in.width = rgb.size(2);
  const auto mean = torch::tensor({config.image_mean[0], config.image_mean[1], config.image_mean[2]},
                                  torch::kFloat32).view({3, 1, 1});
  const auto stdv = torch::tensor({config.image_std[0], config.image_std[1], config.image_std[2]},
                                  torch::kFloat32).view({3, 1, 1});
  in.x = ((image_io::resize(rgb, size, size) - mean) / stdv).unsqueeze(0);
  if (depth) {
    const auto raw = image_io::resize(image_io::read_gray_raw(*depth), size, size);
    const double lo = raw.min().item<double>(), hi = raw.max().item<double>();
    in.d = (hi > lo ? (raw - lo) / (hi - lo) : torch::zeros_like(raw)).unsqueeze(0);
  } else {
    in.d = torch::zeros({1, 1, size, size});
  }
  return in;
}

void write_map(const fs::path& path, const torch::Tensor& map, const Input& in) {
  image_io::write_gray(path, image_io::resize(map.reshape({1, map.size(-2), map.size(-1)}), in.height, in.width)
                                 .clamp(0.0, 1.0));
}

struct PredictFlags {
  fs::path checkpoint, input, out;
  std::optional<fs::path> depth;
  std::optional<int> size;
};

int cmd_predict(const PredictFlags& flags) {
  require_file(flags.checkpoint, "checkpoint");
  TrainConfig config;
  auto model = load_model(flags.checkpoint, &config);
  auto& gen = *model.generator;
  if (gen.caps().depth_input && !flags.depth)
    throw UsageError(std::string(to_string(config.variant)) + " takes depth as input; pass --depth");
  const int size = flags.size.value_or(config.image_size);
  const auto dir = flags.out / "maps";
  fs::create_directories(dir);

  torch::NoGradGuard guard;
  gen.eval();
  int written = 0;
  for (const auto& image : list_images(flags.input)) {
    const auto in = load_input(image, find_depth(image, flags.depth), config, size);
    const auto bundle = gen.forward(in.x, in.d);
    const auto stem = image.stem().string();
    write_map(dir / (stem + "_rgb.png"), bundle.rgb_prob(), in);
    if (bundle.has_rgbd()) write_map(dir / (stem + "_rgbd.png"), bundle.rgbd_prob(), in);
    if (bundle.has_depth()) write_map(dir / (stem + "_depth.png"), bundle.depth(), in);
    ++written;
  }
  std::printf("wrote maps for %d image(s) to %s\n", written, dir.c_str());
  return kOk;
}

struct VisualizeFlags {
  fs::path checkpoint, input, out;
  std::optional<fs::path> depth;
  std::optional<int> size;
  int samples = 5;
  std::uint64_t seed = 0;
  std::vector<int> sizes;
};

int cmd_visualize(const VisualizeFlags& flags) {
  require_file(flags.checkpoint, "checkpoint");
  TrainConfig config;
  auto model = load_model(flags.checkpoint, &config);
  auto& gen = *model.generator;
  if (!gen.caps().latent)
    throw Error(ErrorCode::VariantUnsupported,
                "uncertainty maps need latent sampling (variant full), checkpoint is " +
                    std::string(to_string(config.variant)));
  const int size = flags.size.value_or(config.image_size);
  const auto dir = flags.out / "maps";
  fs::create_directories(dir);

  torch::NoGradGuard guard;
  gen.eval();
  for (const auto& image : list_images(flags.input)) {
    // Seeded per image so the output for one file does not depend on its neighbours.
    auto rng = at::make_generator<at::CPUGeneratorImpl>(flags.seed);
    const auto in = load_input(image, find_depth(image, flags.depth), config, size);
    const auto s = uncertainty::sample_predictions(gen, in.x, in.d, flags.samples, rng);
    const auto maps = uncertainty::confidence_maps(s.rgb, s.rgbd);
    const auto stem = image.stem().string();
    write_map(dir / (stem + "_U_rgb.png"), maps.u_rgb, in);
    write_map(dir / (stem + "_U_rgbd.png"), maps.u_rgbd, in);
    if (!flags.sizes.empty())
      write_map(dir / (stem + "_U_multisize.png"),
                uncertainty::multi_size_uncertainty(gen, in.x, in.d, flags.sizes, true), in);
  }
  std::printf("wrote uncertainty maps (T=%d) to %s\n", flags.samples, dir.c_str());
  return kOk;
}

int cmd_prepare_depth(const fs::path& src, const fs::path& dst) {
  std::vector<std::string> skipped;
  const int n = data::import_external_depth(src, dst, &skipped);
  std::printf("converted %d depth map(s) into %s\n", n, dst.c_str());
  for (const auto& s : skipped) std::fprintf(stderr, "skipped: %s\n", s.c_str());
  return kOk;
}

struct BenchFlags {
  std::string grid;
  std::optional<fs::path> data_root;
  fs::path out;
  int steps = 200;
  int size = 64;
  std::string backbone = "tiny";
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchFlags& flags) {
  auto base = bench::desk_config();
  base.seed = flags.seed;
  const auto backbone = parse_backbone(flags.backbone);
  auto spec = flags.grid == "ablation" ? bench::ablation_grid(base, flags.size, backbone)
                                       : bench::fusion_grid(base, flags.size, backbone);
  spec.steps = flags.steps;

  fs::create_directories(flags.out);
  auto root = flags.data_root.value_or(flags.out / "toy");
  if (!flags.data_root && !fs::exists(root)) {
    synthetic::ToySpec toy;
    toy.size = flags.size;
    synthetic::write_toy_dataset(root, toy);
  }
  const auto rows = bench::run_grid(spec, root);
  const auto csv = flags.out / ("grid_" + flags.grid + ".csv");
  bench::write_grid_csv(csv, rows);
  int failed = 0;
  for (const auto& r : rows) {
    std::printf("%-6s %4d %-9s F %.4f  MAE %.4f  params %lld  %s\n",
                std::string(to_string(r.cell.variant)).c_str(), r.cell.size,
                std::string(to_string(r.cell.backbone)).c_str(), r.f_beta, r.mae,
                static_cast<long long>(r.params), r.status.c_str());
    failed += !r.ok();
  }
  std::printf("grid written to %s\n", csv.c_str());
  return failed ? kRuntime : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-guided camouflaged object detection"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "train a model variant");
  train_cmd->add_option("--config", tf.config_file, "key=value config file");
  train_cmd->add_option("--set", tf.sets, "override one config key (key=value), repeatable");
  train_cmd->add_option("--variant", tf.variant, "base|ade|a_d|full|early|cross|late");
  train_cmd->add_option("--backbone", tf.backbone, "resnet50|res2net50|tiny");
  train_cmd->add_option("--size", tf.size, "training resolution (multiple of 32)");
  train_cmd->add_option("--epochs", tf.epochs);
  train_cmd->add_option("--batch", tf.batch);
  train_cmd->add_option("--max-steps", tf.max_steps, "stop after this many optimization steps");
  train_cmd->add_option("--seed", tf.seed);
  train_cmd->add_option("--lr-gen", tf.lr_gen);
  train_cmd->add_option("--lr-dis", tf.lr_dis);
  train_cmd->add_option("--data-root", tf.data_root, "dataset with Images/ Depth/ GT/");
  train_cmd->add_option("--out", tf.out, "run directory");
  train_cmd->add_option("--experiment", tf.experiment);
  train_cmd->add_option("--backbone-weights", tf.backbone_weights, "tensor archive with backbone weights");
  train_cmd->add_option("--resume", tf.resume, "continue from a checkpoint");
  train_cmd->add_flag("--no-augment", tf.no_augment, "disable horizontal flips");
  train_cmd->add_flag("--no-clip", tf.no_clip, "disable gradient clipping");

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on one or more datasets");
  eval_cmd->add_option("--checkpoint", ef.checkpoint)->required();
  eval_cmd->add_option("--data-root", ef.roots, "dataset root, repeatable")->required();
  eval_cmd->add_option("--out", ef.out, "run directory (reports/ is created inside)")->required();
  eval_cmd->add_option("--size", ef.size);
  eval_cmd->add_option("--sample-eval", ef.sample_eval, "average T latent draws instead of z = 0")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--seed", ef.seed);

  PredictFlags pf;
  auto* predict_cmd = app.add_subcommand("predict", "write prediction maps");
  predict_cmd->add_option("--checkpoint", pf.checkpoint)->required();
  predict_cmd->add_option("--input", pf.input, "image file or directory")->required();
  predict_cmd->add_option("--depth", pf.depth, "depth file or directory (matched by stem)");
  predict_cmd->add_option("--out", pf.out, "run directory (maps/ is created inside)")->required();
  predict_cmd->add_option("--size", pf.size);

  VisualizeFlags vf;
  auto* vis_cmd = app.add_subcommand("visualize", "write U_rgb / U_rgbd uncertainty maps");
  vis_cmd->add_option("--checkpoint", vf.checkpoint)->required();
  vis_cmd->add_option("--input", vf.input, "image file or directory")->required();
  vis_cmd->add_option("--depth", vf.depth, "depth file or directory (matched by stem)");
  vis_cmd->add_option("--out", vf.out, "run directory (maps/ is created inside)")->required();
  vis_cmd->add_option("--size", vf.size);
  vis_cmd->add_option("--samples", vf.samples, "latent draws T")->check(CLI::PositiveNumber);
  vis_cmd->add_option("--seed", vf.seed);
  vis_cmd->add_option("--sizes", vf.sizes, "also write entropy over predictions at these input sizes");

  fs::path depth_src, depth_dst;
  auto* prep_cmd = app.add_subcommand("prepare-depth", "convert external depth maps to 8-bit PNG");
  prep_cmd->add_option("--src", depth_src)->required();
  prep_cmd->add_option("--dst", depth_dst)->required();

  BenchFlags bf;
  auto* bench_cmd = app.add_subcommand("bench", "train and score the ablation or fusion grid");
  bench_cmd->add_option("--grid", bf.grid)->required()->check(CLI::IsMember({"ablation", "fusion"}));
  bench_cmd->add_option("--data-root", bf.data_root, "dataset (default: generated toy set)");
  bench_cmd->add_option("--out", bf.out)->required();
  bench_cmd->add_option("--steps", bf.steps)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--size", bf.size);
  bench_cmd->add_option("--backbone", bf.backbone);
  bench_cmd->add_option("--seed", bf.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(tf);
    if (*eval_cmd) return cmd_eval(ef);
    if (*predict_cmd) return cmd_predict(pf);
    if (*vis_cmd) return cmd_visualize(vf);
    if (*prep_cmd) return cmd_prepare_depth(depth_src, depth_dst);
    if (*bench_cmd) return cmd_bench(bf);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
