#include "depthcod/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "depthcod/error.hpp"

namespace depthcod {
namespace {

struct VariantName {
  ModelVariant variant;
  std::string_view name;
};

constexpr std::array<VariantName, 7> kVariants{{
    {ModelVariant::Base, "base"},
    {ModelVariant::ADE, "ade"},
    {ModelVariant::A_D, "a_d"},
    {ModelVariant::Full, "full"},
    {ModelVariant::EarlyFusion, "early"},
    {ModelVariant::CrossFusion, "cross"},
    {ModelVariant::LateFusion, "late"},
}};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::BadConfig,
              "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::array<double, 3> parse_triple(std::string_view key, std::string_view value) {
  std::array<double, 3> out{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto comma = value.find(',', start);
    const bool last = i == 2;
    if (last != (comma == std::string_view::npos)) bad_value(key, value);
    const auto piece = trim(value.substr(start, last ? std::string_view::npos : comma - start));
    out[i] = parse_number<double>(key, piece);
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(ModelVariant variant) {
  for (const auto& v : kVariants)
    if (v.variant == variant) return v.name;
  return "unknown";
}

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::ResNet50: return "resnet50";
    case BackboneKind::Res2Net50: return "res2net50";
    case BackboneKind::Tiny: return "tiny";
  }
  return "unknown";
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& v : kVariants) out.emplace_back(v.name);
    return out;
  }();
  return names;
}

ModelVariant parse_variant(std::string_view name) {
  for (const auto& v : kVariants)
    if (v.name == name) return v.variant;
  std::string msg = "unknown variant '" + std::string(name) + "'; expected one of:";
  for (const auto& v : kVariants) msg += " " + std::string(v.name);
  throw Error(ErrorCode::BadConfig, msg);
}

BackboneKind parse_backbone(std::string_view name) {
  if (name == "resnet50") return BackboneKind::ResNet50;
  if (name == "res2net50") return BackboneKind::Res2Net50;
  if (name == "tiny") return BackboneKind::Tiny;
  throw Error(ErrorCode::BadConfig,
              "unknown backbone '" + std::string(name) + "'; expected resnet50|res2net50|tiny");
}

void TrainConfig::set(std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  if (key == "variant") variant = parse_variant(value);
  else if (key == "backbone") backbone = parse_backbone(value);
  else if (key == "image_size") image_size = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "lr_gen") lr_gen = parse_number<double>(key, value);
  else if (key == "lr_dis") lr_dis = parse_number<double>(key, value);
  else if (key == "lambda_adv") lambda_adv = parse_number<double>(key, value);
  else if (key == "lambda_ssim") lambda_ssim = parse_number<double>(key, value);
  else if (key == "confidence_samples") confidence_samples = parse_number<int>(key, value);
  else if (key == "latent_dim") latent_dim = parse_number<int>(key, value);
  else if (key == "feature_channels") feature_channels = parse_number<int>(key, value);
  else if (key == "dis_channels") dis_channels = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "image_mean") image_mean = parse_triple(key, value);
  else if (key == "image_std") image_std = parse_triple(key, value);
  else if (key == "augment") augment = parse_bool(key, value);
  else if (key == "freeze_bn") freeze_bn = parse_bool(key, value);
  else if (key == "grad_clip") grad_clip = parse_number<double>(key, value);
  else if (key == "cross_depth_loss") cross_depth_loss = parse_bool(key, value);
  else if (key == "max_steps") max_steps = parse_number<int>(key, value);
  else if (key == "checkpoint_every") checkpoint_every = parse_number<int>(key, value);
  else if (key == "data_root") data_root = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "backbone_weights") backbone_weights = value;
  else if (key == "experiment") experiment = value;
  else throw Error(ErrorCode::BadConfig, "unknown config key '" + std::string(key) + "'");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::BadConfig, what);
  };
  require(image_size > 0 && image_size % 32 == 0, "image_size must be a positive multiple of 32");
  require(batch_size > 0, "batch_size must be positive");
  require(epochs >= 0, "epochs must be non-negative");
  require(lr_gen > 0 && lr_dis > 0, "learning rates must be positive");
  require(lambda_adv >= 0, "lambda_adv must be non-negative");
  require(lambda_ssim >= 0 && lambda_ssim <= 1, "lambda_ssim must lie in [0,1]");
  require(confidence_samples >= 1, "confidence_samples must be at least 1");
  require(latent_dim > 0, "latent_dim must be positive");
  require(feature_channels > 0, "feature_channels must be positive");
  require(dis_channels > 0, "dis_channels must be positive");
  require(grad_clip >= 0, "grad_clip must be non-negative");
  require(max_steps >= 0, "max_steps must be non-negative");
  require(checkpoint_every > 0, "checkpoint_every must be positive");
  for (double s : image_std) require(s > 0, "image_std entries must be positive");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  auto triple = [](const std::array<double, 3>& t) {
    return format_double(t[0]) + "," + format_double(t[1]) + "," + format_double(t[2]);
  };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  return {
      {"experiment", experiment},
      {"variant", std::string(to_string(variant))},
      {"backbone", std::string(to_string(backbone))},
      {"image_size", std::to_string(image_size)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"lr_gen", format_double(lr_gen)},
      {"lr_dis", format_double(lr_dis)},
      {"lambda_adv", format_double(lambda_adv)},
      {"lambda_ssim", format_double(lambda_ssim)},
      {"confidence_samples", std::to_string(confidence_samples)},
      {"latent_dim", std::to_string(latent_dim)},
      {"feature_channels", std::to_string(feature_channels)},
      {"dis_channels", std::to_string(dis_channels)},
      {"seed", std::to_string(seed)},
      {"image_mean", triple(image_mean)},
      {"image_std", triple(image_std)},
      {"augment", flag(augment)},
      {"freeze_bn", flag(freeze_bn)},
      {"grad_clip", format_double(grad_clip)},
      {"cross_depth_loss", flag(cross_depth_loss)},
      {"max_steps", std::to_string(max_steps)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"data_root", data_root.string()},
      {"out_dir", out_dir.string()},
      {"backbone_weights", backbone_weights.string()},
  };
}

std::vector<std::pair<std::string, std::string>> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::BadConfig,
                  path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(std::string_view(stripped).substr(0, eq)),
                     trim(std::string_view(stripped).substr(eq + 1)));
  }
  return out;
}

void write_kv_file(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& [k, v] : pairs) out << k << " = " << v << "\n";
}

TrainConfig resolve_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  TrainConfig config;
  if (file)
    for (const auto& [k, v] : read_kv_file(*file)) config.set(k, v);
  for (const auto& [k, v] : overrides) config.set(k, v);
  config.validate();
  return config;
}

}  // namespace depthcod
