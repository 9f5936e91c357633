#include "depthcod/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "depthcod/error.hpp"

namespace depthcod::image_io {
namespace {

cv::Mat read_unchanged(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error(ErrorCode::DecodeError, "cannot decode " + path.string());
  return mat;
}

double type_range(int depth) {
  switch (depth) {
    case CV_8U: return 255.0;
    case CV_16U: return 65535.0;
    default: return 1.0;
  }
}

cv::Mat to_gray(const cv::Mat& mat) {
  cv::Mat gray;
  switch (mat.channels()) {
    case 1: gray = mat; break;
    case 3: cv::cvtColor(mat, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(mat, gray, cv::COLOR_BGRA2GRAY); break;
    default: throw Error(ErrorCode::DecodeError, "unsupported channel count");
  }
  return gray;
}

torch::Tensor mat_to_tensor(const cv::Mat& mat_f32) {
  // mat_f32 is CV_32FC(n), continuous; output [n, H, W]
  const cv::Mat m = mat_f32.isContinuous() ? mat_f32 : mat_f32.clone();
  auto t = torch::from_blob(const_cast<float*>(m.ptr<float>()), {m.rows, m.cols, m.channels()},
                            torch::kFloat32);
  return t.permute({2, 0, 1}).contiguous().clone();
}

cv::Mat tensor_to_u8(const torch::Tensor& chw) {
  auto t = chw.detach().to(torch::kFloat32).clamp(0.0, 1.0).mul(255.0).round().to(torch::kUInt8);
  t = t.permute({1, 2, 0}).contiguous();
  const int channels = static_cast<int>(t.size(2));
  cv::Mat mat(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC(channels),
              t.data_ptr<std::uint8_t>());
  return mat.clone();
}

void write_mat(const std::filesystem::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat))
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

torch::Tensor read_rgb(const std::filesystem::path& path) {
  cv::Mat mat = read_unchanged(path);
  const double range = type_range(mat.depth());
  cv::Mat rgb;
  switch (mat.channels()) {
    case 1: cv::cvtColor(mat, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(mat, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw Error(ErrorCode::DecodeError, "unsupported channel count in " + path.string());
  }
  rgb.convertTo(rgb, CV_32F, 1.0 / range);
  return mat_to_tensor(rgb);
}

torch::Tensor read_gray(const std::filesystem::path& path) {
  cv::Mat mat = read_unchanged(path);
  const double range = type_range(mat.depth());
  cv::Mat gray;
  to_gray(mat).convertTo(gray, CV_32F, 1.0 / range);
  return mat_to_tensor(gray);
}

torch::Tensor read_gray_raw(const std::filesystem::path& path) {
  cv::Mat gray;
  to_gray(read_unchanged(path)).convertTo(gray, CV_32F);
  return mat_to_tensor(gray);
}

void write_gray(const std::filesystem::path& path, const torch::Tensor& map) {
  auto t = map.dim() == 2 ? map.unsqueeze(0) : map;
  if (t.dim() != 3 || t.size(0) != 1)
    throw Error(ErrorCode::ShapeMismatch, "write_gray expects [H,W] or [1,H,W]");
  write_mat(path, tensor_to_u8(t));
}

void write_rgb(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3)
    throw Error(ErrorCode::ShapeMismatch, "write_rgb expects [3,H,W]");
  cv::Mat bgr;
  cv::cvtColor(tensor_to_u8(image), bgr, cv::COLOR_RGB2BGR);
  write_mat(path, bgr);
}

torch::Tensor resize(const torch::Tensor& chw, int height, int width, bool nearest) {
  if (chw.size(1) == height && chw.size(2) == width) return chw;
  namespace F = torch::nn::functional;
  auto opts = F::InterpolateFuncOptions().size(std::vector<int64_t>{height, width});
  if (nearest) {
    opts.mode(torch::kNearest);
  } else {
    opts.mode(torch::kBilinear).align_corners(false);
  }
  return F::interpolate(chw.unsqueeze(0), opts).squeeze(0);
}

}  // namespace depthcod::image_io
