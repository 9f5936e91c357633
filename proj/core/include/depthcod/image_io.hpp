#pragma once

#include <filesystem>

#include <torch/types.h>

namespace depthcod::image_io {

/// Color image as float [3, H, W] in [0, 1], RGB order.
torch::Tensor read_rgb(const std::filesystem::path& path);

/// Single-channel image as float [1, H, W], scaled to [0, 1] by the pixel type's range.
/// Color files are converted to luminance.
torch::Tensor read_gray(const std::filesystem::path& path);

/// Single-channel image as float [1, H, W] in the file's native units (no rescaling).
torch::Tensor read_gray_raw(const std::filesystem::path& path);

/// Writes a [H, W] or [1, H, W] map in [0, 1] as 8-bit grayscale (round(v * 255)).
void write_gray(const std::filesystem::path& path, const torch::Tensor& map);

/// Writes a [3, H, W] map in [0, 1] as an 8-bit color image.
void write_rgb(const std::filesystem::path& path, const torch::Tensor& image);

/// Resizes a [C, H, W] float tensor with bilinear (or nearest) interpolation.
torch::Tensor resize(const torch::Tensor& chw, int height, int width, bool nearest = false);

}  // namespace depthcod::image_io
