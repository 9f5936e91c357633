#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace depthcod::metrics {

/// Row-major view of a single-channel map.
struct MapView {
  std::span<const double> values;
  int rows = 0;
  int cols = 0;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return values.size(); }
};

inline constexpr int kThresholds = 255;  // t = k/255, k = 1..255; pixel is positive when p >= t
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

/// mean |p - y|.
double mae(MapView p, MapView y);

/// Mean over 255 thresholds of F = (1+b2)PR / (b2 P + R), zero when P + R = 0.
/// With an empty ground truth a threshold scores 1 when nothing is predicted, else 0.
double f_measure_mean(MapView p, MapView y, double beta_squared = kBetaSquared);

/// Structure measure: alpha * S_object + (1 - alpha) * S_region, clipped at 0.
/// Empty ground truth scores 1 - mean(p); full ground truth scores mean(p).
double s_measure(MapView p, MapView y, double alpha = kStructureAlpha);

/// Mean over 255 thresholds of the enhanced-alignment measure of the binarized map.
double e_measure_mean(MapView p, MapView y);

struct ImageMetrics {
  std::string stem;
  double s_measure = 0;
  double f_measure_mean = 0;
  double e_measure_mean = 0;
  double mae = 0;
};

struct MetricReport {
  std::string dataset;
  double s_measure = 0;
  double f_measure_mean = 0;
  double e_measure_mean = 0;
  double mae = 0;
  std::vector<ImageMetrics> per_image;
};

ImageMetrics compute_all(MapView p, MapView y, std::string stem = {});

/// Dataset means of the per-image scores.
MetricReport aggregate(std::string dataset, std::vector<ImageMetrics> per_image);

/// `dataset,s,f,e,mae`, one row per report.
void write_report_csv(const std::filesystem::path& path, std::span<const MetricReport> reports);
/// Aligned plain-text table in S, F, E, MAE column order.
void write_report_table(const std::filesystem::path& path, std::span<const MetricReport> reports);
/// `stem,s,f,e,mae` for every image of one report.
void write_per_image_csv(const std::filesystem::path& path, const MetricReport& report);

}  // namespace depthcod::metrics
