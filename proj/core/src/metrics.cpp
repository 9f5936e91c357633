#include "depthcod/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "depthcod/error.hpp"

namespace depthcod::metrics {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(MapView p, MapView y, const char* what) {
  if (p.rows != y.rows || p.cols != y.cols || p.size() != y.size() ||
      p.size() != static_cast<std::size_t>(p.rows) * p.cols)
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": maps differ in shape");
}

bool is_fg(double v) { return v > 0.5; }

// Number of thresholds k/255 (k = 1..255) that `v` reaches.
int threshold_level(double v) {
  int level = static_cast<int>(std::floor(v * kThresholds));
  level = std::clamp(level, 0, kThresholds);
  while (level < kThresholds && v >= static_cast<double>(level + 1) / kThresholds) ++level;
  while (level > 0 && v < static_cast<double>(level) / kThresholds) --level;
  return level;
}

// Per-threshold confusion counts: positives[k] and true_positives[k] for k = 1..255.
struct ThresholdCounts {
  std::array<double, kThresholds + 1> positives{};
  std::array<double, kThresholds + 1> true_positives{};
  double gt_positives = 0;
  double total = 0;
};

ThresholdCounts threshold_counts(MapView p, MapView y) {
  std::array<double, kThresholds + 1> fg_hist{}, bg_hist{};
  ThresholdCounts c;
  c.total = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int level = threshold_level(p.values[i]);
    if (is_fg(y.values[i])) {
      fg_hist[level] += 1;
      c.gt_positives += 1;
    } else {
      bg_hist[level] += 1;
    }
  }
  double fg_suffix = 0, bg_suffix = 0;
  for (int k = kThresholds; k >= 1; --k) {
    fg_suffix += fg_hist[k];
    bg_suffix += bg_hist[k];
    c.true_positives[k] = fg_suffix;
    c.positives[k] = fg_suffix + bg_suffix;
  }
  return c;
}

struct RegionStats {
  double count = 0;
  double mean = 0;
  double var = 0;  // sample variance, N-1 normalization
};

template <typename Value, typename Select>
RegionStats region_stats(MapView m, Value value, Select select) {
  RegionStats s;
  double sum = 0;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (select(r, c)) {
        sum += value(r, c);
        s.count += 1;
      }
  if (s.count == 0) return s;
  s.mean = sum / s.count;
  double sq = 0;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (select(r, c)) {
        const double d = value(r, c) - s.mean;
        sq += d * d;
      }
  s.var = s.count > 1 ? sq / (s.count - 1) : 0.0;
  return s;
}

double object_score(const RegionStats& s) {
  if (s.count == 0) return 0.0;
  return 2.0 * s.mean / (s.mean * s.mean + 1.0 + std::sqrt(s.var) + kEps);
}

double s_object(MapView p, MapView y) {
  const auto fg = region_stats(
      p, [&](int r, int c) { return p.at(r, c); }, [&](int r, int c) { return is_fg(y.at(r, c)); });
  const auto bg = region_stats(
      p, [&](int r, int c) { return 1.0 - p.at(r, c); },
      [&](int r, int c) { return !is_fg(y.at(r, c)); });
  const double u = fg.count / static_cast<double>(p.size());
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

// SSIM-style similarity of one rectangular block [r0,r1) x [c0,c1).
double block_similarity(MapView p, MapView y, int r0, int r1, int c0, int c1) {
  const double n = static_cast<double>(r1 - r0) * (c1 - c0);
  double sp = 0, sy = 0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) {
      sp += p.at(r, c);
      sy += is_fg(y.at(r, c)) ? 1.0 : 0.0;
    }
  const double mp = sp / n, my = sy / n;
  double vp = 0, vy = 0, cov = 0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) {
      const double dp = p.at(r, c) - mp;
      const double dy = (is_fg(y.at(r, c)) ? 1.0 : 0.0) - my;
      vp += dp * dp;
      vy += dy * dy;
      cov += dp * dy;
    }
  const double denom = n - 1 + kEps;
  vp /= denom;
  vy /= denom;
  cov /= denom;
  const double a = 4.0 * mp * my * cov;
  const double b = (mp * mp + my * my) * (vp + vy);
  if (a != 0) return a / (b + kEps);
  return b == 0 ? 1.0 : 0.0;
}

double s_region(MapView p, MapView y) {
  // Foreground centroid with 1-based coordinates, rounded half away from zero.
  double total = 0, sum_x = 0, sum_y = 0;
  for (int r = 0; r < y.rows; ++r)
    for (int c = 0; c < y.cols; ++c)
      if (is_fg(y.at(r, c))) {
        total += 1;
        sum_x += c + 1;
        sum_y += r + 1;
      }
  int cx, cy;
  if (total == 0) {
    cx = static_cast<int>(std::round(y.cols / 2.0));
    cy = static_cast<int>(std::round(y.rows / 2.0));
  } else {
    cx = static_cast<int>(std::round(sum_x / total));
    cy = static_cast<int>(std::round(sum_y / total));
  }
  const double area = static_cast<double>(y.rows) * y.cols;
  const double w1 = cx * cy / area;
  const double w2 = (y.cols - cx) * cy / area;
  const double w3 = cx * (y.rows - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;

  struct Block {
    double weight;
    int r0, r1, c0, c1;
  };
  const std::array<Block, 4> blocks{{{w1, 0, cy, 0, cx},
                                     {w2, 0, cy, cx, y.cols},
                                     {w3, cy, y.rows, 0, cx},
                                     {w4, cy, y.rows, cx, y.cols}}};
  double q = 0;
  for (const auto& b : blocks) {
    if (b.r1 <= b.r0 || b.c1 <= b.c0) continue;  // empty quadrant carries zero weight
    q += b.weight * block_similarity(p, y, b.r0, b.r1, b.c0, b.c1);
  }
  return q;
}

}  // namespace

double mae(MapView p, MapView y) {
  require_same_shape(p, y, "mae");
  double sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p.values[i] - y.values[i]);
  return sum / static_cast<double>(p.size());
}

double f_measure_mean(MapView p, MapView y, double beta_squared) {
  require_same_shape(p, y, "f_measure_mean");
  const auto c = threshold_counts(p, y);
  double sum = 0;
  for (int k = 1; k <= kThresholds; ++k) {
    const double tp = c.true_positives[k];
    const double pp = c.positives[k];
    if (c.gt_positives == 0) {
      sum += pp == 0 ? 1.0 : 0.0;
      continue;
    }
    if (tp == 0) continue;
    const double precision = tp / pp;
    const double recall = tp / c.gt_positives;
    sum += (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall);
  }
  return sum / kThresholds;
}

double s_measure(MapView p, MapView y, double alpha) {
  require_same_shape(p, y, "s_measure");
  double fg = 0, mean_p = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    fg += is_fg(y.values[i]) ? 1.0 : 0.0;
    mean_p += p.values[i];
  }
  const double n = static_cast<double>(p.size());
  mean_p /= n;
  if (fg == 0) return 1.0 - mean_p;
  if (fg == n) return mean_p;
  const double q = alpha * s_object(p, y) + (1.0 - alpha) * s_region(p, y);
  return std::max(q, 0.0);
}

double e_measure_mean(MapView p, MapView y) {
  require_same_shape(p, y, "e_measure_mean");
  const auto c = threshold_counts(p, y);
  const double n = c.total;
  const double g = c.gt_positives;
  double sum = 0;
  for (int k = 1; k <= kThresholds; ++k) {
    const double pp = c.positives[k];
    const double tp = c.true_positives[k];
    if (g == 0) {
      sum += (n - pp) / n;
      continue;
    }
    if (g == n) {
      sum += pp / n;
      continue;
    }
    const double mu_p = pp / n, mu_y = g / n;
    // Enhanced alignment value for a pixel with binarized prediction b and label l.
    auto enhanced = [&](double b, double l) {
      const double ap = b - mu_p, ay = l - mu_y;
      const double xi = 2.0 * ap * ay / (ap * ap + ay * ay + kEps);
      return (1.0 + xi) * (1.0 + xi) / 4.0;
    };
    const double n11 = tp, n10 = pp - tp, n01 = g - tp, n00 = n - pp - g + tp;
    sum += (n11 * enhanced(1, 1) + n10 * enhanced(1, 0) + n01 * enhanced(0, 1) +
            n00 * enhanced(0, 0)) / n;
  }
  return sum / kThresholds;
}

ImageMetrics compute_all(MapView p, MapView y, std::string stem) {
  ImageMetrics m;
  m.stem = std::move(stem);
  m.s_measure = s_measure(p, y);
  m.f_measure_mean = f_measure_mean(p, y);
  m.e_measure_mean = e_measure_mean(p, y);
  m.mae = mae(p, y);
  return m;
}

MetricReport aggregate(std::string dataset, std::vector<ImageMetrics> per_image) {
  if (per_image.empty()) throw Error(ErrorCode::EmptyDataset, "no images to aggregate");
  MetricReport r;
  r.dataset = std::move(dataset);
  for (const auto& m : per_image) {
    r.s_measure += m.s_measure;
    r.f_measure_mean += m.f_measure_mean;
    r.e_measure_mean += m.e_measure_mean;
    r.mae += m.mae;
  }
  const double n = static_cast<double>(per_image.size());
  r.s_measure /= n;
  r.f_measure_mean /= n;
  r.e_measure_mean /= n;
  r.mae /= n;
  r.per_image = std::move(per_image);
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  auto out = open_out(path);
  out << "dataset,s,f,e,mae\n";
  for (const auto& r : reports)
    out << r.dataset << ',' << fmt(r.s_measure) << ',' << fmt(r.f_measure_mean) << ','
        << fmt(r.e_measure_mean) << ',' << fmt(r.mae) << '\n';
}

void write_report_table(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  auto out = open_out(path);
  std::size_t width = 7;
  for (const auto& r : reports) width = std::max(width, r.dataset.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << pad("dataset") << "   S_alpha   F_beta    E_xi      MAE\n";
  for (const auto& r : reports)
    out << pad(r.dataset) << "   " << fmt(r.s_measure, "%.3f") << "     " << fmt(r.f_measure_mean, "%.3f")
        << "     " << fmt(r.e_measure_mean, "%.3f") << "     " << fmt(r.mae, "%.3f") << '\n';
}

void write_per_image_csv(const std::filesystem::path& path, const MetricReport& report) {
  auto out = open_out(path);
  out << "stem,s,f,e,mae\n";
  for (const auto& m : report.per_image)
    out << m.stem << ',' << fmt(m.s_measure) << ',' << fmt(m.f_measure_mean) << ','
        << fmt(m.e_measure_mean) << ',' << fmt(m.mae) << '\n';
}

}  // namespace depthcod::metrics
