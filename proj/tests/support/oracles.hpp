// Independent reference implementations used to cross-check production code.
// Everything here is deliberately naive: explicit loops, no histograms, no sharing
// with the library's metric internals.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

namespace oracle {

struct Map {
  int rows = 0, cols = 0;
  std::vector<double> v;
  double operator()(int r, int c) const { return v[r * cols + c]; }
};

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double mae(const Map& p, const Map& y) {
  double s = 0;
  for (std::size_t i = 0; i < p.v.size(); ++i) s += std::fabs(p.v[i] - y.v[i]);
  return s / p.v.size();
}

// Binarize at threshold k/255 (positive when p >= t).
inline std::vector<int> binarize(const Map& p, int k) {
  const double t = k / 255.0;
  std::vector<int> b(p.v.size());
  for (std::size_t i = 0; i < p.v.size(); ++i) b[i] = p.v[i] >= t ? 1 : 0;
  return b;
}

inline double f_mean(const Map& p, const Map& y, double beta2 = 0.3) {
  double total = 0;
  for (int k = 1; k <= 255; ++k) {
    const auto b = binarize(p, k);
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const int g = y.v[i] > 0.5;
      tp += b[i] && g;
      fp += b[i] && !g;
      fn += !b[i] && g;
    }
    if (tp + fn == 0) {
      total += (tp + fp == 0) ? 1.0 : 0.0;
      continue;
    }
    const double prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp / (tp + fn);
    total += prec + rec > 0 ? (1 + beta2) * prec * rec / (beta2 * prec + rec) : 0.0;
  }
  return total / 255.0;
}

inline double e_mean(const Map& p, const Map& y) {
  const std::size_t n = p.v.size();
  double gsum = 0;
  for (double g : y.v) gsum += g > 0.5;
  double total = 0;
  for (int k = 1; k <= 255; ++k) {
    const auto b = binarize(p, k);
    std::vector<double> enh(n);
    if (gsum == 0) {
      for (std::size_t i = 0; i < n; ++i) enh[i] = 1.0 - b[i];
    } else if (gsum == static_cast<double>(n)) {
      for (std::size_t i = 0; i < n; ++i) enh[i] = b[i];
    } else {
      double mb = 0, mg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        mb += b[i];
        mg += y.v[i] > 0.5;
      }
      mb /= n;
      mg /= n;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = b[i] - mb, g = (y.v[i] > 0.5) - mg;
        const double xi = 2 * a * g / (a * a + g * g + kEps);
        enh[i] = (xi + 1) * (xi + 1) / 4;
      }
    }
    double s = 0;
    for (double e : enh) s += e;
    total += s / n;
  }
  return total / 255.0;
}

// Straight transcription of the reference S-measure routines (1-based indexing kept).
namespace smeasure {

inline double std_n1(const std::vector<double>& x) {
  if (x.size() < 2) return 0;
  double m = 0;
  for (double v : x) m += v;
  m /= x.size();
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / (x.size() - 1));
}

inline double object(const std::vector<double>& pred, const std::vector<int>& gt) {
  std::vector<double> x;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (gt[i]) x.push_back(pred[i]);
  if (x.empty()) return 0;
  double m = 0;
  for (double v : x) m += v;
  m /= x.size();
  return 2.0 * m / (m * m + 1.0 + std_n1(x) + kEps);
}

inline double ssim_block(const std::vector<double>& pr, const std::vector<double>& gt) {
  const double N = pr.size();
  double x = 0, y = 0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    x += pr[i];
    y += gt[i];
  }
  x /= N;
  y /= N;
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    sx += (pr[i] - x) * (pr[i] - x);
    sy += (gt[i] - y) * (gt[i] - y);
    sxy += (pr[i] - x) * (gt[i] - y);
  }
  sx /= (N - 1 + kEps);
  sy /= (N - 1 + kEps);
  sxy /= (N - 1 + kEps);
  const double alpha = 4 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + kEps);
  if (alpha == 0 && beta == 0) return 1.0;
  return 0.0;
}

// MATLAB round: half away from zero.
inline int mround(double v) { return static_cast<int>(v < 0 ? std::ceil(v - 0.5) : std::floor(v + 0.5)); }

inline double s_measure(const Map& p, const Map& yv) {
  const int hei = p.rows, wid = p.cols;
  std::vector<int> G(p.v.size());
  double mean_gt = 0;
  for (std::size_t i = 0; i < G.size(); ++i) {
    G[i] = yv.v[i] > 0.5;
    mean_gt += G[i];
  }
  mean_gt /= G.size();
  double mean_p = 0;
  for (double v : p.v) mean_p += v;
  mean_p /= p.v.size();
  if (mean_gt == 0) return 1.0 - mean_p;
  if (mean_gt == 1) return mean_p;

  // S_object
  std::vector<double> fg(p.v.size()), bg(p.v.size());
  std::vector<int> notG(G.size());
  for (std::size_t i = 0; i < G.size(); ++i) {
    fg[i] = G[i] ? p.v[i] : 0.0;
    bg[i] = G[i] ? 0.0 : 1.0 - p.v[i];
    notG[i] = !G[i];
  }
  const double O_FG = object(fg, G);
  const double O_BG = object(bg, notG);
  const double u = mean_gt;
  const double Q_obj = u * O_FG + (1 - u) * O_BG;

  // S_region: centroid
  double total = 0, sx = 0, sy = 0;
  for (int i = 1; i <= hei; ++i)
    for (int j = 1; j <= wid; ++j)
      if (G[(i - 1) * wid + (j - 1)]) {
        total += 1;
        sx += j;
        sy += i;
      }
  const int X = mround(sx / total), Y = mround(sy / total);
  const double area = static_cast<double>(wid) * hei;
  const double w1 = X * Y / area, w2 = (wid - X) * Y / area, w3 = X * (hei - Y) / area;
  const double w4 = 1 - w1 - w2 - w3;
  auto block = [&](int i0, int i1, int j0, int j1) {  // inclusive 1-based ranges
    std::vector<double> pr, gt;
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        pr.push_back(p.v[(i - 1) * wid + (j - 1)]);
        gt.push_back(G[(i - 1) * wid + (j - 1)]);
      }
    return std::make_pair(pr, gt);
  };
  const std::pair<double, std::array<int, 4>> parts[] = {
      {w1, {1, Y, 1, X}}, {w2, {1, Y, X + 1, wid}}, {w3, {Y + 1, hei, 1, X}}, {w4, {Y + 1, hei, X + 1, wid}}};
  double Q_reg = 0;
  for (const auto& [w, r] : parts) {
    auto [pr, gt] = block(r[0], r[1], r[2], r[3]);
    if (pr.empty()) continue;
    Q_reg += w * ssim_block(pr, gt);
  }
  const double Q = 0.5 * Q_obj + 0.5 * Q_reg;
  return Q < 0 ? 0 : Q;
}

}  // namespace smeasure

inline Map random_prediction(std::mt19937_64& rng, int rows, int cols) {
  Map m{rows, cols, std::vector<double>(rows * cols)};
  std::uniform_real_distribution<double> u(0, 1);
  std::bernoulli_distribution quant(0.3);
  for (auto& v : m.v) {
    v = u(rng);
    // Hit thresholds exactly now and then.
    if (quant(rng)) v = std::floor(v * 255) / 255.0;
  }
  return m;
}

inline Map random_mask(std::mt19937_64& rng, int rows, int cols) {
  Map m{rows, cols, std::vector<double>(rows * cols)};
  std::uniform_real_distribution<double> frac(0, 1);
  std::bernoulli_distribution fg(frac(rng));
  for (auto& v : m.v) v = fg(rng) ? 1.0 : 0.0;
  return m;
}

// Single-image SSIM by explicit window sums; Gaussian 11x11 (or smaller odd fitting window).
inline double ssim(const Map& a, const Map& b, double sigma = 1.5) {
  int win = 11;
  while (win > std::min(a.rows, a.cols)) win -= 2;
  const int r = win / 2;
  std::vector<double> w(win * win);
  double wsum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double e = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
      w[i * win + j] = e;
      wsum += e;
    }
  for (auto& v : w) v /= wsum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int count = 0;
  for (int y0 = 0; y0 + win <= a.rows; ++y0)
    for (int x0 = 0; x0 + win <= a.cols; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double k = w[i * win + j], va = a(y0 + i, x0 + j), vb = b(y0 + i, x0 + j);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

// Boundary-weighted BCE + weighted IoU for one image, with a 31x31 zero-padded box filter.
inline double structure_loss(const Map& logits, const Map& y) {
  const int H = y.rows, W = y.cols;
  double wsum = 0, wbce = 0, inter = 0, uni = 0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double box = 0;
      for (int i = r - 15; i <= r + 15; ++i)
        for (int j = c - 15; j <= c + 15; ++j)
          if (i >= 0 && i < H && j >= 0 && j < W) box += y(i, j);
      box /= 961.0;
      const double wgt = 1 + 5 * std::fabs(box - y(r, c));
      const double x = logits(r, c), t = y(r, c);
      const double p = 1 / (1 + std::exp(-x));
      const double bce = -(t * std::log(p) + (1 - t) * std::log(1 - p));
      wsum += wgt;
      wbce += wgt * bce;
      inter += wgt * p * t;
      uni += wgt * (p + t);
    }
  return wbce / wsum + 1 - (inter + 1) / (uni - inter + 1);
}

inline Map from_tensor(const torch::Tensor& t) {
  const auto d = t.detach().to(torch::kFloat64).contiguous();
  Map m{static_cast<int>(d.size(-2)), static_cast<int>(d.size(-1)), {}};
  m.v.assign(d.data_ptr<double>(), d.data_ptr<double>() + d.numel());
  return m;
}

// Central-difference gradient check over selected coordinates of `input`.
// Returns the norm-wise relative error ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-12).
inline double gradcheck(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& input,
                        double h = 1e-4, int max_coords = 256, std::uint64_t seed = 0) {
  auto x = input.detach().clone().to(torch::kFloat64).set_requires_grad(true);
  auto out = f(x);
  auto analytic = torch::autograd::grad({out}, {x})[0].detach().reshape({-1});
  const auto n = x.numel();
  std::vector<int64_t> coords(n);
  for (int64_t i = 0; i < n; ++i) coords[i] = i;
  if (n > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  double diff2 = 0, a2 = 0, n2 = 0;
  torch::NoGradGuard guard;
  auto base = x.detach().clone().reshape({-1});
  for (const auto i : coords) {
    auto xp = base.clone();
    auto xm = base.clone();
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp.reshape(x.sizes())).item<double>();
    const double fm = f(xm.reshape(x.sizes())).item<double>();
    const double num = (fp - fm) / (2 * h);
    const double ana = analytic[i].item<double>();
    diff2 += (num - ana) * (num - ana);
    a2 += ana * ana;
    n2 += num * num;
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
}

// Directional check: d/de f(x + e v) at e = 0 against <grad, v>.
inline double directional_check(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                const torch::Tensor& input, std::uint64_t seed = 0, double h = 1e-4) {
  auto x = input.detach().clone().to(torch::kFloat64).set_requires_grad(true);
  auto g = torch::autograd::grad({f(x)}, {x})[0].detach();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto v = torch::randn(x.sizes(), gen, torch::kFloat64);
  torch::NoGradGuard guard;
  const double num = (f(x.detach() + h * v).item<double>() - f(x.detach() - h * v).item<double>()) / (2 * h);
  const double ana = (g * v).sum().item<double>();
  return std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-12});
}

}  // namespace oracle
