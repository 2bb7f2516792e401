#include "cmtssl/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmtssl/errors.hpp"
#include "cmtssl/threading.hpp"

namespace cmtssl {

const char* aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::average: return "average";
    case Aggregation::maximum: return "maximum";
    case Aggregation::stddev: return "std";
  }
  return "?";
}

Aggregation aggregation_from_name(const std::string& name) {
  if (name == "average" || name == "avg" || name == "mean") return Aggregation::average;
  if (name == "maximum" || name == "max") return Aggregation::maximum;
  if (name == "std" || name == "stddev") return Aggregation::stddev;
  throw ConfigError("unknown aggregation: " + name);
}

GradientKernels GradientKernels::scharr() {
  GradientKernels k{};
  const double kx[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      k.kx[i][j] = kx[i][j];
      k.ky[i][j] = kx[j][i];
    }
  k.kz[0] = 1.0;
  k.kz[1] = -1.0;
  return k;
}

GradientFields gradient_fields(const Tensor& cube, const GradientKernels& kernels) {
  if (cube.rank() != 3) throw ShapeError("gradient_fields expects {H,W,C}");
  const int H = cube.dim(0), W = cube.dim(1), C = cube.dim(2);
  if (H < 3 || W < 3) throw ShapeError("gradient_fields requires H, W >= 3");
  if (C < 2) throw ShapeError("gradient_fields requires C >= 2");

  GradientFields f{Tensor({H, W, C}), Tensor({H, W, C}), Tensor({H, W, C})};
  const double* src = cube.data();
  double* gx = f.gx.data();
  double* gy = f.gy.data();
  double* gz = f.gz.data();

  auto at = [&](int h, int w, int c) -> double {
    // Replicate padding.
    h = std::clamp(h, 0, H - 1);
    w = std::clamp(w, 0, W - 1);
    return src[(static_cast<std::size_t>(h) * W + w) * C + c];
  };

  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int c = 0; c < C; ++c) {
        double ax = 0.0, ay = 0.0;
        // True convolution: output(p) = sum_q K(q) * I(p - q).
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const double v = at(h - dr, w - dc, c);
            ax += kernels.kx[dr + 1][dc + 1] * v;
            ay += kernels.ky[dr + 1][dc + 1] * v;
          }
        const std::size_t idx = (static_cast<std::size_t>(h) * W + w) * C + c;
        gx[idx] = ax;
        gy[idx] = ay;
        gz[idx] = c + 1 < C
                      ? kernels.kz[0] * src[idx + 1] + kernels.kz[1] * src[idx]
                      : 0.0;
      }
  return f;
}

double difficulty_score(const Tensor& cube, Aggregation agg, const GradientKernels& kernels) {
  const GradientFields f = gradient_fields(cube, kernels);
  const std::size_t n = f.gx.size();
  const double* gx = f.gx.data();
  const double* gy = f.gy.data();
  const double* gz = f.gz.data();

  double sum = 0.0, maxv = 0.0;
  std::vector<double> mag;
  if (agg == Aggregation::stddev) mag.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]);
    sum += m;
    maxv = std::max(maxv, m);
    if (agg == Aggregation::stddev) mag[i] = m;
  }
  switch (agg) {
    case Aggregation::average:
      return sum / static_cast<double>(n);
    case Aggregation::maximum:
      return maxv;
    case Aggregation::stddev: {
      const double mean = sum / static_cast<double>(n);
      double sq = 0.0;
      for (double m : mag) sq += (m - mean) * (m - mean);
      return std::sqrt(sq / static_cast<double>(n));
    }
  }
  return 0.0;
}

std::vector<double> score_cubes(const std::vector<DataCube>& cubes, Aggregation agg) {
  std::vector<double> scores(cubes.size());
  parallel_for(cubes.size(),
               [&](std::size_t i) { scores[i] = difficulty_score(cubes[i].values, agg); });
  return scores;
}

std::vector<std::size_t> difficulty_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw DegenerateInputError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw DegenerateInputError("pearson needs at least 3 samples");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateInputError("pearson: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlate_difficulty_with_loss(const std::vector<double>& scores,
                                                 const std::vector<double>& losses,
                                                 Aggregation agg, const std::string& task) {
  CorrelationReport report;
  report.aggregation = agg;
  report.task = task;
  report.pearson_r = pearson(scores, losses);
  report.sample_count = static_cast<int>(scores.size());
  return report;
}

}  // namespace cmtssl
