#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmtssl/difficulty.hpp"
#include "cmtssl/errors.hpp"
#include "cmtssl/rng.hpp"

using namespace cmtssl;

namespace {

// Independent dense-loop reference: materializes a replicate-padded copy per
// band and convolves with explicit loops. Deliberately written differently
// from the library path (pad-then-slide instead of clamp-on-read).
struct OracleFields {
  std::vector<double> gx, gy, gz, mag;
};

OracleFields oracle_fields(const Tensor& cube) {
  const int h = cube.dim(0), w = cube.dim(1), c = cube.dim(2);
  const double kx[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
  OracleFields f;
  f.gx.assign(cube.size(), 0.0);
  f.gy.assign(cube.size(), 0.0);
  f.gz.assign(cube.size(), 0.0);
  f.mag.assign(cube.size(), 0.0);

  for (int band = 0; band < c; ++band) {
    // Replicate-padded plane (h+2) x (w+2).
    std::vector<double> padded(static_cast<std::size_t>(h + 2) * (w + 2));
    for (int i = -1; i <= h; ++i)
      for (int j = -1; j <= w; ++j) {
        const int ci = std::clamp(i, 0, h - 1);
        const int cj = std::clamp(j, 0, w - 1);
        padded[static_cast<std::size_t>(i + 1) * (w + 2) + (j + 1)] =
            cube.at3(ci, cj, band);
      }
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double ax = 0.0, ay = 0.0;
        // True convolution: output(p) = sum_q K(q) I(p - q); with padded
        // coordinates p = (i+1, j+1) and q = (r-1, s-1).
        for (int r = 0; r < 3; ++r)
          for (int s = 0; s < 3; ++s) {
            const double v = padded[static_cast<std::size_t>(i + 1 - (r - 1)) * (w + 2) +
                                    (j + 1 - (s - 1))];
            ax += kx[r][s] * v;
            ay += kx[s][r] * v;
          }
        const std::size_t idx = (static_cast<std::size_t>(i) * w + j) * c + band;
        f.gx[idx] = ax;
        f.gy[idx] = ay;
      }
  }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int band = 0; band < c; ++band) {
        const std::size_t idx = (static_cast<std::size_t>(i) * w + j) * c + band;
        f.gz[idx] = band + 1 < c ? cube.at3(i, j, band + 1) - cube.at3(i, j, band) : 0.0;
        f.mag[idx] = std::sqrt(f.gx[idx] * f.gx[idx] + f.gy[idx] * f.gy[idx] +
                               f.gz[idx] * f.gz[idx]);
      }
  return f;
}

double oracle_score(const Tensor& cube, Aggregation agg) {
  const OracleFields f = oracle_fields(cube);
  if (agg == Aggregation::maximum) return *std::max_element(f.mag.begin(), f.mag.end());
  const double mean =
      std::accumulate(f.mag.begin(), f.mag.end(), 0.0) / static_cast<double>(f.mag.size());
  if (agg == Aggregation::average) return mean;
  double sq = 0.0;
  for (double m : f.mag) sq += (m - mean) * (m - mean);
  return std::sqrt(sq / static_cast<double>(f.mag.size()));
}

Tensor random_cube(int h, int w, int c, std::uint64_t seed) {
  Tensor cube({h, w, c});
  Rng rng(seed);
  for (std::size_t i = 0; i < cube.size(); ++i) cube[i] = rng.normal(0.0, 1.5);
  return cube;
}

}  // namespace

TEST_CASE("scharr kernels: Kx transpose-mirrors Ky, entries sum to zero, Kz = [1,-1]") {
  const GradientKernels k = GradientKernels::scharr();
  double sum = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(k.kx[i][j] == k.ky[j][i]);
      sum += k.kx[i][j];
    }
  CHECK(sum == 0.0);
  CHECK(k.kz[0] == 1.0);
  CHECK(k.kz[1] == -1.0);
}

TEST_CASE("constant cube has zero gradient fields everywhere") {
  Tensor cube({5, 5, 3});
  cube.fill(4.2);
  const GradientFields f = gradient_fields(cube);
  for (std::size_t i = 0; i < f.gx.size(); ++i) {
    CHECK(f.gx[i] == 0.0);
    CHECK(f.gy[i] == 0.0);
    CHECK(f.gz[i] == 0.0);
  }
  CHECK(difficulty_score(cube, Aggregation::average) == 0.0);
}

TEST_CASE("column ramp: interior Gx equals the Scharr row-sum weight 32") {
  Tensor cube({5, 5, 2});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int b = 0; b < 2; ++b) cube.at3(i, j, b) = static_cast<double>(j);
  const GradientFields f = gradient_fields(cube);
  for (int i = 0; i < 5; ++i)
    for (int j = 1; j < 4; ++j)
      for (int b = 0; b < 2; ++b) {
        CHECK(f.gx.at3(i, j, b) == 32.0);
        CHECK(f.gy.at3(i, j, b) == 0.0);
      }
  // Cross-check the whole grid against the independent oracle.
  const OracleFields o = oracle_fields(cube);
  for (std::size_t i = 0; i < o.gx.size(); ++i) {
    CHECK(f.gx[i] == doctest::Approx(o.gx[i]).epsilon(1e-12));
    CHECK(f.gy[i] == doctest::Approx(o.gy[i]).epsilon(1e-12));
  }
}

TEST_CASE("constant spectral step: Gz is the step everywhere except the replicated last band") {
  Tensor cube({4, 4, 2});
  Rng rng(3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      cube.at3(i, j, 0) = v;
      cube.at3(i, j, 1) = v + 7.0;
    }
  const GradientFields f = gradient_fields(cube);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(f.gz.at3(i, j, 0) == doctest::Approx(7.0).epsilon(1e-12));
      CHECK(f.gz.at3(i, j, 1) == 0.0);
    }
}

TEST_CASE("cube smaller than the kernel support is a shape error") {
  CHECK_THROWS_AS(gradient_fields(Tensor({2, 5, 2})), ShapeError);
  CHECK_THROWS_AS(gradient_fields(Tensor({5, 2, 2})), ShapeError);
  CHECK_THROWS_AS(gradient_fields(Tensor({5, 5, 1})), ShapeError);
}

TEST_CASE("difficulty matches the dense-loop oracle on random cubes") {
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor cube = random_cube(8, 8, 4, 500 + trial);
    for (Aggregation agg :
         {Aggregation::average, Aggregation::maximum, Aggregation::stddev}) {
      const double got = difficulty_score(cube, agg);
      const double want = oracle_score(cube, agg);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("mean magnitude never exceeds max magnitude") {
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor cube = random_cube(6, 6, 3, 900 + trial);
    CHECK(difficulty_score(cube, Aggregation::average) <=
          difficulty_score(cube, Aggregation::maximum));
  }
}

TEST_CASE("scale homogeneity and shift invariance of the average score") {
  const Tensor cube = random_cube(8, 8, 4, 77);
  const double base = difficulty_score(cube, Aggregation::average);
  for (double lambda : {0.5, 2.0, 10.0}) {
    Tensor scaled = cube;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= lambda;
    CHECK(difficulty_score(scaled, Aggregation::average) ==
          doctest::Approx(lambda * base).epsilon(1e-9));
  }
  Tensor shifted = cube;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 3.25;
  CHECK(std::fabs(difficulty_score(shifted, Aggregation::average) - base) < 1e-9);
}

TEST_CASE("sort order: scores [3,1,2] -> order [1,2,0]") {
  const std::vector<std::size_t> order = difficulty_order({3.0, 1.0, 2.0});
  CHECK(order == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("sort stability: equal scores keep original order") {
  const std::vector<std::size_t> order = difficulty_order({1.0, 1.0, 1.0, 1.0});
  CHECK(order == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("sort matches an oracle sort of (score, index) pairs on 1000 entries") {
  Rng rng(42);
  std::vector<double> scores(1000);
  for (auto& s : scores) s = static_cast<double>(rng.below(50));  // plenty of ties
  const auto order = difficulty_order(scores);

  std::vector<std::pair<double, std::size_t>> pairs;
  for (std::size_t i = 0; i < scores.size(); ++i) pairs.emplace_back(scores[i], i);
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == pairs[i].second);
}

TEST_CASE("pearson: self and anti correlation") {
  const std::vector<double> x = {1.0, 2.0, 3.5, 7.0};
  std::vector<double> neg = x;
  for (auto& v : neg) v = -v;
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson matches the direct covariance formula") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {2, 4, 5, 9};
  // Hand-oracle in the E[xy] - E[x]E[y] form.
  const double n = 4.0;
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  const double want = (sxy / n - sx / n * sy / n) /
                      (std::sqrt(sxx / n - sx / n * sx / n) *
                       std::sqrt(syy / n - sy / n * sy / n));
  CHECK(pearson(x, y) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("pearson rejects degenerate inputs") {
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), DegenerateInputError);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), DegenerateInputError);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), DegenerateInputError);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {4, 4, 4}), DegenerateInputError);
}

TEST_CASE("correlation report carries aggregation, task, and sample count") {
  const CorrelationReport r =
      correlate_difficulty_with_loss({1, 2, 3}, {2, 4, 7}, Aggregation::average, "mim");
  CHECK(r.sample_count == 3);
  CHECK(r.task == "mim");
  CHECK(r.pearson_r > 0.9);
  CHECK(std::fabs(r.pearson_r) <= 1.0);
}
