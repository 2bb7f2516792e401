#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmtssl/hsi_data.hpp"
#include "cmtssl/tensor.hpp"

namespace cmtssl {

enum class Aggregation { average, maximum, stddev };

const char* aggregation_name(Aggregation a);
Aggregation aggregation_from_name(const std::string& name);

// 3x3 spatial Scharr pair plus the two-tap spectral difference. Kx responds to
// horizontal (column) variation, Ky = Kx transposed to vertical variation.
struct GradientKernels {
  double kx[3][3];
  double ky[3][3];
  double kz[2];

  static GradientKernels scharr();
};

// Directional gradient fields, each on the full {H,W,C} grid so the pointwise
// magnitude is defined everywhere.
struct GradientFields {
  Tensor gx, gy, gz;
};

// Spatial fields are true 2-D convolutions applied per band with replicate
// padding; the spectral field is the forward difference
// gz[...,c] = I[...,c+1] - I[...,c] with the last band replicated (gz = 0
// there). Requires H, W >= 3 and C >= 2.
GradientFields gradient_fields(const Tensor& cube_hwc,
                               const GradientKernels& kernels = GradientKernels::scharr());

// Aggregated 3-D gradient magnitude: average/max/std of
// sqrt(gx^2 + gy^2 + gz^2) over the grid. Average is the curriculum default.
double difficulty_score(const Tensor& cube_hwc, Aggregation agg = Aggregation::average,
                        const GradientKernels& kernels = GradientKernels::scharr());

// Scores a batch in parallel; result order matches input order.
std::vector<double> score_cubes(const std::vector<DataCube>& cubes,
                                Aggregation agg = Aggregation::average);

// Stable ascending order: returns indices such that
// scores[order[0]] <= scores[order[1]] <= ..., ties keeping original order.
std::vector<std::size_t> difficulty_order(const std::vector<double>& scores);

struct CorrelationReport {
  Aggregation aggregation = Aggregation::average;
  std::string task;  // "mim" or "jps"
  double pearson_r = 0.0;
  int sample_count = 0;
};

// Pearson product-moment coefficient. Throws DegenerateInputError on length
// mismatch, fewer than 3 samples, or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

CorrelationReport correlate_difficulty_with_loss(const std::vector<double>& scores,
                                                 const std::vector<double>& losses,
                                                 Aggregation agg, const std::string& task);

}  // namespace cmtssl
