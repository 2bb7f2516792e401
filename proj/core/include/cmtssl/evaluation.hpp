#pragma once

#include <cstdint>
#include <vector>

#include "cmtssl/hsi_data.hpp"
#include "cmtssl/model.hpp"

namespace cmtssl {

// Row = ground truth, column = prediction; pixels whose truth equals the
// ignore id are skipped.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;  // num_classes * num_classes
  bool all_ignored = false;          // warning status: nothing was counted

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  std::int64_t& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * num_classes + pred];
  }
  std::int64_t total() const;
  void merge(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int num_classes, int ignore_id);

struct MetricReport {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class;  // NaN for zero-support classes
  int seeds = 1;
  double oa_std = 0.0, aa_std = 0.0, kappa_std = 0.0;
};

// OA = trace/total; AA = mean per-class accuracy over classes with support;
// kappa = (OA - p_e) / (1 - p_e) with p_e = sum_i row_i * col_i / total^2.
// When p_e = 1 kappa degenerates: reported as 1 for a perfect matrix, else 0.
MetricReport metrics(const ConfusionMatrix& cm);

// Mean and sample standard deviation per metric across runs.
MetricReport aggregate_runs(const std::vector<MetricReport>& reports);

// Runs the segmentation head over every cube and accumulates one confusion
// matrix. Cubes without labels are skipped.
ConfusionMatrix evaluate_model(const MultiTaskModel& model,
                               const std::vector<DataCube>& cubes, int ignore_id);

}  // namespace cmtssl
