#pragma once

#include <cstddef>
#include <vector>

namespace cmtssl {

// One stage of the easy-to-hard schedule: the first `prefix` cubes of the
// difficulty-sorted dataset, trained for `epochs` epochs. Stages nest by
// construction (prefix is non-decreasing in k) and the last stage covers the
// whole dataset.
struct CurriculumBatch {
  int index = 0;          // 1-based stage number k
  std::size_t prefix = 0; // R_k = floor(N * k / S)
  int epochs = 0;         // E_k = round(K * F^(k-1)), at least 1
};

// Builds the S-stage schedule: sizes floor(N*k/S), epochs round(K * F^(k-1))
// with round-half-up and a floor of 1. Requires N >= S >= 1, K >= 1, F > 0.
std::vector<CurriculumBatch> build_schedule(std::size_t n, int s, int k, double f);

// Number of optimizer steps the schedule consumes with mini-batch size b:
// sum over stages of epochs * ceil(prefix / b). A non-curriculum baseline is
// configured with the same step budget for fair comparison.
std::size_t match_budget(const std::vector<CurriculumBatch>& schedule, int mini_batch);

// Epoch count for a single-stage run of n cubes that matches `target_steps`
// as closely as possible (within half an epoch's worth of steps).
int epochs_for_budget(std::size_t n, int mini_batch, std::size_t target_steps);

}  // namespace cmtssl
