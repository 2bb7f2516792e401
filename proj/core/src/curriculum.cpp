#include "cmtssl/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include "cmtssl/errors.hpp"

namespace cmtssl {

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace

std::vector<CurriculumBatch> build_schedule(std::size_t n, int s, int k, double f) {
  if (s < 1) throw ConfigError("curriculum S must be >= 1");
  if (static_cast<std::size_t>(s) > n)
    throw ConfigError("curriculum S exceeds dataset size N");
  if (k < 1) throw ConfigError("curriculum K must be >= 1");
  if (!(f > 0.0)) throw ConfigError("curriculum F must be > 0");

  std::vector<CurriculumBatch> schedule;
  schedule.reserve(static_cast<std::size_t>(s));
  for (int stage = 1; stage <= s; ++stage) {
    CurriculumBatch b;
    b.index = stage;
    b.prefix = (n * static_cast<std::size_t>(stage)) / static_cast<std::size_t>(s);
    b.epochs = std::max(1, round_half_up(static_cast<double>(k) * std::pow(f, stage - 1)));
    schedule.push_back(b);
  }
  return schedule;
}

std::size_t match_budget(const std::vector<CurriculumBatch>& schedule, int mini_batch) {
  if (mini_batch < 1) throw ConfigError("mini-batch size must be >= 1");
  std::size_t steps = 0;
  const std::size_t b = static_cast<std::size_t>(mini_batch);
  for (const CurriculumBatch& stage : schedule) {
    const std::size_t per_epoch = (stage.prefix + b - 1) / b;
    steps += static_cast<std::size_t>(stage.epochs) * per_epoch;
  }
  return steps;
}

int epochs_for_budget(std::size_t n, int mini_batch, std::size_t target_steps) {
  if (mini_batch < 1) throw ConfigError("mini-batch size must be >= 1");
  if (n == 0) throw ConfigError("empty dataset");
  const std::size_t b = static_cast<std::size_t>(mini_batch);
  const std::size_t per_epoch = (n + b - 1) / b;
  const double epochs = static_cast<double>(target_steps) / static_cast<double>(per_epoch);
  return std::max(1, round_half_up(epochs));
}

}  // namespace cmtssl
