#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtssl/curriculum.hpp"
#include "cmtssl/hsi_data.hpp"
#include "cmtssl/model.hpp"
#include "cmtssl/pretext.hpp"

namespace cmtssl {

// Weights of the three pretext losses in the combined objective
// l_total = spa * l_spa + spe * l_spe + mim * l_mim. A task with weight 0 is
// disabled outright: it is neither generated nor forwarded, so its head stays
// bit-identical.
struct LossWeights {
  double spa = 1.0;
  double spe = 1.0;
  double mim = 4.0;
};

enum class Strategy { scratch, mim, jps, mtssl, cmtssl };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct PretextConfigs {
  SpatialJigsawConfig spatial;
  SpectralJigsawConfig spectral;
  MaskingConfig mim;
};

struct TrainConfig {
  double lr = 5e-4;
  int batch = 16;
  double weight_decay = 0.01;
  Strategy strategy = Strategy::cmtssl;
  std::uint64_t seed = 0;
  // Curriculum shape; non-curriculum strategies reuse it (through
  // match_budget) to derive an equal optimizer-step budget.
  int s = 3;
  int k = 32;
  double f = 1.5;
  std::size_t step_budget = 0;  // explicit override; 0 = derive from (s,k,f)
};

struct StepRecord {
  int stage = 0;
  int epoch = 0;
  std::size_t step = 0;  // global optimizer-step index, 1-based
  double l_spa = 0.0, l_spe = 0.0, l_mim = 0.0, l_total = 0.0;
};

struct MetricRecord {
  int stage = 0;
  int epoch = 0;
  std::string name;
  double value = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<MetricRecord> metrics;
  double wall_seconds = 0.0;

  void write_jsonl(const std::string& path) const;
};

struct PretrainResult {
  TrainLog log;
  bool aborted = false;
  std::string abort_reason;
  std::string last_checkpoint;  // most recent stage checkpoint, if any
};

// The curriculum multi-task pretraining loop. `cubes` must already be
// normalized. For strategy cmtssl the data is difficulty-sorted ascending and
// trained over the (s, k, f) stage schedule; mim/jps/mtssl run a single stage
// over the data as given, for an epoch count matched to the same step budget.
// Per-visit pretext randomness derives from (seed, stage, epoch, cube index),
// so results are independent of worker count and reproducible bit-for-bit.
// Stage checkpoints go to `ckpt_dir`/stage-<k> when a directory is given.
// A non-finite loss aborts the run, returning the last good checkpoint.
PretrainResult pretrain(MultiTaskModel& model, const std::vector<DataCube>& cubes,
                        const PretextConfigs& pretext, const LossWeights& weights,
                        const TrainConfig& cfg,
                        const std::vector<DataCube>* validation = nullptr,
                        const std::string& ckpt_dir = "");

struct FinetuneConfig {
  double lr = 5e-4;
  int batch = 16;
  int epochs = 60;
  double weight_decay = 0.01;
  int ignore_id = -1;  // label id excluded from loss and metrics; -1 = none
  bool freeze_encoder = false;
  std::uint64_t seed = 0;
};

// Supervised fine-tuning of encoder + segmentation head with per-pixel
// cross-entropy over labeled pixels. The full encoder is trainable unless
// freeze_encoder is set.
TrainLog finetune(MultiTaskModel& model, const std::vector<DataCube>& labeled,
                  const FinetuneConfig& cfg,
                  const std::vector<DataCube>* validation = nullptr);

// Per-cube task losses of a (possibly trained) model under a fixed
// transform seed; feeds the difficulty/loss correlation analysis. `jps` is
// the mean of the two jigsaw BCE losses.
struct TaskLossRow {
  std::string cube_id;
  double mim = 0.0;
  double jps = 0.0;
};

std::vector<TaskLossRow> per_cube_task_losses(const MultiTaskModel& model,
                                              const std::vector<DataCube>& cubes,
                                              const PretextConfigs& pretext,
                                              std::uint64_t seed);

// Mean per-loss encoder-gradient L2 norms over a sample of cubes; the
// diagnostic for balancing loss weights.
struct GradNormReport {
  double spa = 0.0;
  double spe = 0.0;
  double mim = 0.0;
};

GradNormReport encoder_grad_norms(const MultiTaskModel& model,
                                  const std::vector<DataCube>& cubes,
                                  const PretextConfigs& pretext, std::uint64_t seed,
                                  std::size_t sample_limit = 16);

}  // namespace cmtssl
