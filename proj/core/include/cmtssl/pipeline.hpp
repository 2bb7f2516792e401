#pragma once

#include <string>
#include <vector>

#include "cmtssl/config.hpp"
#include "cmtssl/evaluation.hpp"
#include "cmtssl/report.hpp"
#include "cmtssl/synthetic.hpp"

namespace cmtssl {

// Materialized splits of one or more scenes, normalized with statistics
// fitted on the supervised training tiles only.
struct Dataset {
  std::vector<DataCube> pretrain;
  std::vector<DataCube> train;
  std::vector<DataCube> validation;
  std::vector<DataCube> test;
  std::vector<BandStats> stats;
  int bands = 0;
  int tile_size = 16;
  int num_classes = 0;  // inferred from labels (ignore id excluded)
};

// Tiles + normalizes in-memory scenes under one split spec.
Dataset build_dataset(const std::vector<Scene>& scenes, const SplitSpec& split,
                      int ignore_id);

// Loads cfg.scenes / cfg.split_config from disk and builds the dataset.
Dataset load_dataset(const RunConfig& cfg);

MultiTaskModel build_model_for(const RunConfig& cfg, const Dataset& data,
                               std::uint64_t seed);

struct StrategyRunResult {
  MetricReport report;                 // test metrics after fine-tuning
  std::size_t pretrain_steps = 0;      // optimizer steps spent in pretraining
  PretrainResult pretrain;             // empty log for scratch
  TrainLog finetune_log;
};

// One end-to-end run: (optional) pretraining under `strategy`, full
// fine-tuning, evaluation on the test split. When out_dir is given, writes
// config.snapshot, log.jsonl, ckpt/stage-<k>, model.ckpt and report.json.
StrategyRunResult run_strategy(const RunConfig& cfg, const Dataset& data,
                               Strategy strategy, std::uint64_t seed,
                               const std::string& out_dir = "");

// Table-3-shaped protocol: every strategy runs the same seeds
// (cfg.seed + 0 .. cfg.seed + seeds-1) and an equal pretraining step budget.
std::vector<StrategyRow> compare_strategies(const RunConfig& cfg, const Dataset& data,
                                            const std::vector<Strategy>& strategies,
                                            int seeds, const std::string& out_dir = "");

// Fig-5-shaped protocol: vary one hyperparameter, others fixed. Supported
// params: S, K, F, alpha_spa, alpha_spe, alpha_mim, mim.ratio, lr.
std::vector<SweepRow> sweep_parameter(const RunConfig& cfg, const Dataset& data,
                                      const std::string& param,
                                      const std::vector<double>& values, int seeds);

// Refuses to reuse a non-empty run directory unless force is set.
void prepare_run_dir(const std::string& dir, bool force);

}  // namespace cmtssl
