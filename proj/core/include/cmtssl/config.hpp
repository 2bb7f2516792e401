#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtssl/training.hpp"

namespace cmtssl {

// Fully resolved run configuration. Precedence: built-in defaults < config
// file < command-line flags; the resolved snapshot is persisted into every
// run directory so a run can be reproduced from its artifacts alone.
struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = automatic

  // data
  std::vector<std::string> scenes;  // paths to .hsr containers
  std::string split_config;         // path to the region-assignment file
  int tile_size = 16;
  int pretrain_stride = 8;

  // curriculum
  bool curriculum_enabled = true;
  int curriculum_s = 3;
  int curriculum_k = 32;
  double curriculum_f = 1.5;

  // pretext tasks
  PretextConfigs pretext;

  // loss weights
  LossWeights weights;

  // pretraining
  double lr = 5e-4;
  int batch = 16;
  double weight_decay = 0.01;
  Strategy strategy = Strategy::cmtssl;
  std::size_t step_budget = 0;

  // fine-tuning
  FinetuneConfig finetune;

  // model
  int model_w0 = 12;
  int model_w1 = 16;
  std::size_t budget = 25000;
  int seg_classes = 0;  // 0 = infer from training labels

  // Built-in defaults; CMTSSL_SEED overrides the default seed when set.
  static RunConfig defaults();

  // defaults() overlaid with a JSON config file.
  static RunConfig from_file(const std::string& path);

  // Merges a JSON document (dotted sections as nested objects) over *this.
  void merge_json_text(const std::string& json_text);

  // Resolved snapshot, round-trippable through merge_json_text.
  std::string to_json_text() const;

  void save_snapshot(const std::string& path) const;

  TrainConfig train_config() const;
};

}  // namespace cmtssl
