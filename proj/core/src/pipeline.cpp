#include "cmtssl/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "cmtssl/errors.hpp"

namespace fs = std::filesystem;

namespace cmtssl {

Dataset build_dataset(const std::vector<Scene>& scenes, const SplitSpec& split,
                      int ignore_id) {
  if (scenes.empty()) throw ConfigError("no scenes to build a dataset from");
  Dataset data;
  data.bands = scenes.front().bands;
  data.tile_size = split.tile_size;

  for (const Scene& scene : scenes) {
    if (scene.bands != data.bands)
      throw ShapeError("scenes disagree on band count");
    auto append = [&](Split s, std::vector<DataCube>& dst) {
      std::vector<DataCube> cubes = tile_scene(scene, split, s);
      dst.insert(dst.end(), std::make_move_iterator(cubes.begin()),
                 std::make_move_iterator(cubes.end()));
    };
    append(Split::pretrain, data.pretrain);
    append(Split::train, data.train);
    append(Split::validation, data.validation);
    append(Split::test, data.test);
  }

  // Normalization statistics come from the supervised training tiles only
  // (non-overlapping), never from validation/test pixels.
  data.stats = fit_normalizer(data.train);
  for (auto* split_cubes : {&data.pretrain, &data.train, &data.validation, &data.test})
    for (DataCube& cube : *split_cubes) cube = normalize(cube, data.stats);

  int max_label = -1;
  for (const DataCube& cube : data.train)
    for (int label : cube.labels)
      if (label != ignore_id) max_label = std::max(max_label, label);
  data.num_classes = max_label + 1;
  return data;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.scenes.empty()) throw ConfigError("config names no scenes (data.scenes)");
  if (cfg.split_config.empty()) throw ConfigError("config names no split file (data.split)");
  std::vector<Scene> scenes;
  for (const std::string& path : cfg.scenes)
    scenes.push_back(load_scene(path, SceneFormat::raw_tensor_container));
  SplitSpec split = load_split_spec(cfg.split_config);
  split.tile_size = cfg.tile_size;
  split.pretrain_stride = cfg.pretrain_stride;
  return build_dataset(scenes, split, cfg.finetune.ignore_id);
}

MultiTaskModel build_model_for(const RunConfig& cfg, const Dataset& data,
                               std::uint64_t seed) {
  EncoderSpec enc;
  enc.in_h = data.tile_size;
  enc.in_w = data.tile_size;
  enc.in_c = data.bands;
  enc.w0 = cfg.model_w0;
  enc.w1 = cfg.model_w1;
  enc.budget = cfg.budget;

  HeadsSpec heads;
  heads.n_spa = cfg.pretext.spatial.patch_count(data.tile_size, data.tile_size);
  heads.n_spe = cfg.pretext.spectral.blocks;
  heads.seg_classes = cfg.seg_classes > 0 ? cfg.seg_classes : data.num_classes;
  if (heads.seg_classes < 2)
    throw ConfigError("cannot infer a class count >= 2 from the training labels");
  return MultiTaskModel(enc, heads, seed);
}

StrategyRunResult run_strategy(const RunConfig& cfg, const Dataset& data,
                               Strategy strategy, std::uint64_t seed,
                               const std::string& out_dir) {
  StrategyRunResult result;
  MultiTaskModel model = build_model_for(cfg, data, seed);

  std::string ckpt_dir;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    RunConfig snapshot = cfg;
    snapshot.seed = seed;
    snapshot.strategy = strategy;
    snapshot.save_snapshot((fs::path(out_dir) / "config.snapshot").string());
    ckpt_dir = (fs::path(out_dir) / "ckpt").string();
  }

  if (strategy != Strategy::scratch) {
    if (data.pretrain.empty()) throw ConfigError("no pretraining tiles available");
    TrainConfig tc = cfg.train_config();
    tc.strategy = strategy;
    tc.seed = seed;
    result.pretrain =
        pretrain(model, data.pretrain, cfg.pretext, cfg.weights, tc,
                 data.validation.empty() ? nullptr : &data.validation, ckpt_dir);
    result.pretrain_steps = result.pretrain.log.steps.size();
    if (result.pretrain.aborted)
      throw DataError("pretraining aborted: " + result.pretrain.abort_reason);

    // Per-cube task losses on the validation tiles feed the correlation
    // workflow (scores.csv x losses.csv).
    if (!out_dir.empty() && !data.validation.empty()) {
      const auto rows =
          per_cube_task_losses(model, data.validation, cfg.pretext, seed);
      std::vector<std::pair<std::string, double>> mim_rows, jps_rows;
      for (const TaskLossRow& r : rows) {
        mim_rows.emplace_back(r.cube_id, r.mim);
        jps_rows.emplace_back(r.cube_id, r.jps);
      }
      write_id_value_csv((fs::path(out_dir) / "val_losses_mim.csv").string(), "loss",
                         mim_rows);
      write_id_value_csv((fs::path(out_dir) / "val_losses_jps.csv").string(), "loss",
                         jps_rows);
    }
  }

  FinetuneConfig ft = cfg.finetune;
  ft.seed = seed;
  result.finetune_log =
      finetune(model, data.train, ft, data.validation.empty() ? nullptr : &data.validation);

  const ConfusionMatrix cm = evaluate_model(model, data.test, cfg.finetune.ignore_id);
  result.report = metrics(cm);

  if (!out_dir.empty()) {
    model.save_checkpoint((fs::path(out_dir) / "model.ckpt").string(),
                          cfg.to_json_text());
    TrainLog combined = result.pretrain.log;
    combined.steps.insert(combined.steps.end(), result.finetune_log.steps.begin(),
                          result.finetune_log.steps.end());
    combined.metrics.insert(combined.metrics.end(), result.finetune_log.metrics.begin(),
                            result.finetune_log.metrics.end());
    combined.wall_seconds =
        result.pretrain.log.wall_seconds + result.finetune_log.wall_seconds;
    combined.write_jsonl((fs::path(out_dir) / "log.jsonl").string());
    std::ofstream report_out((fs::path(out_dir) / "report.json").string());
    report_out << metric_report_to_json_text(result.report, true) << "\n";
  }
  return result;
}

std::vector<StrategyRow> compare_strategies(const RunConfig& cfg, const Dataset& data,
                                            const std::vector<Strategy>& strategies,
                                            int seeds, const std::string& out_dir) {
  if (seeds < 1) throw ConfigError("compare needs at least one seed");
  std::vector<StrategyRow> rows;
  for (Strategy strategy : strategies) {
    StrategyRow row;
    row.strategy = strategy_name(strategy);
    std::vector<MetricReport> reports;
    for (int i = 0; i < seeds; ++i) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
      std::string run_dir;
      if (!out_dir.empty())
        run_dir = (fs::path(out_dir) / (row.strategy + "-seed" + std::to_string(seed)))
                      .string();
      StrategyRunResult run = run_strategy(cfg, data, strategy, seed, run_dir);
      reports.push_back(run.report);
      if (strategy != Strategy::scratch) row.pretrain_steps.push_back(run.pretrain_steps);
    }
    row.aggregated = aggregate_runs(reports);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sweep_parameter(const RunConfig& cfg, const Dataset& data,
                                      const std::string& param,
                                      const std::vector<double>& values, int seeds) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double value : values) {
    RunConfig varied = cfg;
    if (param == "S")
      varied.curriculum_s = static_cast<int>(value);
    else if (param == "K")
      varied.curriculum_k = static_cast<int>(value);
    else if (param == "F")
      varied.curriculum_f = value;
    else if (param == "alpha_spa")
      varied.weights.spa = value;
    else if (param == "alpha_spe")
      varied.weights.spe = value;
    else if (param == "alpha_mim")
      varied.weights.mim = value;
    else if (param == "mim.ratio")
      varied.pretext.mim.mask_ratio = value;
    else if (param == "lr")
      varied.lr = value;
    else
      throw ConfigError("unknown sweep parameter: " + param);

    std::vector<MetricReport> reports;
    for (int i = 0; i < seeds; ++i) {
      StrategyRunResult run = run_strategy(varied, data, varied.strategy,
                                           varied.seed + static_cast<std::uint64_t>(i));
      reports.push_back(run.report);
    }
    SweepRow row;
    row.value = value;
    row.aggregated = aggregate_runs(reports);
    rows.push_back(std::move(row));
  }
  return rows;
}

void prepare_run_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force)
      throw ConfigError("run directory '" + dir +
                        "' already exists; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

}  // namespace cmtssl
