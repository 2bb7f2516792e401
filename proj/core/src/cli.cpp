#include "cmtssl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cmtssl/curriculum.hpp"
#include "cmtssl/difficulty.hpp"
#include "cmtssl/errors.hpp"
#include "cmtssl/pipeline.hpp"
#include "cmtssl/synthetic.hpp"

namespace fs = std::filesystem;

namespace cmtssl {

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig::defaults()
                                            : RunConfig::from_file(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  return cfg;
}

std::vector<Strategy> parse_strategies(const std::string& csv) {
  std::vector<Strategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(strategy_from_name(item));
  }
  if (out.empty()) throw ConfigError("no strategies given");
  return out;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError("no values given");
  return out;
}

// Collects all scene containers in a directory (or a single container path).
std::vector<std::string> scene_paths_from_input(const std::string& input) {
  std::vector<std::string> paths;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.path().extension() == ".hsr") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
  } else {
    paths.push_back(input);
  }
  if (paths.empty()) throw ConfigError("no .hsr scenes under " + input);
  return paths;
}

int cmd_synth(const CommonFlags& flags, int classes, int size, int bands, int grid,
              const std::string& amplitudes, double noise, int count,
              const std::string& out_dir) {
  RunConfig cfg = resolve_config(flags);
  prepare_run_dir(out_dir, flags.force);
  for (int i = 0; i < count; ++i) {
    SyntheticSpec spec;
    spec.height = size;
    spec.width = size;
    spec.bands = bands;
    spec.num_classes = classes;
    spec.region_grid = grid;
    if (!amplitudes.empty()) spec.texture_amplitudes = parse_values(amplitudes);
    spec.noise_std = noise;
    spec.seed = cfg.seed + static_cast<std::uint64_t>(i);
    spec.name = count == 1 ? "synthetic" : "synthetic" + std::to_string(i);
    const Scene scene = generate_scene(spec);
    const std::string base = save_scene(scene, out_dir);
    save_split_spec(default_split_for(spec, cfg.tile_size, cfg.pretrain_stride),
                    base + ".split.json");
    std::cout << "wrote " << base << ".hsr (" << scene.height << "x" << scene.width << "x"
              << scene.bands << ", " << classes << " classes)\n";
  }
  return 0;
}

int cmd_score(const CommonFlags& flags, const std::string& input,
              const std::string& aggregation, const std::string& out_path) {
  const Aggregation agg = aggregation_from_name(aggregation);
  std::vector<DataCube> cubes;
  RunConfig cfg = resolve_config(flags);
  for (const std::string& path : scene_paths_from_input(input)) {
    const Scene scene = load_scene(path, SceneFormat::raw_tensor_container);
    // Full-coverage tiling of the whole scene.
    SplitSpec full;
    full.tile_size = cfg.tile_size;
    full.pretrain_stride = cfg.tile_size;
    full.regions = {{0, 0, scene.width, scene.height, Split::train}};
    auto tiles = tile_scene(scene, full, Split::train);
    cubes.insert(cubes.end(), std::make_move_iterator(tiles.begin()),
                 std::make_move_iterator(tiles.end()));
  }
  if (cubes.empty()) throw ConfigError("no tiles produced from " + input);

  // Scores rank what the model would see: normalized tiles.
  const std::vector<BandStats> stats = fit_normalizer(cubes);
  for (DataCube& cube : cubes) cube = normalize(cube, stats);
  const std::vector<double> scores = score_cubes(cubes, agg);

  std::vector<std::pair<std::string, double>> rows;
  rows.reserve(cubes.size());
  for (std::size_t i = 0; i < cubes.size(); ++i) rows.emplace_back(cubes[i].id(), scores[i]);
  write_id_value_csv(out_path, "score", rows);
  std::cout << "scored " << cubes.size() << " cubes -> " << out_path << "\n";
  return 0;
}

int cmd_plan(std::size_t n, int s, int k, double f, int batch) {
  const auto schedule = build_schedule(n, s, k, f);
  std::cout << "stage  size  epochs\n";
  for (const CurriculumBatch& b : schedule)
    std::cout << std::setw(5) << b.index << std::setw(6) << b.prefix << std::setw(8)
              << b.epochs << "\n";
  std::cout << "optimizer steps at batch " << batch << ": " << match_budget(schedule, batch)
            << "\n";
  return 0;
}

int cmd_correlate(const std::string& scores_path, const std::string& losses_path,
                  const std::string& aggregation, const std::string& task,
                  const std::string& out_path) {
  const auto score_rows = read_id_value_csv(scores_path);
  const auto loss_rows = read_id_value_csv(losses_path);
  std::map<std::string, double> loss_by_id(loss_rows.begin(), loss_rows.end());

  std::vector<double> scores, losses;
  for (const auto& [id, score] : score_rows) {
    const auto it = loss_by_id.find(id);
    if (it == loss_by_id.end()) continue;
    scores.push_back(score);
    losses.push_back(it->second);
  }
  const CorrelationReport report = correlate_difficulty_with_loss(
      scores, losses, aggregation_from_name(aggregation), task);
  const std::string text = correlation_report_to_json_text(report);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path);
    out << text << "\n";
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_pretrain(const CommonFlags& flags, const std::string& strategy_override,
                 const std::string& out_dir) {
  RunConfig cfg = resolve_config(flags);
  if (!strategy_override.empty()) cfg.strategy = strategy_from_name(strategy_override);
  prepare_run_dir(out_dir, flags.force);
  cfg.save_snapshot((fs::path(out_dir) / "config.snapshot").string());

  const Dataset data = load_dataset(cfg);
  if (data.pretrain.empty()) throw ConfigError("no pretraining tiles available");
  MultiTaskModel model = build_model_for(cfg, data, cfg.seed);

  TrainConfig tc = cfg.train_config();
  const PretrainResult result =
      pretrain(model, data.pretrain, cfg.pretext, cfg.weights, tc,
               data.validation.empty() ? nullptr : &data.validation,
               (fs::path(out_dir) / "ckpt").string());
  result.log.write_jsonl((fs::path(out_dir) / "log.jsonl").string());

  if (!data.validation.empty()) {
    const auto rows = per_cube_task_losses(model, data.validation, cfg.pretext, cfg.seed);
    std::vector<std::pair<std::string, double>> mim_rows, jps_rows;
    for (const TaskLossRow& r : rows) {
      mim_rows.emplace_back(r.cube_id, r.mim);
      jps_rows.emplace_back(r.cube_id, r.jps);
    }
    write_id_value_csv((fs::path(out_dir) / "val_losses_mim.csv").string(), "loss", mim_rows);
    write_id_value_csv((fs::path(out_dir) / "val_losses_jps.csv").string(), "loss", jps_rows);
  }

  if (result.aborted) {
    std::cerr << "pretraining aborted: " << result.abort_reason << "\n";
    return 1;
  }
  std::cout << "pretrained " << strategy_name(tc.strategy) << " for "
            << result.log.steps.size() << " steps; checkpoints in " << out_dir
            << "/ckpt\n";
  return 0;
}

int cmd_finetune(const CommonFlags& flags, const std::string& init_ckpt,
                 const std::string& labels_split, const std::string& out_dir) {
  RunConfig cfg = resolve_config(flags);
  prepare_run_dir(out_dir, flags.force);
  cfg.save_snapshot((fs::path(out_dir) / "config.snapshot").string());

  const Dataset data = load_dataset(cfg);
  const std::vector<DataCube>* labeled = nullptr;
  if (labels_split == "train")
    labeled = &data.train;
  else if (labels_split == "validation" || labels_split == "val")
    labeled = &data.validation;
  else
    throw ConfigError("finetune --labels must be 'train' or 'validation'");

  MultiTaskModel model = build_model_for(cfg, data, cfg.seed);
  if (!init_ckpt.empty()) {
    const MultiTaskModel pretrained = MultiTaskModel::load_checkpoint(init_ckpt);
    model.copy_encoder_from(pretrained);
  }
  FinetuneConfig ft = cfg.finetune;
  ft.seed = cfg.seed;
  const TrainLog log =
      finetune(model, *labeled, ft, data.validation.empty() ? nullptr : &data.validation);
  log.write_jsonl((fs::path(out_dir) / "log.jsonl").string());
  model.save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), cfg.to_json_text());
  std::cout << "finetuned on " << labeled->size() << " tiles (" << log.steps.size()
            << " steps) -> " << out_dir << "/model.ckpt\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& model_path,
             const std::string& split, bool per_class, const std::string& out_path) {
  RunConfig cfg = resolve_config(flags);
  const Dataset data = load_dataset(cfg);
  const std::vector<DataCube>* cubes = nullptr;
  if (split == "test")
    cubes = &data.test;
  else if (split == "validation" || split == "val")
    cubes = &data.validation;
  else if (split == "train")
    cubes = &data.train;
  else
    throw ConfigError("eval --split must be train, validation, or test");

  const MultiTaskModel model = MultiTaskModel::load_checkpoint(model_path);
  const ConfusionMatrix cm = evaluate_model(model, *cubes, cfg.finetune.ignore_id);
  if (cm.all_ignored) std::cerr << "warning: every pixel was ignored\n";
  const MetricReport report = metrics(cm);
  const std::string text = metric_report_to_json_text(report, per_class);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path);
    out << text << "\n";
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_compare(const CommonFlags& flags, const std::string& strategies_csv, int seeds,
                const std::string& out_dir) {
  RunConfig cfg = resolve_config(flags);
  const std::vector<Strategy> strategies = parse_strategies(strategies_csv);
  prepare_run_dir(out_dir, flags.force);
  cfg.save_snapshot((fs::path(out_dir) / "config.snapshot").string());

  const Dataset data = load_dataset(cfg);
  const std::vector<StrategyRow> rows =
      compare_strategies(cfg, data, strategies, seeds, out_dir);

  const std::string text = compare_report_to_json_text(rows);
  std::ofstream out((fs::path(out_dir) / "report.json").string());
  out << text << "\n";
  std::cout << render_compare_table(rows);
  std::cout << "report -> " << out_dir << "/report.json\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& param,
              const std::string& values_csv, int seeds, const std::string& out_dir) {
  RunConfig cfg = resolve_config(flags);
  const std::vector<double> values = parse_values(values_csv);
  prepare_run_dir(out_dir, flags.force);
  cfg.save_snapshot((fs::path(out_dir) / "config.snapshot").string());

  const Dataset data = load_dataset(cfg);
  const std::vector<SweepRow> rows = sweep_parameter(cfg, data, param, values, seeds);

  std::ofstream out((fs::path(out_dir) / "report.json").string());
  out << sweep_report_to_json_text(param, rows) << "\n";
  fs::create_directories(fs::path(out_dir) / "plots");
  write_sweep_csv((fs::path(out_dir) / "plots" / ("sweep_" + param + ".csv")).string(), rows);
  write_sweep_svg((fs::path(out_dir) / "plots" / ("sweep_" + param + ".svg")).string(),
                  param, rows);

  std::cout << "param  oa  aa  kappa\n";
  for (const SweepRow& r : rows)
    std::cout << r.value << "  " << r.aggregated.oa * 100 << "  " << r.aggregated.aa * 100
              << "  " << r.aggregated.kappa * 100 << "\n";
  std::cout << "report -> " << out_dir << "/report.json\n";
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"curriculum multi-task self-supervised pretraining for hyperspectral cubes"};
  app.require_subcommand(1);

  CommonFlags flags;
  // Attached per subcommand below; CLI11 options are declared once per app.
  auto add_common = [&flags](CLI::App* cmd, bool with_force = true) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--seed", flags.seed, "seed override")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    if (with_force) cmd->add_flag("--force", flags.force, "overwrite an existing run directory");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic labeled scenes");
  int synth_classes = 3, synth_size = 128, synth_bands = 32, synth_grid = 4, synth_count = 1;
  double synth_noise = 0.02;
  std::string synth_amplitudes, synth_out;
  synth->add_option("--classes", synth_classes, "number of classes");
  synth->add_option("--size", synth_size, "scene height and width");
  synth->add_option("--bands", synth_bands, "spectral bands");
  synth->add_option("--grid", synth_grid, "regions per axis");
  synth->add_option("--amplitudes", synth_amplitudes, "texture amplitudes, comma separated");
  synth->add_option("--noise", synth_noise, "white-noise std");
  synth->add_option("--scenes", synth_count, "number of scenes to generate");
  synth->add_option("--out", synth_out, "output directory")->required();
  add_common(synth);

  // score
  auto* score = app.add_subcommand("score", "difficulty-score tiles of scenes");
  std::string score_input, score_agg = "average", score_out = "scores.csv";
  score->add_option("--input", score_input, "scene container or directory")->required();
  score->add_option("--aggregation", score_agg, "average|maximum|std");
  score->add_option("--out", score_out, "output CSV");
  add_common(score, false);

  // plan
  auto* plan = app.add_subcommand("plan", "print the curriculum batch table");
  std::size_t plan_n = 0;
  int plan_s = 3, plan_k = 32, plan_batch = 16;
  double plan_f = 1.5;
  plan->add_option("--n", plan_n, "dataset size")->required();
  plan->add_option("--s", plan_s, "curriculum batches");
  plan->add_option("--k", plan_k, "initial epoch count");
  plan->add_option("--f", plan_f, "epoch growth factor");
  plan->add_option("--batch", plan_batch, "mini-batch size");

  // correlate
  auto* correlate = app.add_subcommand("correlate", "difficulty/loss Pearson correlation");
  std::string corr_scores, corr_losses, corr_agg = "average", corr_task = "mim", corr_out;
  correlate->add_option("--scores", corr_scores, "scores CSV")->required();
  correlate->add_option("--losses", corr_losses, "losses CSV")->required();
  correlate->add_option("--aggregation", corr_agg, "aggregation tag for the report");
  correlate->add_option("--task", corr_task, "task tag (mim|jps)");
  correlate->add_option("--out", corr_out, "write report JSON here (default: stdout)");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "run self-supervised pretraining");
  std::string pre_strategy, pre_out;
  pre->add_option("--strategy", pre_strategy, "mim|jps|mtssl|cmtssl");
  pre->add_option("--out", pre_out, "run directory")->required();
  add_common(pre);

  // finetune
  auto* fine = app.add_subcommand("finetune", "supervised fine-tuning");
  std::string fine_init, fine_labels = "train", fine_out;
  fine->add_option("--init", fine_init, "checkpoint to initialize the encoder from");
  fine->add_option("--labels", fine_labels, "labeled split to train on");
  fine->add_option("--out", fine_out, "run directory")->required();
  add_common(fine);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "pixel-wise classification metrics");
  std::string eval_model, eval_split = "test", eval_out;
  bool eval_per_class = false;
  eval_cmd->add_option("--model", eval_model, "model checkpoint")->required();
  eval_cmd->add_option("--split", eval_split, "train|validation|test");
  eval_cmd->add_flag("--per-class", eval_per_class, "include the per-class vector");
  eval_cmd->add_option("--out", eval_out, "write report JSON here (default: stdout)");
  add_common(eval_cmd, false);

  // compare
  auto* compare = app.add_subcommand("compare", "training-strategy comparison");
  std::string cmp_strategies = "scratch,mim,jps,mtssl,cmtssl", cmp_out;
  int cmp_seeds = 3;
  compare->add_option("--strategies", cmp_strategies, "comma-separated strategy list");
  compare->add_option("--seeds", cmp_seeds, "runs per strategy");
  compare->add_option("--out", cmp_out, "run directory")->required();
  add_common(compare);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "single-hyperparameter sensitivity sweep");
  std::string sweep_param, sweep_values, sweep_out;
  int sweep_seeds = 1;
  sweep->add_option("--param", sweep_param, "S|K|F|alpha_spa|alpha_spe|alpha_mim|mim.ratio|lr")
      ->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("--seeds", sweep_seeds, "runs per value");
  sweep->add_option("--out", sweep_out, "run directory")->required();
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth)
      return cmd_synth(flags, synth_classes, synth_size, synth_bands, synth_grid,
                       synth_amplitudes, synth_noise, synth_count, synth_out);
    if (*score) return cmd_score(flags, score_input, score_agg, score_out);
    if (*plan) return cmd_plan(plan_n, plan_s, plan_k, plan_f, plan_batch);
    if (*correlate)
      return cmd_correlate(corr_scores, corr_losses, corr_agg, corr_task, corr_out);
    if (*pre) return cmd_pretrain(flags, pre_strategy, pre_out);
    if (*fine) return cmd_finetune(flags, fine_init, fine_labels, fine_out);
    if (*eval_cmd) return cmd_eval(flags, eval_model, eval_split, eval_per_class, eval_out);
    if (*compare) return cmd_compare(flags, cmp_strategies, cmp_seeds, cmp_out);
    if (*sweep) return cmd_sweep(flags, sweep_param, sweep_values, sweep_seeds, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cmtssl
