#include "cmtssl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cmtssl/difficulty.hpp"
#include "cmtssl/errors.hpp"
#include "cmtssl/threading.hpp"

using nlohmann::json;

namespace cmtssl {

namespace {

// Seed-stream tags keep the independent random streams from colliding.
constexpr std::uint64_t kStreamShuffle = 11;
constexpr std::uint64_t kStreamVisit = 12;
constexpr std::uint64_t kStreamValidation = 13;
constexpr std::uint64_t kStreamFinetune = 14;

LossWeights effective_weights(const LossWeights& w, Strategy strategy) {
  LossWeights out = w;
  switch (strategy) {
    case Strategy::mim:
      out.spa = 0.0;
      out.spe = 0.0;
      break;
    case Strategy::jps:
      out.mim = 0.0;
      break;
    case Strategy::mtssl:
    case Strategy::cmtssl:
      break;
    case Strategy::scratch:
      throw ConfigError("strategy 'scratch' has no pretraining phase");
  }
  if (out.spa <= 0.0 && out.spe <= 0.0 && out.mim <= 0.0)
    throw ConfigError("at least one loss weight must be positive");
  if (out.spa < 0.0 || out.spe < 0.0 || out.mim < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  return out;
}

struct ItemResult {
  nn::GradBuffer grads;
  double l_spa = 0.0, l_spe = 0.0, l_mim = 0.0;
};

// One cube visit: generate the active pretext tasks, forward through the
// shared encoder, backward on the weighted total.
void run_item(const MultiTaskModel& model, const Tensor& cube, const PretextConfigs& pcfg,
              const LossWeights& w, std::uint64_t visit_seed, ItemResult& out) {
  Rng rng(visit_seed);
  nn::Tape tape(model.params());
  std::vector<std::pair<nn::Tape::Var, double>> terms;
  nn::Tape::Var v_spa{}, v_spe{}, v_mim{};

  if (w.spa > 0.0) {
    const JigsawSample sample = spatial_jigsaw(cube, pcfg.spatial, rng);
    auto logits = model.forward_spatial(tape, sample.shuffled);
    v_spa = tape.bce_with_logits(logits, sample.target);
    terms.emplace_back(v_spa, w.spa);
  }
  if (w.spe > 0.0) {
    const JigsawSample sample = spectral_jigsaw(cube, pcfg.spectral, rng);
    auto logits = model.forward_spectral(tape, sample.shuffled);
    v_spe = tape.bce_with_logits(logits, sample.target);
    terms.emplace_back(v_spe, w.spe);
  }
  if (w.mim > 0.0) {
    const MaskedSample sample = mask_cube(cube, pcfg.mim, rng);
    auto recon = model.forward_mim(tape, sample.visible);
    v_mim = tape.masked_mae(recon, chw_from_hwc(sample.masked_values),
                            chw_from_hwc(sample.mask));
    terms.emplace_back(v_mim, w.mim);
  }

  auto total = tape.weighted_sum(terms);
  tape.backward(total);
  out.grads.resize_for(model.params());
  tape.export_grads(out.grads);
  out.l_spa = w.spa > 0.0 ? tape.scalar(v_spa) : 0.0;
  out.l_spe = w.spe > 0.0 ? tape.scalar(v_spe) : 0.0;
  out.l_mim = w.mim > 0.0 ? tape.scalar(v_mim) : 0.0;
}

// Forward-only task losses for one cube (validation / correlation paths).
void eval_item(const MultiTaskModel& model, const Tensor& cube, const PretextConfigs& pcfg,
               const LossWeights& w, std::uint64_t seed, double& l_spa, double& l_spe,
               double& l_mim) {
  Rng rng(seed);
  l_spa = l_spe = l_mim = 0.0;
  if (w.spa > 0.0) {
    const JigsawSample s = spatial_jigsaw(cube, pcfg.spatial, rng);
    nn::Tape tape(model.params());
    l_spa = tape.scalar(tape.bce_with_logits(model.forward_spatial(tape, s.shuffled), s.target));
  }
  if (w.spe > 0.0) {
    const JigsawSample s = spectral_jigsaw(cube, pcfg.spectral, rng);
    nn::Tape tape(model.params());
    l_spe = tape.scalar(tape.bce_with_logits(model.forward_spectral(tape, s.shuffled), s.target));
  }
  if (w.mim > 0.0) {
    const MaskedSample s = mask_cube(cube, pcfg.mim, rng);
    nn::Tape tape(model.params());
    l_mim = tape.scalar(tape.masked_mae(model.forward_mim(tape, s.visible),
                                        chw_from_hwc(s.masked_values), chw_from_hwc(s.mask)));
  }
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::scratch: return "scratch";
    case Strategy::mim: return "mim";
    case Strategy::jps: return "jps";
    case Strategy::mtssl: return "mtssl";
    case Strategy::cmtssl: return "cmtssl";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "scratch") return Strategy::scratch;
  if (name == "mim") return Strategy::mim;
  if (name == "jps") return Strategy::jps;
  if (name == "mtssl") return Strategy::mtssl;
  if (name == "cmtssl") return Strategy::cmtssl;
  throw ConfigError("unknown strategy: " + name);
}

void TrainLog::write_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write log: " + path);
  for (const StepRecord& r : steps) {
    json j = {{"kind", "step"},   {"stage", r.stage},   {"epoch", r.epoch},
              {"step", r.step},   {"l_spa", r.l_spa},   {"l_spe", r.l_spe},
              {"l_mim", r.l_mim}, {"l_total", r.l_total}};
    out << j.dump() << "\n";
  }
  for (const MetricRecord& m : metrics) {
    json j = {{"kind", "metric"}, {"stage", m.stage}, {"epoch", m.epoch},
              {"name", m.name},   {"value", m.value}};
    out << j.dump() << "\n";
  }
  json tail = {{"kind", "summary"}, {"wall_seconds", wall_seconds}};
  out << tail.dump() << "\n";
}

PretrainResult pretrain(MultiTaskModel& model, const std::vector<DataCube>& cubes,
                        const PretextConfigs& pretext, const LossWeights& weights,
                        const TrainConfig& cfg, const std::vector<DataCube>* validation,
                        const std::string& ckpt_dir) {
  if (cubes.empty()) throw DegenerateInputError("pretrain: empty dataset");
  if (cfg.batch < 1) throw ConfigError("mini-batch size must be >= 1");
  const LossWeights w = effective_weights(weights, cfg.strategy);
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t n = cubes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool curriculum = cfg.strategy == Strategy::cmtssl;
  if (curriculum) {
    const std::vector<double> scores = score_cubes(cubes, Aggregation::average);
    order = difficulty_order(scores);
  }

  std::vector<CurriculumBatch> schedule;
  if (curriculum) {
    schedule = build_schedule(n, cfg.s, cfg.k, cfg.f);
  } else {
    const std::size_t target =
        cfg.step_budget != 0
            ? cfg.step_budget
            : match_budget(build_schedule(n, cfg.s, cfg.k, cfg.f), cfg.batch);
    CurriculumBatch single;
    single.index = 1;
    single.prefix = n;
    single.epochs = epochs_for_budget(n, cfg.batch, target);
    schedule = {single};
  }

  nn::AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  PretrainResult result;
  TrainLog& log = result.log;
  std::size_t global_step = 0;

  const std::vector<int> encoder_ids = model.component_param_ids(Component::encoder);

  for (const CurriculumBatch& stage : schedule) {
    // Loss-balance diagnostic: per-loss encoder gradient norms at stage entry.
    {
      const GradNormReport norms = encoder_grad_norms(
          model, cubes, pretext, derive_seed(cfg.seed, kStreamVisit, 0, stage.index));
      if (w.spa > 0.0)
        log.metrics.push_back({stage.index, 0, "grad_norm_encoder_spa", norms.spa});
      if (w.spe > 0.0)
        log.metrics.push_back({stage.index, 0, "grad_norm_encoder_spe", norms.spe});
      if (w.mim > 0.0)
        log.metrics.push_back({stage.index, 0, "grad_norm_encoder_mim", norms.mim});
    }

    for (int epoch = 1; epoch <= stage.epochs; ++epoch) {
      std::vector<std::size_t> epoch_order(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(stage.prefix));
      {
        Rng shuffle_rng(derive_seed(cfg.seed, kStreamShuffle, stage.index, epoch));
        shuffle_rng.shuffle(epoch_order);
      }

      for (std::size_t start = 0; start < epoch_order.size();
           start += static_cast<std::size_t>(cfg.batch)) {
        const std::size_t count =
            std::min(static_cast<std::size_t>(cfg.batch), epoch_order.size() - start);
        std::vector<ItemResult> items(count);
        parallel_for(count, [&](std::size_t i) {
          const std::size_t cube_index = epoch_order[start + i];
          const std::uint64_t visit_seed = derive_seed(
              derive_seed(cfg.seed, kStreamVisit, stage.index, epoch), cube_index);
          run_item(model, cubes[cube_index].values, pretext, w, visit_seed, items[i]);
        });

        // Deterministic reduction: fixed item order regardless of thread count.
        nn::GradBuffer batch_grads;
        batch_grads.resize_for(model.params());
        double m_spa = 0.0, m_spe = 0.0, m_mim = 0.0;
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
          batch_grads.add_scaled(items[i].grads, inv);
          m_spa += items[i].l_spa * inv;
          m_spe += items[i].l_spe * inv;
          m_mim += items[i].l_mim * inv;
        }

        const double total = w.spa * m_spa + w.spe * m_spe + w.mim * m_mim;
        ++global_step;
        log.steps.push_back({stage.index, epoch, global_step, m_spa, m_spe, m_mim, total});

        if (!std::isfinite(total)) {
          result.aborted = true;
          result.abort_reason =
              "non-finite loss at stage " + std::to_string(stage.index) + " epoch " +
              std::to_string(epoch) + " step " + std::to_string(global_step) +
              (result.last_checkpoint.empty() ? "; no checkpoint written yet"
                                              : "; last good checkpoint: " + result.last_checkpoint);
          log.wall_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          return result;
        }

        opt.step(model.params(), batch_grads);
      }

      if (validation != nullptr && !validation->empty()) {
        double v_spa = 0.0, v_spe = 0.0, v_mim = 0.0;
        std::vector<std::array<double, 3>> per(validation->size());
        parallel_for(validation->size(), [&](std::size_t i) {
          eval_item(model, (*validation)[i].values, pretext, w,
                    derive_seed(cfg.seed, kStreamValidation, i), per[i][0], per[i][1],
                    per[i][2]);
        });
        for (const auto& p : per) {
          v_spa += p[0];
          v_spe += p[1];
          v_mim += p[2];
        }
        const double vn = static_cast<double>(validation->size());
        v_spa /= vn;
        v_spe /= vn;
        v_mim /= vn;
        const double v_total = w.spa * v_spa + w.spe * v_spe + w.mim * v_mim;
        if (w.spa > 0.0) log.metrics.push_back({stage.index, epoch, "val_l_spa", v_spa});
        if (w.spe > 0.0) log.metrics.push_back({stage.index, epoch, "val_l_spe", v_spe});
        if (w.mim > 0.0) log.metrics.push_back({stage.index, epoch, "val_l_mim", v_mim});
        log.metrics.push_back({stage.index, epoch, "val_l_total", v_total});
      }
    }

    if (!ckpt_dir.empty()) {
      std::filesystem::create_directories(ckpt_dir);
      const std::string path =
          (std::filesystem::path(ckpt_dir) / ("stage-" + std::to_string(stage.index))).string();
      model.save_checkpoint(path);
      result.last_checkpoint = path;
    }
  }

  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainLog finetune(MultiTaskModel& model, const std::vector<DataCube>& labeled,
                  const FinetuneConfig& cfg, const std::vector<DataCube>* validation) {
  if (labeled.empty()) throw DegenerateInputError("finetune: empty dataset");
  if (model.heads_spec().seg_classes < 2)
    throw ConfigError("finetune requires a model with a segmentation head");

  // Every cube must carry labels, and at least one pixel must be trainable.
  bool any_trainable = false;
  for (const DataCube& c : labeled) {
    if (!c.has_labels()) throw DataError("finetune: cube without labels: " + c.id());
    for (int label : c.labels)
      if (label != cfg.ignore_id) {
        any_trainable = true;
        break;
      }
    if (any_trainable) break;
  }
  if (!any_trainable) throw DataError("finetune: all pixels are unlabeled/ignored");

  const auto t0 = std::chrono::steady_clock::now();
  nn::AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  TrainLog log;
  std::size_t global_step = 0;

  std::vector<char> trainable(static_cast<std::size_t>(model.params().count()), 1);
  if (cfg.freeze_encoder) {
    for (int id = 0; id < model.params().count(); ++id)
      trainable[static_cast<std::size_t>(id)] =
          model.component_of(id) == Component::head_seg ? 1 : 0;
  }

  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> epoch_order = order;
    {
      Rng rng(derive_seed(cfg.seed, kStreamFinetune, static_cast<std::uint64_t>(epoch)));
      rng.shuffle(epoch_order);
    }
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;

    for (std::size_t start = 0; start < epoch_order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch), epoch_order.size() - start);
      struct Item {
        nn::GradBuffer grads;
        double loss = 0.0;
      };
      std::vector<Item> items(count);
      parallel_for(count, [&](std::size_t i) {
        const DataCube& cube = labeled[epoch_order[start + i]];
        nn::Tape tape(model.params());
        auto logits = model.forward_segmentation(tape, cube.values);
        auto loss = tape.softmax_xent_pixels(logits, cube.labels, cfg.ignore_id);
        tape.backward(loss);
        items[i].grads.resize_for(model.params());
        tape.export_grads(items[i].grads);
        items[i].loss = tape.scalar(loss);
      });

      nn::GradBuffer batch_grads;
      batch_grads.resize_for(model.params());
      double mean_loss = 0.0;
      const double inv = 1.0 / static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch_grads.add_scaled(items[i].grads, inv);
        mean_loss += items[i].loss * inv;
      }
      for (std::size_t id = 0; id < trainable.size(); ++id)
        if (!trainable[id]) batch_grads.touched[id] = 0;

      ++global_step;
      log.steps.push_back({1, epoch, global_step, 0.0, 0.0, 0.0, mean_loss});
      if (!std::isfinite(mean_loss))
        throw DataError("finetune diverged: non-finite loss at step " +
                        std::to_string(global_step));
      opt.step(model.params(), batch_grads);
      epoch_loss += mean_loss;
      ++epoch_batches;
    }

    log.metrics.push_back(
        {1, epoch, "train_ce", epoch_loss / static_cast<double>(epoch_batches)});

    if (validation != nullptr && !validation->empty()) {
      std::size_t correct = 0, total = 0;
      for (const DataCube& cube : *validation) {
        if (!cube.has_labels()) continue;
        const std::vector<int> pred = model.predict_labels(cube.values);
        for (std::size_t p = 0; p < pred.size(); ++p) {
          if (cube.labels[p] == cfg.ignore_id) continue;
          ++total;
          if (pred[p] == cube.labels[p]) ++correct;
        }
      }
      if (total > 0)
        log.metrics.push_back({1, epoch, "val_oa",
                               static_cast<double>(correct) / static_cast<double>(total)});
    }
  }

  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

std::vector<TaskLossRow> per_cube_task_losses(const MultiTaskModel& model,
                                              const std::vector<DataCube>& cubes,
                                              const PretextConfigs& pretext,
                                              std::uint64_t seed) {
  std::vector<TaskLossRow> rows(cubes.size());
  LossWeights all{1.0, 1.0, 1.0};
  parallel_for(cubes.size(), [&](std::size_t i) {
    double l_spa = 0.0, l_spe = 0.0, l_mim = 0.0;
    eval_item(model, cubes[i].values, pretext, all, derive_seed(seed, i), l_spa, l_spe,
              l_mim);
    rows[i].cube_id = cubes[i].id();
    rows[i].mim = l_mim;
    rows[i].jps = 0.5 * (l_spa + l_spe);
  });
  return rows;
}

GradNormReport encoder_grad_norms(const MultiTaskModel& model,
                                  const std::vector<DataCube>& cubes,
                                  const PretextConfigs& pretext, std::uint64_t seed,
                                  std::size_t sample_limit) {
  const std::size_t n = std::min(sample_limit, cubes.size());
  if (n == 0) throw DegenerateInputError("encoder_grad_norms: empty sample");
  const std::vector<int> encoder_ids = model.component_param_ids(Component::encoder);

  struct Norms {
    double spa = 0.0, spe = 0.0, mim = 0.0;
  };
  std::vector<Norms> per(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const Tensor& cube = cubes[i].values;
    {
      const JigsawSample s = spatial_jigsaw(cube, pretext.spatial, rng);
      nn::Tape tape(model.params());
      auto loss = tape.bce_with_logits(model.forward_spatial(tape, s.shuffled), s.target);
      tape.backward(loss);
      nn::GradBuffer g;
      g.resize_for(model.params());
      tape.export_grads(g);
      per[i].spa = g.l2_norm_over(encoder_ids);
    }
    {
      const JigsawSample s = spectral_jigsaw(cube, pretext.spectral, rng);
      nn::Tape tape(model.params());
      auto loss = tape.bce_with_logits(model.forward_spectral(tape, s.shuffled), s.target);
      tape.backward(loss);
      nn::GradBuffer g;
      g.resize_for(model.params());
      tape.export_grads(g);
      per[i].spe = g.l2_norm_over(encoder_ids);
    }
    {
      const MaskedSample s = mask_cube(cube, pretext.mim, rng);
      nn::Tape tape(model.params());
      auto loss = tape.masked_mae(model.forward_mim(tape, s.visible),
                                  chw_from_hwc(s.masked_values), chw_from_hwc(s.mask));
      tape.backward(loss);
      nn::GradBuffer g;
      g.resize_for(model.params());
      tape.export_grads(g);
      per[i].mim = g.l2_norm_over(encoder_ids);
    }
  });

  GradNormReport report;
  for (const Norms& p : per) {
    report.spa += p.spa;
    report.spe += p.spe;
    report.mim += p.mim;
  }
  report.spa /= static_cast<double>(n);
  report.spe /= static_cast<double>(n);
  report.mim /= static_cast<double>(n);
  return report;
}

}  // namespace cmtssl
