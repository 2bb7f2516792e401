#include "cmtssl/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cmtssl/errors.hpp"

using nlohmann::json;

namespace cmtssl {

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  if (const char* env = std::getenv("CMTSSL_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') cfg.seed = static_cast<std::uint64_t>(v);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RunConfig cfg = defaults();
  cfg.merge_json_text(text);
  return cfg;
}

void RunConfig::merge_json_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (j.contains("schema_version")) schema_version = j["schema_version"].get<int>();
  if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) threads = j["threads"].get<int>();

  if (j.contains("data")) {
    const json& d = j["data"];
    if (d.contains("scenes")) scenes = d["scenes"].get<std::vector<std::string>>();
    if (d.contains("split")) split_config = d["split"].get<std::string>();
    if (d.contains("tile_size")) tile_size = d["tile_size"].get<int>();
    if (d.contains("pretrain_stride")) pretrain_stride = d["pretrain_stride"].get<int>();
  }
  if (j.contains("curriculum")) {
    const json& c = j["curriculum"];
    if (c.contains("enabled")) curriculum_enabled = c["enabled"].get<bool>();
    if (c.contains("S")) curriculum_s = c["S"].get<int>();
    if (c.contains("K")) curriculum_k = c["K"].get<int>();
    if (c.contains("F")) curriculum_f = c["F"].get<double>();
  }
  if (j.contains("jigsaw")) {
    const json& jg = j["jigsaw"];
    if (jg.contains("spatial") && jg["spatial"].contains("patch")) {
      const auto p = jg["spatial"]["patch"].get<std::vector<int>>();
      if (p.size() != 2) throw ConfigError("jigsaw.spatial.patch must have 2 entries");
      pretext.spatial.patch_h = p[0];
      pretext.spatial.patch_w = p[1];
    }
    if (jg.contains("spectral") && jg["spectral"].contains("blocks"))
      pretext.spectral.blocks = jg["spectral"]["blocks"].get<int>();
  }
  if (j.contains("mim")) {
    const json& m = j["mim"];
    if (m.contains("patch")) {
      const auto p = m["patch"].get<std::vector<int>>();
      if (p.size() != 3) throw ConfigError("mim.patch must have 3 entries (h, w, c; c=0 auto)");
      pretext.mim.patch_h = p[0];
      pretext.mim.patch_w = p[1];
      pretext.mim.patch_c = p[2];
    }
    if (m.contains("ratio")) pretext.mim.mask_ratio = m["ratio"].get<double>();
  }
  if (j.contains("loss_weights")) {
    const json& w = j["loss_weights"];
    if (w.contains("spa")) weights.spa = w["spa"].get<double>();
    if (w.contains("spe")) weights.spe = w["spe"].get<double>();
    if (w.contains("mim")) weights.mim = w["mim"].get<double>();
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (t.contains("lr")) lr = t["lr"].get<double>();
    if (t.contains("batch")) batch = t["batch"].get<int>();
    if (t.contains("weight_decay")) weight_decay = t["weight_decay"].get<double>();
    if (t.contains("strategy")) strategy = strategy_from_name(t["strategy"].get<std::string>());
    if (t.contains("step_budget")) step_budget = t["step_budget"].get<std::size_t>();
  }
  if (j.contains("finetune")) {
    const json& f = j["finetune"];
    if (f.contains("lr")) finetune.lr = f["lr"].get<double>();
    if (f.contains("batch")) finetune.batch = f["batch"].get<int>();
    if (f.contains("epochs")) finetune.epochs = f["epochs"].get<int>();
    if (f.contains("weight_decay")) finetune.weight_decay = f["weight_decay"].get<double>();
    if (f.contains("ignore_id")) finetune.ignore_id = f["ignore_id"].get<int>();
    if (f.contains("freeze_encoder")) finetune.freeze_encoder = f["freeze_encoder"].get<bool>();
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.contains("w0")) model_w0 = m["w0"].get<int>();
    if (m.contains("w1")) model_w1 = m["w1"].get<int>();
    if (m.contains("budget")) budget = m["budget"].get<std::size_t>();
    if (m.contains("seg_classes")) seg_classes = m["seg_classes"].get<int>();
  }
}

std::string RunConfig::to_json_text() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["threads"] = threads;
  j["data"] = {{"scenes", scenes},
               {"split", split_config},
               {"tile_size", tile_size},
               {"pretrain_stride", pretrain_stride}};
  j["curriculum"] = {{"enabled", curriculum_enabled},
                     {"S", curriculum_s},
                     {"K", curriculum_k},
                     {"F", curriculum_f}};
  j["jigsaw"] = {{"spatial", {{"patch", {pretext.spatial.patch_h, pretext.spatial.patch_w}}}},
                 {"spectral", {{"blocks", pretext.spectral.blocks}}}};
  j["mim"] = {{"patch", {pretext.mim.patch_h, pretext.mim.patch_w, pretext.mim.patch_c}},
              {"ratio", pretext.mim.mask_ratio}};
  j["loss_weights"] = {{"spa", weights.spa}, {"spe", weights.spe}, {"mim", weights.mim}};
  j["train"] = {{"lr", lr},
                {"batch", batch},
                {"weight_decay", weight_decay},
                {"strategy", strategy_name(strategy)},
                {"step_budget", step_budget}};
  j["finetune"] = {{"lr", finetune.lr},
                   {"batch", finetune.batch},
                   {"epochs", finetune.epochs},
                   {"weight_decay", finetune.weight_decay},
                   {"ignore_id", finetune.ignore_id},
                   {"freeze_encoder", finetune.freeze_encoder}};
  j["model"] = {{"w0", model_w0},
                {"w1", model_w1},
                {"budget", budget},
                {"seg_classes", seg_classes}};
  return j.dump(2);
}

void RunConfig::save_snapshot(const std::string& path) const {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config snapshot: " + path);
  out << to_json_text() << "\n";
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = lr;
  t.batch = batch;
  t.weight_decay = weight_decay;
  t.strategy = strategy;
  // curriculum.enabled = false downgrades cmtssl to plain multi-task SSL.
  if (t.strategy == Strategy::cmtssl && !curriculum_enabled) t.strategy = Strategy::mtssl;
  t.seed = seed;
  t.s = curriculum_s;
  t.k = curriculum_k;
  t.f = curriculum_f;
  t.step_budget = step_budget;
  return t;
}

}  // namespace cmtssl
