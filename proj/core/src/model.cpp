#include "cmtssl/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cmtssl/errors.hpp"

using nlohmann::json;

namespace cmtssl {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'T', 'S', 'S', 'L', 'C', 'K'};
constexpr std::uint32_t kSchemaVersion = 1;

struct LayerDef {
  const char* name;
  // conv: {cout, cin, kh, kw}; linear: {out, in}; bias derived from the first dim.
  std::vector<int> weight_shape;
};

}  // namespace

const char* component_name(Component c) {
  switch (c) {
    case Component::encoder: return "encoder";
    case Component::head_spa: return "head.spa";
    case Component::head_spe: return "head.spe";
    case Component::head_mim: return "head.mim";
    case Component::head_seg: return "head.seg";
  }
  return "?";
}

MultiTaskModel::MultiTaskModel(EncoderSpec enc, HeadsSpec heads, std::uint64_t seed)
    : enc_(enc), heads_(heads), seed_(seed) {
  if (enc_.in_c < 2) throw ConfigError("encoder needs in_c >= 2");
  if (enc_.in_h % 4 != 0 || enc_.in_w % 4 != 0)
    throw ConfigError("encoder input dims must be divisible by 4");
  if (heads_.n_spa < 1 || heads_.n_spe < 1)
    throw ConfigError("jigsaw head sizes must be >= 1");
  if (heads_.seg_classes == 1)
    throw ConfigError("segmentation head needs at least 2 classes");

  const int c = enc_.in_c, w0 = enc_.w0, w1 = enc_.w1;

  auto add_conv = [&](const std::string& name, int cout, int cin, int k, Rng& rng) {
    const int wid = params_.add(name + ".w", {cout, cin, k, k});
    const int bid = params_.add(name + ".b", {cout});
    const int fan_in = cin * k * k;
    nn::init_fan_in_uniform(params_.at(wid).value, fan_in, rng);
    nn::init_fan_in_uniform(params_.at(bid).value, fan_in, rng);
  };
  auto add_linear = [&](const std::string& name, int out, int in, Rng& rng) {
    const int wid = params_.add(name + ".w", {out, in});
    const int bid = params_.add(name + ".b", {out});
    nn::init_fan_in_uniform(params_.at(wid).value, in, rng);
    nn::init_fan_in_uniform(params_.at(bid).value, in, rng);
  };

  // Each component draws from its own seed stream so loading one component
  // never disturbs another's initialization.
  {
    Rng rng(derive_seed(seed_, 0));
    add_conv("encoder.proj", w0, c, 1, rng);
    add_conv("encoder.enc1", w0, w0, 3, rng);
    add_conv("encoder.enc2", w1, w0, 3, rng);
    add_conv("encoder.mid", w1, w1, 3, rng);
    add_conv("encoder.dec1", w0, w1 + w1, 3, rng);
    add_conv("encoder.dec2", w0, w0 + w0, 3, rng);
  }
  {
    Rng rng(derive_seed(seed_, 1));
    add_linear("head.spa.fc1", heads_.jigsaw_hidden, w0, rng);
    add_linear("head.spa.fc2", heads_.n_spa * heads_.n_spa, heads_.jigsaw_hidden, rng);
  }
  {
    Rng rng(derive_seed(seed_, 2));
    add_linear("head.spe.fc1", heads_.jigsaw_hidden, w0, rng);
    add_linear("head.spe.fc2", heads_.n_spe * heads_.n_spe, heads_.jigsaw_hidden, rng);
  }
  {
    Rng rng(derive_seed(seed_, 3));
    add_conv("head.mim.conv1", heads_.mim_hidden, w0, 3, rng);
    add_conv("head.mim.out", c, heads_.mim_hidden, 1, rng);
  }
  if (heads_.seg_classes >= 2) {
    Rng rng(derive_seed(seed_, 4));
    add_conv("head.seg.conv", heads_.seg_classes, w0, 3, rng);
  }

  if (parameter_count() > enc_.budget)
    throw ConfigError("model exceeds the parameter budget (" +
                      std::to_string(parameter_count()) + " > " +
                      std::to_string(enc_.budget) + ")");
}

nn::Tape::Var MultiTaskModel::pv(nn::Tape& tape, const char* name) const {
  const int id = params_.find(name);
  if (id < 0) throw ConfigError(std::string("unknown parameter: ") + name);
  return tape.param(id);
}

void MultiTaskModel::check_input(const Tensor& cube) const {
  if (cube.rank() != 3 || cube.dim(0) != enc_.in_h || cube.dim(1) != enc_.in_w ||
      cube.dim(2) != enc_.in_c)
    throw ShapeError("model input must be {" + std::to_string(enc_.in_h) + "," +
                     std::to_string(enc_.in_w) + "," + std::to_string(enc_.in_c) + "}");
}

nn::Tape::Var MultiTaskModel::encode(nn::Tape& t, const Tensor& cube) const {
  check_input(cube);
  auto x = t.input(chw_from_hwc(cube));
  auto p = t.relu(t.conv2d(x, pv(t, "encoder.proj.w"), pv(t, "encoder.proj.b")));
  auto e1 = t.relu(t.conv2d(p, pv(t, "encoder.enc1.w"), pv(t, "encoder.enc1.b")));
  auto d1 = t.maxpool2(e1);
  auto e2 = t.relu(t.conv2d(d1, pv(t, "encoder.enc2.w"), pv(t, "encoder.enc2.b")));
  auto d2 = t.maxpool2(e2);
  auto mid = t.relu(t.conv2d(d2, pv(t, "encoder.mid.w"), pv(t, "encoder.mid.b")));
  auto u1 = t.concat_c(t.upsample2(mid), e2);
  auto dec1 = t.relu(t.conv2d(u1, pv(t, "encoder.dec1.w"), pv(t, "encoder.dec1.b")));
  auto u2 = t.concat_c(t.upsample2(dec1), e1);
  return t.relu(t.conv2d(u2, pv(t, "encoder.dec2.w"), pv(t, "encoder.dec2.b")));
}

nn::Tape::Var MultiTaskModel::jigsaw_head(nn::Tape& t, nn::Tape::Var pooled,
                                          const char* prefix) const {
  const std::string p(prefix);
  auto h = t.relu(t.linear(pooled, pv(t, (p + ".fc1.w").c_str()), pv(t, (p + ".fc1.b").c_str())));
  return t.linear(h, pv(t, (p + ".fc2.w").c_str()), pv(t, (p + ".fc2.b").c_str()));
}

nn::Tape::Var MultiTaskModel::forward_spatial(nn::Tape& t, const Tensor& cube) const {
  return jigsaw_head(t, t.gap(encode(t, cube)), "head.spa");
}

nn::Tape::Var MultiTaskModel::forward_spectral(nn::Tape& t, const Tensor& cube) const {
  return jigsaw_head(t, t.gap(encode(t, cube)), "head.spe");
}

nn::Tape::Var MultiTaskModel::forward_mim(nn::Tape& t, const Tensor& visible) const {
  auto feat = encode(t, visible);
  auto h = t.relu(t.conv2d(feat, pv(t, "head.mim.conv1.w"), pv(t, "head.mim.conv1.b")));
  return t.conv2d(h, pv(t, "head.mim.out.w"), pv(t, "head.mim.out.b"));
}

nn::Tape::Var MultiTaskModel::forward_segmentation(nn::Tape& t, const Tensor& cube) const {
  if (heads_.seg_classes < 2)
    throw ConfigError("model was built without a segmentation head");
  auto feat = encode(t, cube);
  return t.conv2d(feat, pv(t, "head.seg.conv.w"), pv(t, "head.seg.conv.b"));
}

std::vector<double> MultiTaskModel::predict_spatial_logits(const Tensor& cube) const {
  nn::Tape t(params_);
  return t.value(forward_spatial(t, cube)).to_vector();
}

std::vector<double> MultiTaskModel::predict_spectral_logits(const Tensor& cube) const {
  nn::Tape t(params_);
  return t.value(forward_spectral(t, cube)).to_vector();
}

Tensor MultiTaskModel::predict_mim(const Tensor& visible) const {
  nn::Tape t(params_);
  return hwc_from_chw(t.value(forward_mim(t, visible)));
}

Tensor MultiTaskModel::predict_seg_logits(const Tensor& cube) const {
  nn::Tape t(params_);
  return t.value(forward_segmentation(t, cube));
}

std::vector<int> MultiTaskModel::predict_labels(const Tensor& cube) const {
  const Tensor logits = predict_seg_logits(cube);
  const int nc = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  std::vector<int> labels(static_cast<std::size_t>(h) * w);
  const double* ld = logits.data();
  for (int p = 0; p < h * w; ++p) {
    int best = 0;
    double bv = ld[p];
    for (int c = 1; c < nc; ++c) {
      const double v = ld[static_cast<std::size_t>(c) * h * w + p];
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    labels[static_cast<std::size_t>(p)] = best;
  }
  return labels;
}

std::size_t MultiTaskModel::parameter_count() const { return params_.total_elements(); }

Component MultiTaskModel::component_of(int param_id) const {
  const std::string& name = params_.at(param_id).name;
  if (name.starts_with("encoder.")) return Component::encoder;
  if (name.starts_with("head.spa.")) return Component::head_spa;
  if (name.starts_with("head.spe.")) return Component::head_spe;
  if (name.starts_with("head.mim.")) return Component::head_mim;
  return Component::head_seg;
}

std::size_t MultiTaskModel::parameter_count(Component c) const {
  std::size_t n = 0;
  for (int id = 0; id < params_.count(); ++id)
    if (component_of(id) == c) n += params_.at(id).value.size();
  return n;
}

std::vector<int> MultiTaskModel::component_param_ids(Component c) const {
  std::vector<int> ids;
  for (int id = 0; id < params_.count(); ++id)
    if (component_of(id) == c) ids.push_back(id);
  return ids;
}

void MultiTaskModel::copy_encoder_from(const MultiTaskModel& other) {
  for (int id : component_param_ids(Component::encoder)) {
    const std::string& name = params_.at(id).name;
    const int src = other.params_.find(name);
    if (src < 0 || !other.params_.at(src).value.same_shape(params_.at(id).value))
      throw ShapeError("encoder geometry mismatch when copying weights");
    params_.at(id).value = other.params_.at(src).value;
    params_.at(id).m = Tensor(params_.at(id).value.shape());
    params_.at(id).v = Tensor(params_.at(id).value.shape());
    params_.at(id).steps = 0;
  }
}

void MultiTaskModel::save_checkpoint(const std::string& path,
                                     const std::string& config_snapshot_json) const {
  json header;
  header["schema_version"] = kSchemaVersion;
  header["seed"] = seed_;
  header["encoder"] = {{"in_h", enc_.in_h}, {"in_w", enc_.in_w}, {"in_c", enc_.in_c},
                       {"w0", enc_.w0},     {"w1", enc_.w1},     {"budget", enc_.budget}};
  header["heads"] = {{"n_spa", heads_.n_spa},
                     {"n_spe", heads_.n_spe},
                     {"jigsaw_hidden", heads_.jigsaw_hidden},
                     {"mim_hidden", heads_.mim_hidden},
                     {"seg_classes", heads_.seg_classes}};
  header["config"] = json::parse(config_snapshot_json.empty() ? "{}" : config_snapshot_json);
  header["tensors"] = json::array();
  std::size_t offset = 0;
  for (int id = 0; id < params_.count(); ++id) {
    const nn::Parameter& p = params_.at(id);
    header["tensors"].push_back(
        {{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += p.value.size();
  }

  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  const std::string meta = header.dump();
  const std::uint64_t meta_len = meta.size();
  out.write(kMagic, sizeof(kMagic));
  std::uint32_t version = kSchemaVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (int id = 0; id < params_.count(); ++id) {
    const Tensor& v = params_.at(id).value;
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
}

MultiTaskModel MultiTaskModel::load_checkpoint(const std::string& path,
                                               std::string* config_snapshot) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kSchemaVersion)
    throw FormatError("unsupported checkpoint schema version in " + path);
  std::uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw FormatError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(meta);
  } catch (const json::exception& e) {
    throw FormatError("corrupt checkpoint header: " + std::string(e.what()));
  }

  EncoderSpec enc;
  enc.in_h = header["encoder"]["in_h"].get<int>();
  enc.in_w = header["encoder"]["in_w"].get<int>();
  enc.in_c = header["encoder"]["in_c"].get<int>();
  enc.w0 = header["encoder"]["w0"].get<int>();
  enc.w1 = header["encoder"]["w1"].get<int>();
  enc.budget = header["encoder"]["budget"].get<std::size_t>();
  HeadsSpec heads;
  heads.n_spa = header["heads"]["n_spa"].get<int>();
  heads.n_spe = header["heads"]["n_spe"].get<int>();
  heads.jigsaw_hidden = header["heads"]["jigsaw_hidden"].get<int>();
  heads.mim_hidden = header["heads"]["mim_hidden"].get<int>();
  heads.seg_classes = header["heads"]["seg_classes"].get<int>();

  MultiTaskModel model(enc, heads, header["seed"].get<std::uint64_t>());
  if (config_snapshot) *config_snapshot = header["config"].dump();

  for (const auto& entry : header["tensors"]) {
    const std::string name = entry["name"].get<std::string>();
    const int id = model.params_.find(name);
    if (id < 0) throw FormatError("checkpoint tensor has no matching parameter: " + name);
    Tensor& dst = model.params_.at(id).value;
    const auto shape = entry["shape"].get<std::vector<int>>();
    if (shape != dst.shape())
      throw FormatError("checkpoint tensor shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(dst.size() * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint payload: " + path);
  }
  return model;
}

}  // namespace cmtssl
