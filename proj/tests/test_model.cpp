#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cmtssl/errors.hpp"
#include "cmtssl/losses.hpp"
#include "cmtssl/model.hpp"
#include "cmtssl/pretext.hpp"
#include "cmtssl/rng.hpp"

using namespace cmtssl;

namespace {

Tensor random_cube(int h, int w, int c, std::uint64_t seed) {
  Tensor cube({h, w, c});
  Rng rng(seed);
  for (std::size_t i = 0; i < cube.size(); ++i) cube[i] = rng.normal(0.0, 1.0);
  return cube;
}

MultiTaskModel small_model(std::uint64_t seed, int bands = 8, int seg_classes = 3) {
  EncoderSpec enc;
  enc.in_h = 16;
  enc.in_w = 16;
  enc.in_c = bands;
  enc.w0 = 6;
  enc.w1 = 8;
  HeadsSpec heads;
  heads.seg_classes = seg_classes;
  return MultiTaskModel(enc, heads, seed);
}

}  // namespace

TEST_CASE("default encoder with all heads on 103 bands fits the 25K budget") {
  EncoderSpec enc;
  enc.in_c = 103;  // Pavia University band count regime
  HeadsSpec heads;
  heads.seg_classes = 9;
  const MultiTaskModel model(enc, heads, 1);
  CHECK(model.parameter_count() <= 25000);
  CHECK(model.parameter_count() ==
        model.parameter_count(Component::encoder) + model.parameter_count(Component::head_spa) +
            model.parameter_count(Component::head_spe) +
            model.parameter_count(Component::head_mim) +
            model.parameter_count(Component::head_seg));
}

TEST_CASE("120-band build with a 3-class head also fits the budget") {
  EncoderSpec enc;
  enc.in_c = 120;
  HeadsSpec heads;
  heads.seg_classes = 3;
  const MultiTaskModel model(enc, heads, 1);
  CHECK(model.parameter_count() <= 25000);
}

TEST_CASE("a too-small budget is a configuration error") {
  EncoderSpec enc;
  enc.in_c = 103;
  enc.budget = 1000;
  CHECK_THROWS_AS(MultiTaskModel(enc, HeadsSpec{}, 1), ConfigError);
}

TEST_CASE("two builds with the same seed are bit-identical") {
  const MultiTaskModel a = small_model(7);
  const MultiTaskModel b = small_model(7);
  REQUIRE(a.params().count() == b.params().count());
  for (int id = 0; id < a.params().count(); ++id) {
    const Tensor& va = a.params().at(id).value;
    const Tensor& vb = b.params().at(id).value;
    REQUIRE(va.size() == vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) REQUIRE(va[i] == vb[i]);
  }
}

TEST_CASE("jigsaw head for N=4 emits 16 logits; batch of cubes gives one vector each") {
  const MultiTaskModel model = small_model(3);
  for (int b = 0; b < 4; ++b) {
    const auto logits = model.predict_spatial_logits(random_cube(16, 16, 8, 50 + b));
    CHECK(logits.size() == 16);
    for (double v : logits) CHECK(std::isfinite(v));
  }
}

TEST_CASE("zero-initialized final jigsaw layer gives logits 0, sigmoid 0.5") {
  MultiTaskModel model = small_model(4);
  model.params().at(model.params().find("head.spa.fc2.w")).value.fill(0.0);
  model.params().at(model.params().find("head.spa.fc2.b")).value.fill(0.0);
  const auto logits = model.predict_spatial_logits(random_cube(16, 16, 8, 60));
  for (double v : logits) {
    CHECK(v == 0.0);
    CHECK(sigmoid(v) == 0.5);
  }
}

TEST_CASE("mim reconstruction has the input shape") {
  const MultiTaskModel model = small_model(5);
  const Tensor cube = random_cube(16, 16, 8, 70);
  const Tensor recon = model.predict_mim(cube);
  CHECK(recon.shape() == cube.shape());
}

TEST_CASE("gradient routing: L_mim reaches gamma and theta but not phi or beta") {
  const MultiTaskModel model = small_model(6);
  const Tensor cube = random_cube(16, 16, 8, 80);
  Rng rng(81);
  const MaskedSample sample = mask_cube(cube, MaskingConfig{}, rng);

  nn::Tape tape(model.params());
  auto recon = model.forward_mim(tape, sample.visible);
  auto loss = tape.masked_mae(recon, chw_from_hwc(sample.masked_values),
                              chw_from_hwc(sample.mask));
  tape.backward(loss);
  nn::GradBuffer grads;
  grads.resize_for(model.params());
  tape.export_grads(grads);

  CHECK(grads.l2_norm_over(model.component_param_ids(Component::encoder)) > 0.0);
  CHECK(grads.l2_norm_over(model.component_param_ids(Component::head_mim)) > 0.0);
  for (int id : model.component_param_ids(Component::head_spa))
    CHECK_FALSE(grads.touched[static_cast<std::size_t>(id)]);
  for (int id : model.component_param_ids(Component::head_spe))
    CHECK_FALSE(grads.touched[static_cast<std::size_t>(id)]);
  for (int id : model.component_param_ids(Component::head_seg))
    CHECK_FALSE(grads.touched[static_cast<std::size_t>(id)]);
}

TEST_CASE("finite-difference probes agree with analytic gradients per component") {
  MultiTaskModel model = small_model(8);
  const Tensor cube = random_cube(16, 16, 8, 90);
  Rng rng(91);
  const JigsawSample sample = spatial_jigsaw(cube, SpatialJigsawConfig{}, rng);

  auto loss_value = [&] {
    nn::Tape tape(model.params());
    return tape.scalar(
        tape.bce_with_logits(model.forward_spatial(tape, sample.shuffled), sample.target));
  };

  nn::Tape tape(model.params());
  auto loss = tape.bce_with_logits(model.forward_spatial(tape, sample.shuffled), sample.target);
  tape.backward(loss);
  nn::GradBuffer grads;
  grads.resize_for(model.params());
  tape.export_grads(grads);

  Rng pick(92);
  for (Component comp : {Component::encoder, Component::head_spa}) {
    const auto ids = model.component_param_ids(comp);
    for (int probe = 0; probe < 5; ++probe) {
      const int id = ids[pick.below(ids.size())];
      Tensor& value = model.params().at(id).value;
      const std::size_t elem = pick.below(value.size());
      const double keep = value[elem];
      const double h = 1e-6;
      value[elem] = keep + h;
      const double up = loss_value();
      value[elem] = keep - h;
      const double down = loss_value();
      value[elem] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads.grads[static_cast<std::size_t>(id)][elem];
      const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-10});
      CHECK(std::fabs(numeric - analytic) / denom < 1e-3);
    }
  }
}

TEST_CASE("segmentation: uniform logits give per-class softmax 1/num_classes") {
  MultiTaskModel model = small_model(10, 8, 3);
  model.params().at(model.params().find("head.seg.conv.w")).value.fill(0.0);
  model.params().at(model.params().find("head.seg.conv.b")).value.fill(0.0);
  const Tensor logits = model.predict_seg_logits(random_cube(16, 16, 8, 95));
  const int nc = logits.dim(0);
  for (int p = 0; p < 16 * 16; ++p) {
    double z = 0.0;
    for (int c = 0; c < nc; ++c) z += std::exp(logits[static_cast<std::size_t>(c) * 256 + p]);
    for (int c = 0; c < nc; ++c) {
      const double prob = std::exp(logits[static_cast<std::size_t>(c) * 256 + p]) / z;
      CHECK(prob == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("single-class segmentation head is a configuration error") {
  EncoderSpec enc;
  enc.in_c = 8;
  enc.w0 = 6;
  enc.w1 = 8;
  HeadsSpec heads;
  heads.seg_classes = 1;
  CHECK_THROWS_AS(MultiTaskModel(enc, heads, 1), ConfigError);
}

TEST_CASE("forward_segmentation without a head is a configuration error") {
  const MultiTaskModel model = small_model(11, 8, 0);
  nn::Tape tape(model.params());
  CHECK_THROWS_AS(model.forward_segmentation(tape, random_cube(16, 16, 8, 96)), ConfigError);
}

TEST_CASE("wrong input shape is a shape error") {
  const MultiTaskModel model = small_model(12);
  nn::Tape tape(model.params());
  CHECK_THROWS_AS(model.encode(tape, random_cube(16, 16, 9, 97)), ShapeError);
  CHECK_THROWS_AS(model.encode(tape, random_cube(8, 16, 8, 98)), ShapeError);
}

TEST_CASE("checkpoint round-trips parameters and config snapshot bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "cmtssl_model_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  const MultiTaskModel model = small_model(13);
  model.save_checkpoint(path, "{\"note\":42}");

  std::string snapshot;
  const MultiTaskModel loaded = MultiTaskModel::load_checkpoint(path, &snapshot);
  CHECK(snapshot.find("42") != std::string::npos);
  REQUIRE(loaded.params().count() == model.params().count());
  for (int id = 0; id < model.params().count(); ++id) {
    const Tensor& a = model.params().at(id).value;
    const Tensor& b = loaded.params().at(id).value;
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }
}

TEST_CASE("copy_encoder_from moves encoder values and leaves heads alone") {
  MultiTaskModel target = small_model(14);
  const MultiTaskModel source = small_model(15);

  // Heads before the copy.
  const int spa_id = target.params().find("head.spa.fc1.w");
  const Tensor spa_before = target.params().at(spa_id).value;

  target.copy_encoder_from(source);
  for (int id : target.component_param_ids(Component::encoder)) {
    const std::string& name = target.params().at(id).name;
    const int src = source.params().find(name);
    const Tensor& a = target.params().at(id).value;
    const Tensor& b = source.params().at(src).value;
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }
  const Tensor& spa_after = target.params().at(spa_id).value;
  for (std::size_t i = 0; i < spa_before.size(); ++i)
    REQUIRE(spa_after[i] == spa_before[i]);
}

TEST_CASE("encoder geometry mismatch on copy is a shape error") {
  MultiTaskModel target = small_model(16, 8);
  const MultiTaskModel source = small_model(17, 12);  // different band count
  CHECK_THROWS_AS(target.copy_encoder_from(source), ShapeError);
}
