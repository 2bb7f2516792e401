#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "cmtssl/errors.hpp"
#include "cmtssl/losses.hpp"
#include "cmtssl/nn.hpp"
#include "cmtssl/rng.hpp"

using namespace cmtssl;
using nn::GradBuffer;
using nn::ParamStore;
using nn::Tape;

namespace {

void randomize(Tensor& t, Rng& rng, double scale = 0.5) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, scale);
}

// Central-difference check of dL/dp for every element of every parameter.
// `loss` must rebuild the graph from the store's current values.
void check_gradients(ParamStore& store, const std::function<double()>& loss,
                     const GradBuffer& analytic, double h = 1e-6, double tol = 1e-5) {
  for (int id = 0; id < store.count(); ++id) {
    REQUIRE(analytic.touched[static_cast<std::size_t>(id)]);
    Tensor& value = store.at(id).value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + h;
      const double up = loss();
      value[i] = keep - h;
      const double down = loss();
      value[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic.grads[static_cast<std::size_t>(id)][i];
      const double denom = std::max({std::fabs(numeric), std::fabs(exact), 1e-8});
      REQUIRE(std::fabs(numeric - exact) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("composite conv/pool/upsample/concat/gap/linear graph matches finite differences") {
  ParamStore store;
  Rng rng(5);
  const int c_in = 3, h = 8, w = 8, c_mid = 4;
  const int conv1_w = store.add("conv1.w", {c_mid, c_in, 3, 3});
  const int conv1_b = store.add("conv1.b", {c_mid});
  const int conv2_w = store.add("conv2.w", {c_mid, c_mid, 1, 1});
  const int conv2_b = store.add("conv2.b", {c_mid});
  const int fc_w = store.add("fc.w", {1, 2 * c_mid});
  const int fc_b = store.add("fc.b", {1});
  for (int id = 0; id < store.count(); ++id) randomize(store.at(id).value, rng);

  Tensor input({c_in, h, w});
  randomize(input, rng, 1.0);
  const std::vector<double> target = {1.0};

  auto build = [&](Tape& tape) {
    auto x = tape.input(input);
    auto a = tape.relu(tape.conv2d(x, tape.param(conv1_w), tape.param(conv1_b)));
    auto p = tape.maxpool2(a);
    auto b = tape.relu(tape.conv2d(p, tape.param(conv2_w), tape.param(conv2_b)));
    auto u = tape.upsample2(b);
    auto cat = tape.concat_c(u, a);
    auto g = tape.gap(cat);
    auto logits = tape.linear(g, tape.param(fc_w), tape.param(fc_b));
    return tape.bce_with_logits(logits, target);
  };

  Tape tape(store);
  auto loss_var = build(tape);
  tape.backward(loss_var);
  GradBuffer grads;
  grads.resize_for(store);
  tape.export_grads(grads);

  check_gradients(store, [&] {
    Tape t(store);
    return t.scalar(build(t));
  }, grads);
}

TEST_CASE("masked MAE gradients match finite differences") {
  ParamStore store;
  Rng rng(9);
  const int wid = store.add("w", {2, 2, 3, 3});
  const int bid = store.add("b", {2});
  randomize(store.at(wid).value, rng);
  randomize(store.at(bid).value, rng);

  Tensor input({2, 6, 6});
  randomize(input, rng, 1.0);
  Tensor original({2, 6, 6});
  randomize(original, rng, 1.0);
  Tensor mask({2, 6, 6});
  Rng mask_rng(10);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask_rng.uniform() < 0.5 ? 1.0 : 0.0;
  mask[0] = 1.0;  // nonempty

  auto build = [&](Tape& tape) {
    auto x = tape.input(input);
    auto pred = tape.conv2d(x, tape.param(wid), tape.param(bid));
    return tape.masked_mae(pred, original, mask);
  };

  Tape tape(store);
  auto loss_var = build(tape);
  tape.backward(loss_var);
  GradBuffer grads;
  grads.resize_for(store);
  tape.export_grads(grads);

  check_gradients(store, [&] {
    Tape t(store);
    return t.scalar(build(t));
  }, grads);
}

TEST_CASE("per-pixel softmax cross-entropy gradients match finite differences") {
  ParamStore store;
  Rng rng(13);
  const int wid = store.add("w", {3, 2, 1, 1});
  const int bid = store.add("b", {3});
  randomize(store.at(wid).value, rng);
  randomize(store.at(bid).value, rng);

  Tensor input({2, 4, 4});
  randomize(input, rng, 1.0);
  std::vector<int> labels(16);
  Rng label_rng(14);
  for (auto& l : labels) l = static_cast<int>(label_rng.below(4)) - 1;  // -1 = ignored

  auto build = [&](Tape& tape) {
    auto x = tape.input(input);
    auto logits = tape.conv2d(x, tape.param(wid), tape.param(bid));
    return tape.softmax_xent_pixels(logits, labels, -1);
  };

  Tape tape(store);
  auto loss_var = build(tape);
  tape.backward(loss_var);
  GradBuffer grads;
  grads.resize_for(store);
  tape.export_grads(grads);

  check_gradients(store, [&] {
    Tape t(store);
    return t.scalar(build(t));
  }, grads);
}

TEST_CASE("tape loss values agree with the standalone loss functions") {
  Rng rng(21);
  std::vector<double> logits(12), targets(12);
  for (auto& v : logits) v = rng.normal(0.0, 3.0);
  for (auto& t : targets) t = rng.uniform() < 0.5 ? 1.0 : 0.0;

  ParamStore store;
  Tape tape(store);
  Tensor lt({12});
  for (int i = 0; i < 12; ++i) lt[i] = logits[i];
  const double via_tape = tape.scalar(tape.bce_with_logits(tape.input(lt), targets));
  CHECK(via_tape == doctest::Approx(bce_with_logits(logits, targets)).epsilon(1e-15));
}

TEST_CASE("weighted sum combines scalars and routes gradient weights") {
  ParamStore store;
  const int a = store.add("a", {1});
  const int b = store.add("b", {1});
  store.at(a).value[0] = 2.0;
  store.at(b).value[0] = 3.0;

  Tape tape(store);
  auto va = tape.param(a);
  auto vb = tape.param(b);
  auto total = tape.weighted_sum({{va, 1.5}, {vb, -2.0}});
  CHECK(tape.scalar(total) == doctest::Approx(1.5 * 2.0 - 2.0 * 3.0));
  tape.backward(total);
  GradBuffer grads;
  grads.resize_for(store);
  tape.export_grads(grads);
  CHECK(grads.grads[0][0] == 1.5);
  CHECK(grads.grads[1][0] == -2.0);
}

TEST_CASE("backward may run only once per tape") {
  ParamStore store;
  const int a = store.add("a", {1});
  store.at(a).value[0] = 1.0;
  Tape tape(store);
  auto total = tape.weighted_sum({{tape.param(a), 1.0}});
  tape.backward(total);
  CHECK_THROWS_AS(tape.backward(total), Error);
}

TEST_CASE("adamw: hand-computed first step, untouched parameters stay bit-identical") {
  ParamStore store;
  const int a = store.add("a", {2});
  const int b = store.add("b", {2});
  store.at(a).value[0] = 1.0;
  store.at(a).value[1] = -0.5;
  store.at(b).value[0] = 0.25;
  store.at(b).value[1] = 0.75;

  GradBuffer grads;
  grads.resize_for(store);
  Tensor g({2});
  g[0] = 0.1;
  g[1] = -0.2;
  grads.accumulate(a, g);  // b untouched

  nn::AdamW::Config cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.01;
  nn::AdamW opt(cfg);
  opt.step(store, grads);

  // Hand-computed AdamW step 1: m = (1-b1)g, v = (1-b2)g^2, mhat = g,
  // vhat = g^2 -> update = lr*(g/(|g|+eps) + wd*p).
  for (int i = 0; i < 2; ++i) {
    const double gi = g[i];
    const double p0 = i == 0 ? 1.0 : -0.5;
    const double expect =
        p0 - cfg.lr * (gi / (std::sqrt(gi * gi) + cfg.eps) + cfg.weight_decay * p0);
    CHECK(store.at(a).value[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(store.at(b).value[0] == 0.25);  // bit-identical: no grad, no decay
  CHECK(store.at(b).value[1] == 0.75);
  CHECK(store.at(b).steps == 0);
  CHECK(store.at(a).steps == 1);
}

TEST_CASE("grad buffer scaled accumulation is order-deterministic") {
  ParamStore store;
  const int a = store.add("a", {3});
  GradBuffer total1, total2, item;
  total1.resize_for(store);
  total2.resize_for(store);
  item.resize_for(store);
  Tensor g({3});
  g[0] = 1.0;
  g[1] = 2.0;
  g[2] = 3.0;
  item.accumulate(a, g);
  total1.add_scaled(item, 0.5);
  total1.add_scaled(item, 0.25);
  total2.add_scaled(item, 0.5);
  total2.add_scaled(item, 0.25);
  for (int i = 0; i < 3; ++i) CHECK(total1.grads[0][i] == total2.grads[0][i]);
}

TEST_CASE("fan-in uniform initialization is seed-deterministic and bounded") {
  Tensor a({64}), b({64});
  Rng r1(99), r2(99);
  nn::init_fan_in_uniform(a, 16, r1);
  nn::init_fan_in_uniform(b, 16, r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(std::fabs(a[i]) <= 0.25);  // 1/sqrt(16)
  }
}

TEST_CASE("shape errors: conv channel mismatch, linear size mismatch, odd pooling") {
  ParamStore store;
  const int wid = store.add("w", {2, 3, 3, 3});
  const int bid = store.add("b", {2});
  Tape tape(store);
  auto x = tape.input(Tensor({4, 8, 8}));  // 4 channels vs conv expecting 3
  CHECK_THROWS_AS(tape.conv2d(x, tape.param(wid), tape.param(bid)), ShapeError);
  auto odd = tape.input(Tensor({2, 5, 6}));
  CHECK_THROWS_AS(tape.maxpool2(odd), ShapeError);
}
