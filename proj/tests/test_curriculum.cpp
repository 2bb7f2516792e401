#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmtssl/curriculum.hpp"
#include "cmtssl/errors.hpp"
#include "cmtssl/rng.hpp"

using namespace cmtssl;

TEST_CASE("N=100 S=4 K=10 F=2 -> sizes [25,50,75,100], epochs [10,20,40,80]") {
  const auto schedule = build_schedule(100, 4, 10, 2.0);
  REQUIRE(schedule.size() == 4);
  const std::size_t sizes[] = {25, 50, 75, 100};
  const int epochs[] = {10, 20, 40, 80};
  for (int k = 0; k < 4; ++k) {
    CHECK(schedule[k].prefix == sizes[k]);
    CHECK(schedule[k].epochs == epochs[k]);
  }
}

TEST_CASE("S=1 degenerates to one full batch of K epochs") {
  const auto schedule = build_schedule(37, 1, 12, 1.7);
  REQUIRE(schedule.size() == 1);
  CHECK(schedule[0].prefix == 37);
  CHECK(schedule[0].epochs == 12);
}

TEST_CASE("K=32 F=1.5 S=3 -> epochs [32, 48, 72]") {
  const auto schedule = build_schedule(1000, 3, 32, 1.5);
  REQUIRE(schedule.size() == 3);
  CHECK(schedule[0].epochs == 32);
  CHECK(schedule[1].epochs == 48);
  CHECK(schedule[2].epochs == 72);
}

TEST_CASE("invalid parameters are configuration errors") {
  CHECK_THROWS_AS(build_schedule(3, 4, 10, 1.5), ConfigError);  // S > N
  CHECK_THROWS_AS(build_schedule(10, 0, 10, 1.5), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 2, 0, 1.5), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 2, 10, 0.0), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 2, 10, -1.0), ConfigError);
}

TEST_CASE("schedule properties over random draws in the tuning grid") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 3 + static_cast<int>(rng.below(3));            // {3,4,5}
    const int k = 10 + static_cast<int>(rng.below(31));          // {10..40}
    const double f = 1.0 + 0.1 * static_cast<double>(rng.below(11));  // {1,1.1..2}
    const std::size_t n = static_cast<std::size_t>(s) + rng.below(5000);

    const auto schedule = build_schedule(n, s, k, f);
    REQUIRE(schedule.size() == static_cast<std::size_t>(s));
    for (int stage = 1; stage <= s; ++stage) {
      const CurriculumBatch& b = schedule[static_cast<std::size_t>(stage - 1)];
      CHECK(b.prefix == n * static_cast<std::size_t>(stage) / static_cast<std::size_t>(s));
      CHECK(b.epochs == std::max(1, static_cast<int>(std::floor(
                                        k * std::pow(f, stage - 1) + 0.5))));
      if (stage > 1) CHECK(b.prefix >= schedule[static_cast<std::size_t>(stage - 2)].prefix);
    }
    CHECK(schedule.back().prefix == n);  // coverage
  }
}

TEST_CASE("match_budget: N=100 S=1 K=10 B=10 -> 100 steps") {
  CHECK(match_budget(build_schedule(100, 1, 10, 1.0), 10) == 100);
}

TEST_CASE("match_budget: N=100 S=4 K=10 F=1 B=25 -> 100 steps") {
  CHECK(match_budget(build_schedule(100, 4, 10, 1.0), 25) == 100);
}

TEST_CASE("match_budget agrees with a step-counting simulation") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int s = 1 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(20));
    const double f = 1.0 + 0.1 * static_cast<double>(rng.below(11));
    const std::size_t n = static_cast<std::size_t>(s) + rng.below(3000);
    const int batch = 1 + static_cast<int>(rng.below(64));

    const auto schedule = build_schedule(n, s, k, f);

    // Simulate the loop and count optimizer steps.
    std::size_t steps = 0;
    for (const CurriculumBatch& stage : schedule)
      for (int e = 0; e < stage.epochs; ++e)
        for (std::size_t i = 0; i < stage.prefix; i += static_cast<std::size_t>(batch))
          ++steps;
    CHECK(match_budget(schedule, batch) == steps);
  }

  // The sensitivity-sweep base schedule at a realistic pretraining size.
  const auto base = build_schedule(6364, 3, 32, 1.5);
  std::size_t steps = 0;
  for (const CurriculumBatch& stage : base)
    for (int e = 0; e < stage.epochs; ++e)
      for (std::size_t i = 0; i < stage.prefix; i += 16) ++steps;
  CHECK(match_budget(base, 16) == steps);
}

TEST_CASE("epochs_for_budget lands within half an epoch of the target") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(2000);
    const int batch = 1 + static_cast<int>(rng.below(64));
    const std::size_t per_epoch = (n + static_cast<std::size_t>(batch) - 1) /
                                  static_cast<std::size_t>(batch);
    const std::size_t target = 1 + rng.below(5000);
    const int epochs = epochs_for_budget(n, batch, target);
    CHECK(epochs >= 1);
    const double achieved = static_cast<double>(epochs) * static_cast<double>(per_epoch);
    CHECK(std::fabs(achieved - static_cast<double>(target)) <=
          std::max(0.5 * static_cast<double>(per_epoch),
                   static_cast<double>(per_epoch)));  // floor-of-1 slack for tiny targets
  }
}
