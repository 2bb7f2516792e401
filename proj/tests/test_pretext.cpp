#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cmtssl/errors.hpp"
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

bool is_permutation_matrix_target(const std::vector<double>& target, int n) {
  if (target.size() != static_cast<std::size_t>(n) * n) return false;
  for (int i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < n; ++j) {
      row += target[static_cast<std::size_t>(i) * n + j];
      col += target[static_cast<std::size_t>(j) * n + i];
      const double v = target[static_cast<std::size_t>(i) * n + j];
      if (v != 0.0 && v != 1.0) return false;
    }
    if (row != 1.0 || col != 1.0) return false;
  }
  return true;
}

// Multiset of per-patch checksums; invariant under patch rearrangement.
std::multiset<double> spatial_patch_checksums(const Tensor& cube, const SpatialJigsawConfig& cfg) {
  const int h = cube.dim(0), w = cube.dim(1), c = cube.dim(2);
  const int rows = h / cfg.patch_h, cols = w / cfg.patch_w;
  std::multiset<double> sums;
  for (int pr = 0; pr < rows; ++pr)
    for (int pc = 0; pc < cols; ++pc) {
      double sum = 0.0;
      for (int i = pr * cfg.patch_h; i < (pr + 1) * cfg.patch_h; ++i)
        for (int j = pc * cfg.patch_w; j < (pc + 1) * cfg.patch_w; ++j)
          for (int b = 0; b < c; ++b) sum += cube.at3(i, j, b) * (1.0 + 0.01 * b);
      sums.insert(sum);
    }
  return sums;
}

}  // namespace

TEST_CASE("16x16 cube with 8x8 patches: N_spa = 4, target has 16 entries with 4 ones") {
  const Tensor cube = random_cube(16, 16, 6, 1);
  SpatialJigsawConfig cfg;
  Rng rng(11);
  const JigsawSample sample = spatial_jigsaw(cube, cfg, rng);
  CHECK(sample.perm.size() == 4);
  CHECK(sample.target.size() == 16);
  CHECK(std::accumulate(sample.target.begin(), sample.target.end(), 0.0) == 4.0);
  CHECK(is_permutation_matrix_target(sample.target, 4));
}

TEST_CASE("identity permutation leaves the cube untouched, target is the identity matrix") {
  const Tensor cube = random_cube(16, 16, 4, 2);
  SpatialJigsawConfig cfg;
  const std::vector<int> identity = {0, 1, 2, 3};
  const Tensor same = apply_spatial_permutation(cube, cfg, identity);
  for (std::size_t i = 0; i < cube.size(); ++i) CHECK(same[i] == cube[i]);
  const std::vector<double> target = permutation_target(identity);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(target[static_cast<std::size_t>(i) * 4 + j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("spatial round-trip: inverse permutation restores the cube bit-exactly") {
  SpatialJigsawConfig cfg;
  cfg.patch_h = 4;
  cfg.patch_w = 4;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor cube = random_cube(16, 16, 3, 100 + trial);
    Rng rng(200 + trial);
    const JigsawSample sample = spatial_jigsaw(cube, cfg, rng);
    const Tensor back =
        apply_spatial_permutation(sample.shuffled, cfg, invert_permutation(sample.perm));
    for (std::size_t i = 0; i < cube.size(); ++i) REQUIRE(back[i] == cube[i]);
  }
}

TEST_CASE("shuffling preserves the multiset of patch contents") {
  SpatialJigsawConfig cfg;
  const Tensor cube = random_cube(16, 16, 5, 42);
  Rng rng(43);
  const JigsawSample sample = spatial_jigsaw(cube, cfg, rng);
  CHECK(spatial_patch_checksums(cube, cfg) == spatial_patch_checksums(sample.shuffled, cfg));
}

TEST_CASE("non-divisible patch dims are configuration errors") {
  const Tensor cube = random_cube(16, 16, 4, 3);
  SpatialJigsawConfig bad;
  bad.patch_h = 5;
  Rng rng(1);
  CHECK_THROWS_AS(spatial_jigsaw(cube, bad, rng), ConfigError);
  SpectralJigsawConfig bad_spe;
  bad_spe.blocks = 3;  // does not divide 4
  CHECK_THROWS_AS(spectral_jigsaw(cube, bad_spe, rng), ConfigError);
}

TEST_CASE("spectral jigsaw: C=120 in 30-deep blocks gives N_spe = 4") {
  SpectralJigsawConfig cfg;
  cfg.blocks = 4;
  CHECK(cfg.block_depth(120) == 30);
  const Tensor cube = random_cube(4, 4, 120, 4);
  Rng rng(5);
  const JigsawSample sample = spectral_jigsaw(cube, cfg, rng);
  CHECK(sample.target.size() == 16);
  CHECK(is_permutation_matrix_target(sample.target, 4));
}

TEST_CASE("spectral block swap moves constant bands where expected") {
  // Band b holds the constant value b. Swapping blocks 0 and 1 of depth 30
  // must surface bands [30..59, 0..29, 60..119] in order.
  Tensor cube({2, 2, 120});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int b = 0; b < 120; ++b) cube.at3(i, j, b) = static_cast<double>(b);
  SpectralJigsawConfig cfg;
  cfg.blocks = 4;
  const std::vector<int> swap01 = {1, 0, 2, 3};
  const Tensor shuffled = apply_spectral_permutation(cube, cfg, swap01);
  for (int b = 0; b < 30; ++b) CHECK(shuffled.at3(0, 0, b) == static_cast<double>(30 + b));
  for (int b = 30; b < 60; ++b) CHECK(shuffled.at3(1, 1, b) == static_cast<double>(b - 30));
  for (int b = 60; b < 120; ++b) CHECK(shuffled.at3(0, 1, b) == static_cast<double>(b));
}

TEST_CASE("spectral round-trip restores the cube bit-exactly") {
  SpectralJigsawConfig cfg;
  cfg.blocks = 4;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor cube = random_cube(8, 8, 12, 300 + trial);
    Rng rng(400 + trial);
    const JigsawSample sample = spectral_jigsaw(cube, cfg, rng);
    const Tensor back =
        apply_spectral_permutation(sample.shuffled, cfg, invert_permutation(sample.perm));
    for (std::size_t i = 0; i < cube.size(); ++i) REQUIRE(back[i] == cube[i]);
  }
}

TEST_CASE("mask count: 16 patches at ratio 0.6 -> M = 10") {
  CHECK(masked_patch_count(16, 0.6) == 10);
  CHECK(masked_patch_count(16, 0.01) == 1);       // clamped up
  CHECK(masked_patch_count(16, 0.99) == 15);      // clamped below total
  CHECK_THROWS_AS(masked_patch_count(16, 0.0), ConfigError);
  CHECK_THROWS_AS(masked_patch_count(16, 1.0), ConfigError);
}

TEST_CASE("16x16x120 cube with 8x8x30 patches: 16 patches, M = 10") {
  const Tensor cube = random_cube(16, 16, 120, 6);
  MaskingConfig cfg;
  cfg.patch_c = 30;
  Rng rng(7);
  const MaskedSample sample = mask_cube(cube, cfg, rng);
  CHECK(sample.total_patches == 16);
  CHECK(sample.masked_patches == 10);
}

TEST_CASE("mask covers exactly M whole patches worth of voxels") {
  const Tensor cube = random_cube(16, 16, 8, 8);
  MaskingConfig cfg;
  cfg.patch_c = 2;
  Rng rng(9);
  const MaskedSample sample = mask_cube(cube, cfg, rng);
  double voxels = 0.0;
  for (std::size_t i = 0; i < sample.mask.size(); ++i) voxels += sample.mask[i];
  CHECK(voxels == static_cast<double>(sample.masked_patches) * 8 * 8 * 2);
}

TEST_CASE("reassembling visible and masked values reproduces the cube bit-exactly") {
  MaskingConfig cfg;
  cfg.patch_h = 4;
  cfg.patch_w = 4;
  cfg.patch_c = 0;  // auto
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor cube = random_cube(16, 16, 12, 700 + trial);
    Rng rng(800 + trial);
    const MaskedSample sample = mask_cube(cube, cfg, rng);
    for (std::size_t i = 0; i < cube.size(); ++i) {
      const double rebuilt = sample.mask[i] != 0.0 ? sample.masked_values[i]
                                                   : sample.visible[i];
      REQUIRE(rebuilt == cube[i]);
      if (sample.mask[i] != 0.0) REQUIRE(sample.visible[i] == 0.0);
    }
  }
}

TEST_CASE("auto patch depth: largest divisor at most C/4, falling back to 1") {
  MaskingConfig cfg;
  CHECK(cfg.resolved_patch_c(32) == 8);
  CHECK(cfg.resolved_patch_c(120) == 30);
  CHECK(cfg.resolved_patch_c(103) == 1);  // prime band count
  CHECK(cfg.resolved_patch_c(12) == 3);
}

TEST_CASE("generators are deterministic under a fixed seed") {
  const Tensor cube = random_cube(16, 16, 8, 10);
  SpatialJigsawConfig scfg;
  MaskingConfig mcfg;
  Rng a(123), b(123), c(124);
  const JigsawSample sa = spatial_jigsaw(cube, scfg, a);
  const JigsawSample sb = spatial_jigsaw(cube, scfg, b);
  const JigsawSample sc = spatial_jigsaw(cube, scfg, c);
  CHECK(sa.perm == sb.perm);
  bool same_as_c = sa.perm == sc.perm;
  Rng ma(55), mb(55);
  const MaskedSample m1 = mask_cube(cube, mcfg, ma);
  const MaskedSample m2 = mask_cube(cube, mcfg, mb);
  for (std::size_t i = 0; i < m1.mask.size(); ++i) REQUIRE(m1.mask[i] == m2.mask[i]);
  // Different seeds draw independently; with 4! = 24 permutations a clash is
  // possible but three clashes in a row are not checked, just this smoke.
  (void)same_as_c;
}

TEST_CASE("decode: flattened identity and permutation matrices decode to themselves") {
  const std::vector<int> identity = {0, 1, 2, 3};
  CHECK(decode_permutation(permutation_target(identity)) == identity);
  const std::vector<int> perm = {2, 0, 3, 1};
  CHECK(decode_permutation(permutation_target(perm)) == perm);
}

TEST_CASE("decode: always a bijection; greedy matches exhaustive search when totals tie") {
  Rng rng(31);
  int optimal_matches = 0, checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(16);
    for (auto& v : logits) v = rng.normal(0.0, 1.0);
    const std::vector<int> greedy = decode_permutation(logits);

    // Validity: bijection on {0..3}.
    std::set<int> seen(greedy.begin(), greedy.end());
    REQUIRE(greedy.size() == 4);
    REQUIRE(seen.size() == 4);
    REQUIRE(*seen.begin() == 0);
    REQUIRE(*seen.rbegin() == 3);

    // Exhaustive 4! oracle.
    std::vector<int> base = {0, 1, 2, 3};
    double best_total = -1e300;
    std::vector<int> best = base;
    std::vector<int> p = base;
    std::sort(p.begin(), p.end());
    do {
      double total = 0.0;
      for (int slot = 0; slot < 4; ++slot)
        total += logits[static_cast<std::size_t>(slot) * 4 + p[static_cast<std::size_t>(slot)]];
      if (total > best_total) {
        best_total = total;
        best = p;
      }
    } while (std::next_permutation(p.begin(), p.end()));

    double greedy_total = 0.0;
    for (int slot = 0; slot < 4; ++slot)
      greedy_total +=
          logits[static_cast<std::size_t>(slot) * 4 + greedy[static_cast<std::size_t>(slot)]];
    ++checked;
    if (greedy_total == best_total) {
      ++optimal_matches;
      CHECK(greedy == best);
    }
  }
  // Greedy is optimal on a healthy share of random instances; the validity
  // requirement above holds on all of them.
  CHECK(checked == 200);
  CHECK(optimal_matches >= 80);
}

TEST_CASE("decode rejects non-square logit vectors") {
  CHECK_THROWS_AS(decode_permutation(std::vector<double>(15, 0.0)), ShapeError);
}
