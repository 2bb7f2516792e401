#include "cmtssl/pretext.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "cmtssl/errors.hpp"

namespace cmtssl {

int SpatialJigsawConfig::patch_count(int h, int w) const {
  if (patch_h < 1 || patch_w < 1) throw ConfigError("jigsaw patch dims must be >= 1");
  if (patch_h >= h || patch_w >= w)
    throw ConfigError("jigsaw patch must be smaller than the cube");
  if (h % patch_h != 0 || w % patch_w != 0)
    throw ConfigError("jigsaw patch dims must divide the cube dims");
  return (h / patch_h) * (w / patch_w);
}

int SpectralJigsawConfig::block_depth(int c) const {
  if (blocks < 2) throw ConfigError("spectral jigsaw needs at least 2 blocks");
  if (blocks >= c) throw ConfigError("spectral block depth must be below C");
  if (c % blocks != 0)
    throw ConfigError("spectral jigsaw blocks must divide the band count");
  return c / blocks;
}

int MaskingConfig::resolved_patch_c(int c) const {
  if (patch_c > 0) {
    if (c % patch_c != 0) throw ConfigError("mim patch depth must divide the band count");
    if (patch_c > c) throw ConfigError("mim patch depth exceeds band count");
    return patch_c;
  }
  // Auto: largest divisor of C no greater than C/4; 1 always divides.
  for (int d = c / 4; d >= 2; --d)
    if (c % d == 0) return d;
  return 1;
}

std::vector<int> invert_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  return inv;
}

std::vector<double> permutation_target(const std::vector<int>& perm) {
  const std::size_t n = perm.size();
  std::vector<double> target(n * n, 0.0);
  for (std::size_t slot = 0; slot < n; ++slot)
    target[slot * n + static_cast<std::size_t>(perm[slot])] = 1.0;
  return target;
}

Tensor apply_spatial_permutation(const Tensor& cube, const SpatialJigsawConfig& cfg,
                                 const std::vector<int>& perm) {
  const int h = cube.dim(0), w = cube.dim(1), c = cube.dim(2);
  const int n = cfg.patch_count(h, w);
  if (static_cast<int>(perm.size()) != n)
    throw ShapeError("permutation length does not match patch count");
  const int cols = w / cfg.patch_w;

  Tensor out({h, w, c});
  const double* src = cube.data();
  double* dst = out.data();
  for (int slot = 0; slot < n; ++slot) {
    const int src_patch = perm[static_cast<std::size_t>(slot)];
    const int dst_r = (slot / cols) * cfg.patch_h;
    const int dst_c = (slot % cols) * cfg.patch_w;
    const int src_r = (src_patch / cols) * cfg.patch_h;
    const int src_c = (src_patch % cols) * cfg.patch_w;
    for (int i = 0; i < cfg.patch_h; ++i) {
      const std::size_t so = (static_cast<std::size_t>(src_r + i) * w + src_c) * c;
      const std::size_t dor = (static_cast<std::size_t>(dst_r + i) * w + dst_c) * c;
      std::memcpy(dst + dor, src + so,
                  static_cast<std::size_t>(cfg.patch_w) * c * sizeof(double));
    }
  }
  return out;
}

Tensor apply_spectral_permutation(const Tensor& cube, const SpectralJigsawConfig& cfg,
                                  const std::vector<int>& perm) {
  const int h = cube.dim(0), w = cube.dim(1), c = cube.dim(2);
  const int depth = cfg.block_depth(c);
  if (static_cast<int>(perm.size()) != cfg.blocks)
    throw ShapeError("permutation length does not match block count");

  Tensor out({h, w, c});
  const double* src = cube.data();
  double* dst = out.data();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* sp = src + p * c;
    double* dp = dst + p * c;
    for (int slot = 0; slot < cfg.blocks; ++slot) {
      const int src_block = perm[static_cast<std::size_t>(slot)];
      std::memcpy(dp + static_cast<std::size_t>(slot) * depth,
                  sp + static_cast<std::size_t>(src_block) * depth,
                  static_cast<std::size_t>(depth) * sizeof(double));
    }
  }
  return out;
}

JigsawSample spatial_jigsaw(const Tensor& cube, const SpatialJigsawConfig& cfg, Rng& rng) {
  const int n = cfg.patch_count(cube.dim(0), cube.dim(1));
  JigsawSample sample;
  sample.perm = rng.permutation(n);
  sample.shuffled = apply_spatial_permutation(cube, cfg, sample.perm);
  sample.target = permutation_target(sample.perm);
  return sample;
}

JigsawSample spectral_jigsaw(const Tensor& cube, const SpectralJigsawConfig& cfg, Rng& rng) {
  cfg.block_depth(cube.dim(2));  // validates divisibility
  JigsawSample sample;
  sample.perm = rng.permutation(cfg.blocks);
  sample.shuffled = apply_spectral_permutation(cube, cfg, sample.perm);
  sample.target = permutation_target(sample.perm);
  return sample;
}

int masked_patch_count(int total_patches, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ConfigError("mask ratio must lie in (0, 1)");
  if (total_patches < 2) throw ConfigError("masking needs at least 2 patches");
  const int m = static_cast<int>(std::floor(ratio * total_patches + 0.5));
  return std::clamp(m, 1, total_patches - 1);
}

MaskedSample mask_cube(const Tensor& cube, const MaskingConfig& cfg, Rng& rng) {
  const int h = cube.dim(0), w = cube.dim(1), c = cube.dim(2);
  if (cfg.patch_h < 1 || cfg.patch_w < 1) throw ConfigError("mim patch dims must be >= 1");
  if (h % cfg.patch_h != 0 || w % cfg.patch_w != 0)
    throw ConfigError("mim patch dims must divide the cube dims");
  const int pc = cfg.resolved_patch_c(c);

  const int gh = h / cfg.patch_h, gw = w / cfg.patch_w, gc = c / pc;
  const int total = gh * gw * gc;
  const int m = masked_patch_count(total, cfg.mask_ratio);

  MaskedSample sample;
  sample.visible = cube;
  sample.mask = Tensor({h, w, c});
  sample.masked_values = Tensor({h, w, c});
  sample.masked_patches = m;
  sample.total_patches = total;

  const std::vector<int> chosen = rng.choose_k(total, m);
  double* vis = sample.visible.data();
  double* mask = sample.mask.data();
  double* val = sample.masked_values.data();
  const double* src = cube.data();
  for (int patch : chosen) {
    const int pi = patch / (gw * gc);
    const int pj = (patch / gc) % gw;
    const int pk = patch % gc;
    for (int i = pi * cfg.patch_h; i < (pi + 1) * cfg.patch_h; ++i)
      for (int j = pj * cfg.patch_w; j < (pj + 1) * cfg.patch_w; ++j) {
        const std::size_t base = (static_cast<std::size_t>(i) * w + j) * c;
        for (int k = pk * pc; k < (pk + 1) * pc; ++k) {
          vis[base + k] = 0.0;
          mask[base + k] = 1.0;
          val[base + k] = src[base + k];
        }
      }
  }
  return sample;
}

std::vector<int> decode_permutation(const std::vector<double>& logits) {
  const std::size_t nn = logits.size();
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(nn))));
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) != nn)
    throw ShapeError("decode_permutation: logits length is not a perfect square");

  std::vector<int> cells(nn);
  std::iota(cells.begin(), cells.end(), 0);
  // Descending by score; ties broken by cell index for determinism.
  std::stable_sort(cells.begin(), cells.end(), [&](int a, int b) {
    return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
  });

  std::vector<int> perm(static_cast<std::size_t>(n), -1);
  std::vector<char> origin_used(static_cast<std::size_t>(n), 0);
  int assigned = 0;
  for (int cell : cells) {
    const int slot = cell / n;
    const int origin = cell % n;
    if (perm[static_cast<std::size_t>(slot)] != -1 || origin_used[static_cast<std::size_t>(origin)])
      continue;
    perm[static_cast<std::size_t>(slot)] = origin;
    origin_used[static_cast<std::size_t>(origin)] = 1;
    if (++assigned == n) break;
  }
  return perm;
}

}  // namespace cmtssl
