#pragma once

#include <vector>

#include "cmtssl/rng.hpp"
#include "cmtssl/tensor.hpp"

namespace cmtssl {

// Patch grid for the spatial jigsaw: patch_h x patch_w full-depth patches,
// N_spa = (H/patch_h) * (W/patch_w). Dimensions must divide evenly.
struct SpatialJigsawConfig {
  int patch_h = 8;
  int patch_w = 8;

  int patch_count(int h, int w) const;  // throws ConfigError on non-divisible dims
};

// Contiguous band blocks for the spectral jigsaw: `blocks` = N_spe equal
// blocks of depth C / blocks.
struct SpectralJigsawConfig {
  int blocks = 4;

  int block_depth(int c) const;  // throws ConfigError when blocks does not divide C
};

// 3-D patches for masking. patch_c = 0 derives the depth automatically: the
// largest divisor of C that is at most C/4 (so the default grid has >= 4
// spectral slabs), falling back to 1.
struct MaskingConfig {
  int patch_h = 8;
  int patch_w = 8;
  int patch_c = 0;
  double mask_ratio = 0.6;

  int resolved_patch_c(int c) const;
};

// Shuffled cube + flattened permutation-matrix target. perm[slot] is the
// original position of the patch now sitting at `slot`, and
// target[slot * N + perm[slot]] = 1.
struct JigsawSample {
  Tensor shuffled;            // same shape as the input cube
  std::vector<int> perm;      // length N, bijection on {0..N-1}
  std::vector<double> target; // length N*N, exactly N ones
};

struct MaskedSample {
  Tensor visible;        // input with masked patches zeroed
  Tensor mask;           // {H,W,C}, 1 inside masked patches
  Tensor masked_values;  // original values inside the mask, 0 outside
  int masked_patches = 0;
  int total_patches = 0;
};

JigsawSample spatial_jigsaw(const Tensor& cube_hwc, const SpatialJigsawConfig& cfg, Rng& rng);
JigsawSample spectral_jigsaw(const Tensor& cube_hwc, const SpectralJigsawConfig& cfg, Rng& rng);
MaskedSample mask_cube(const Tensor& cube_hwc, const MaskingConfig& cfg, Rng& rng);

// Rearranges patches with an explicit permutation (out slot i takes patch
// perm[i]); used by the generators and by round-trip consumers.
Tensor apply_spatial_permutation(const Tensor& cube_hwc, const SpatialJigsawConfig& cfg,
                                 const std::vector<int>& perm);
Tensor apply_spectral_permutation(const Tensor& cube_hwc, const SpectralJigsawConfig& cfg,
                                  const std::vector<int>& perm);

std::vector<int> invert_permutation(const std::vector<int>& perm);

// Flattened N x N permutation matrix for `perm`.
std::vector<double> permutation_target(const std::vector<int>& perm);

// Number of masked patches: round-half-up of ratio * total, clamped to
// [1, total - 1]. Ratio must lie in (0, 1).
int masked_patch_count(int total_patches, double ratio);

// Greedy one-to-one assignment over an N x N score matrix (logits flattened
// row-major, slot-major): repeatedly takes the best unused (slot, origin)
// pair. Always returns a valid permutation.
std::vector<int> decode_permutation(const std::vector<double>& logits);

}  // namespace cmtssl
