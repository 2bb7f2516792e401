#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtssl/hsi_data.hpp"

namespace cmtssl {

// Synthetic labeled scenes with controllable difficulty. The scene is split
// into a grid of rectangular regions; each region gets a class, a texture
// amplitude (cycled from `texture_amplitudes`), and its pixels are
// class prototype + amplitude * shared 2-D texture field * band envelope
// + white noise. Prototypes are smooth low-order cosine mixtures over the
// band axis, resampled until pairwise L2 distance >= prototype_margin.
struct SyntheticSpec {
  int height = 128;
  int width = 128;
  int bands = 32;
  int num_classes = 3;
  int region_grid = 4;  // regions per axis
  std::vector<double> texture_amplitudes = {0.3};
  double noise_std = 0.02;
  double prototype_margin = 1.0;
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  // Optional explicit prototypes (one length-`bands` curve per class); when
  // provided there must be at least `num_classes` of them.
  std::vector<std::vector<double>> prototypes;
};

Scene generate_scene(const SyntheticSpec& spec);

// Default region assignment for a generated scene: horizontal bands with
// ~3/4 train, and the rest split between validation and test.
SplitSpec default_split_for(const SyntheticSpec& spec, int tile_size = 16,
                            int pretrain_stride = 8);

}  // namespace cmtssl
