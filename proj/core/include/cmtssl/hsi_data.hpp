#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cmtssl/tensor.hpp"

namespace cmtssl {

// A full hyperspectral scene: H x W x C pixels plus an optional per-pixel
// class-id map (negative ids are never produced; the ignore id is a consumer
// concern).
struct Scene {
  std::string name;
  int height = 0;
  int width = 0;
  int bands = 0;
  Tensor pixels;             // {H, W, C}
  std::vector<int> labels;   // H*W row-major, empty when unlabeled
  std::vector<double> wavelengths;  // optional, per band

  bool has_labels() const { return !labels.empty(); }
  int label_at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
};

enum class SceneFormat { raw_tensor_container, delimited_matrix };

enum class Split { pretrain, train, validation, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// Half-open rectangle [x0,x1) x [y0,y1) in scene coordinates, assigned to one
// split. Regions across a SplitSpec must not overlap.
struct Region {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Split split = Split::train;
};

struct BandStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SplitSpec {
  int tile_size = 16;
  int pretrain_stride = 8;
  std::vector<Region> regions;
};

struct CubeOrigin {
  std::string scene;
  int row = 0;
  int col = 0;
};

// One tile cut from a scene. `values` is {T, T, C}; labels mirror the tile
// footprint when the parent scene is labeled.
struct DataCube {
  Tensor values;
  CubeOrigin origin;
  std::vector<int> labels;  // T*T row-major, empty when unlabeled

  bool has_labels() const { return !labels.empty(); }
  std::string id() const;
};

// Scene container I/O. The raw container is `<base>.hsr` (little-endian
// float32, H*W*C values in {H,W,C} order) plus `<base>.json` declaring
// {height, width, bands, label_file?, wavelengths?}. The delimited format is
// `<base>.csv` with one pixel per line (C comma-separated values, row-major
// pixels) and the same sidecar. `path` may point at the payload file or at
// the bare base path.
Scene load_scene(const std::string& path, SceneFormat format);

// Writes `<dir>/<scene.name>.hsr`, the sidecar, and the label payload when
// present. Returns the base path (without extension).
std::string save_scene(const Scene& scene, const std::string& dir);

// Throws ConfigError when regions overlap or fall outside the scene.
void validate_split_spec(const SplitSpec& spec, int scene_height, int scene_width);

// Cuts tiles for one split. Pretrain tiles use `pretrain_stride` and are
// drawn from regions assigned to pretrain or train (pretraining consumes the
// training side of the leakage divide); every other split uses
// non-overlapping tiles (stride = tile_size) from exactly its own regions.
// Tiles must lie fully inside a single region; partial tiles are discarded.
std::vector<DataCube> tile_scene(const Scene& scene, const SplitSpec& spec,
                                 Split split);

// Per-band mean and population standard deviation over all pixels of all
// cubes, computed with a two-pass reduction so the result does not depend on
// accumulation order.
std::vector<BandStats> fit_normalizer(const std::vector<DataCube>& cubes);

// (x - mean) / std per band; bands with ~zero std divide by 1 so constant
// bands center to zero instead of blowing up. Labels pass through untouched.
DataCube normalize(const DataCube& cube, const std::vector<BandStats>& stats);
DataCube denormalize(const DataCube& cube, const std::vector<BandStats>& stats);
Tensor normalize_values(const Tensor& hwc, const std::vector<BandStats>& stats);

// Split configuration file: JSON {"tile_size":16, "pretrain_stride":8,
// "regions":[{"x0":..,"y0":..,"x1":..,"y1":..,"split":"train"},...]}.
SplitSpec load_split_spec(const std::string& path);
void save_split_spec(const SplitSpec& spec, const std::string& path);

}  // namespace cmtssl
