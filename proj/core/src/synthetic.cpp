#include "cmtssl/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "cmtssl/errors.hpp"
#include "cmtssl/rng.hpp"

namespace cmtssl {

namespace {

std::vector<std::vector<double>> make_prototypes(const SyntheticSpec& spec, Rng& rng) {
  if (!spec.prototypes.empty()) {
    if (static_cast<int>(spec.prototypes.size()) < spec.num_classes)
      throw ConfigError("fewer prototypes than classes");
    for (const auto& p : spec.prototypes)
      if (static_cast<int>(p.size()) != spec.bands)
        throw ConfigError("prototype length does not match band count");
    return {spec.prototypes.begin(), spec.prototypes.begin() + spec.num_classes};
  }

  auto sample = [&](std::vector<double>& proto) {
    proto.assign(static_cast<std::size_t>(spec.bands), 0.0);
    for (int order = 1; order <= 4; ++order) {
      const double amp = rng.uniform(0.4, 1.2) / static_cast<double>(order);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int b = 0; b < spec.bands; ++b)
        proto[static_cast<std::size_t>(b)] +=
            amp * std::cos(2.0 * std::numbers::pi * order * (b + 0.5) /
                               static_cast<double>(spec.bands) +
                           phase);
    }
  };

  std::vector<std::vector<double>> protos(static_cast<std::size_t>(spec.num_classes));
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000)
        throw ConfigError("could not sample prototypes with the requested margin");
      sample(protos[static_cast<std::size_t>(k)]);
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) {
        double d2 = 0.0;
        for (int b = 0; b < spec.bands; ++b) {
          const double d = protos[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] -
                           protos[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
          d2 += d * d;
        }
        ok = std::sqrt(d2) >= spec.prototype_margin;
      }
      if (ok) break;
    }
  }
  return protos;
}

// Smooth value noise: a coarse N(0,1) lattice bilinearly interpolated to the
// full grid. Shared across bands so spatial texture correlates band-to-band.
std::vector<double> texture_field(int height, int width, Rng& rng) {
  const int cell = 4;
  const int gh = height / cell + 2, gw = width / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
  for (auto& v : lattice) v = rng.normal();

  std::vector<double> field(static_cast<std::size_t>(height) * width);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const double fi = static_cast<double>(i) / cell;
      const double fj = static_cast<double>(j) / cell;
      const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
      const double ti = fi - i0, tj = fj - j0;
      const auto at = [&](int a, int b) {
        return lattice[static_cast<std::size_t>(a) * gw + b];
      };
      field[static_cast<std::size_t>(i) * width + j] =
          (1 - ti) * ((1 - tj) * at(i0, j0) + tj * at(i0, j0 + 1)) +
          ti * ((1 - tj) * at(i0 + 1, j0) + tj * at(i0 + 1, j0 + 1));
    }
  return field;
}

}  // namespace

Scene generate_scene(const SyntheticSpec& spec) {
  if (spec.height < 1 || spec.width < 1 || spec.bands < 1)
    throw ConfigError("synthetic scene dimensions must be positive");
  if (spec.num_classes < 2) throw ConfigError("synthetic scene needs >= 2 classes");
  if (spec.region_grid < 1) throw ConfigError("region_grid must be >= 1");
  if (spec.texture_amplitudes.empty())
    throw ConfigError("texture_amplitudes must not be empty");
  for (double a : spec.texture_amplitudes)
    if (a < 0.0) throw ConfigError("texture amplitude must be >= 0");

  Rng rng(spec.seed);
  const auto protos = make_prototypes(spec, rng);
  const std::vector<double> texture = texture_field(spec.height, spec.width, rng);

  // Band envelope makes the texture spectrally structured but correlated.
  std::vector<double> envelope(static_cast<std::size_t>(spec.bands));
  {
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int b = 0; b < spec.bands; ++b)
      envelope[static_cast<std::size_t>(b)] =
          1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * (b + 0.5) /
                                   static_cast<double>(spec.bands) +
                               phase);
  }

  const int grid = spec.region_grid;
  std::vector<int> region_class(static_cast<std::size_t>(grid) * grid);
  std::vector<double> region_amp(static_cast<std::size_t>(grid) * grid);
  for (int r = 0; r < grid * grid; ++r) {
    region_class[static_cast<std::size_t>(r)] =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes)));
    region_amp[static_cast<std::size_t>(r)] =
        spec.texture_amplitudes[static_cast<std::size_t>(r) % spec.texture_amplitudes.size()];
  }

  Scene scene;
  scene.name = spec.name;
  scene.height = spec.height;
  scene.width = spec.width;
  scene.bands = spec.bands;
  scene.pixels = Tensor({spec.height, spec.width, spec.bands});
  scene.labels.resize(static_cast<std::size_t>(spec.height) * spec.width);
  scene.wavelengths.resize(static_cast<std::size_t>(spec.bands));
  for (int b = 0; b < spec.bands; ++b)
    scene.wavelengths[static_cast<std::size_t>(b)] =
        400.0 + 400.0 * b / static_cast<double>(std::max(1, spec.bands - 1));

  double* px = scene.pixels.data();
  for (int i = 0; i < spec.height; ++i) {
    const int gi = std::min(i * grid / spec.height, grid - 1);
    for (int j = 0; j < spec.width; ++j) {
      const int gj = std::min(j * grid / spec.width, grid - 1);
      const int region = gi * grid + gj;
      const int cls = region_class[static_cast<std::size_t>(region)];
      const double amp = region_amp[static_cast<std::size_t>(region)];
      const double tex = texture[static_cast<std::size_t>(i) * spec.width + j];
      scene.labels[static_cast<std::size_t>(i) * spec.width + j] = cls;
      const std::size_t base = (static_cast<std::size_t>(i) * spec.width + j) *
                               static_cast<std::size_t>(spec.bands);
      for (int b = 0; b < spec.bands; ++b) {
        double v = protos[static_cast<std::size_t>(cls)][static_cast<std::size_t>(b)] +
                   amp * tex * envelope[static_cast<std::size_t>(b)];
        if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
        px[base + b] = v;
      }
    }
  }
  return scene;
}

SplitSpec default_split_for(const SyntheticSpec& spec, int tile_size, int pretrain_stride) {
  SplitSpec split;
  split.tile_size = tile_size;
  split.pretrain_stride = pretrain_stride;
  // Horizontal bands: top 3/4 train, then validation and test, aligned to
  // tile boundaries.
  const int train_end = (spec.height * 3 / 4) / tile_size * tile_size;
  const int val_end = train_end + (spec.height - train_end) / 2 / tile_size * tile_size;
  split.regions.push_back({0, 0, spec.width, train_end, Split::train});
  if (val_end > train_end)
    split.regions.push_back({0, train_end, spec.width, val_end, Split::validation});
  if (spec.height > val_end)
    split.regions.push_back({0, val_end, spec.width, spec.height, Split::test});
  return split;
}

}  // namespace cmtssl
