#include "cmtssl/hsi_data.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmtssl/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmtssl {

namespace {

// The on-disk payload is float32; values are widened to double in memory.
static_assert(sizeof(float) == 4);

std::string strip_known_extension(const std::string& path) {
  fs::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".hsr" || ext == ".csv" || ext == ".json") return p.replace_extension().string();
  return path;
}

json read_sidecar(const std::string& base) {
  const std::string sidecar = base + ".json";
  std::ifstream in(sidecar);
  if (!in) throw FormatError("missing sidecar: " + sidecar);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("malformed sidecar " + sidecar + ": " + e.what());
  }
  for (const char* key : {"height", "width", "bands"}) {
    if (!j.contains(key) || !j[key].is_number_integer())
      throw FormatError("sidecar " + sidecar + " missing integer key '" + key + "'");
  }
  return j;
}

void check_finite(const Scene& scene) {
  const double* p = scene.pixels.data();
  std::size_t idx = 0;
  for (int h = 0; h < scene.height; ++h)
    for (int w = 0; w < scene.width; ++w)
      for (int c = 0; c < scene.bands; ++c, ++idx)
        if (!std::isfinite(p[idx])) {
          std::ostringstream os;
          os << "non-finite value in scene '" << scene.name << "' at (" << h << "," << w
             << "," << c << ")";
          throw DataError(os.str());
        }
}

std::vector<int> read_label_payload(const std::string& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing label file: " + path);
  in.seekg(0, std::ios::end);
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != expected * sizeof(std::int32_t))
    throw FormatError("label payload " + path + " has wrong length");
  std::vector<std::int32_t> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  std::vector<int> labels(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (raw[i] < 0) throw DataError("negative label id in " + path);
    labels[i] = raw[i];
  }
  return labels;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::pretrain: return "pretrain";
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "pretrain") return Split::pretrain;
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split name: " + name);
}

std::string DataCube::id() const {
  std::ostringstream os;
  os << origin.scene << ":r" << origin.row << ":c" << origin.col;
  return os.str();
}

Scene load_scene(const std::string& path, SceneFormat format) {
  const std::string base = strip_known_extension(path);
  const json meta = read_sidecar(base);

  Scene scene;
  scene.name = fs::path(base).filename().string();
  scene.height = meta["height"].get<int>();
  scene.width = meta["width"].get<int>();
  scene.bands = meta["bands"].get<int>();
  if (scene.height < 1 || scene.width < 1 || scene.bands < 1)
    throw FormatError("sidecar declares non-positive dimensions for " + base);
  if (meta.contains("wavelengths"))
    scene.wavelengths = meta["wavelengths"].get<std::vector<double>>();

  const std::size_t count = static_cast<std::size_t>(scene.height) * scene.width * scene.bands;
  scene.pixels = Tensor({scene.height, scene.width, scene.bands});

  if (format == SceneFormat::raw_tensor_container) {
    const std::string payload = base + ".hsr";
    std::ifstream in(payload, std::ios::binary);
    if (!in) throw FormatError("missing payload: " + payload);
    in.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes != count * sizeof(float)) {
      std::ostringstream os;
      os << "payload " << payload << " has " << bytes << " bytes, expected "
         << count * sizeof(float);
      throw FormatError(os.str());
    }
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    double* dst = scene.pixels.data();
    for (std::size_t i = 0; i < count; ++i) dst[i] = static_cast<double>(raw[i]);
  } else {
    const std::string payload = base + ".csv";
    std::ifstream in(payload);
    if (!in) throw FormatError("missing payload: " + payload);
    double* dst = scene.pixels.data();
    std::string line;
    std::size_t pixel = 0;
    const std::size_t pixels = static_cast<std::size_t>(scene.height) * scene.width;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (pixel >= pixels) throw FormatError("too many rows in " + payload);
      std::stringstream ss(line);
      std::string cell;
      for (int c = 0; c < scene.bands; ++c) {
        if (!std::getline(ss, cell, ','))
          throw FormatError("row " + std::to_string(pixel) + " of " + payload +
                            " has too few values");
        try {
          dst[pixel * scene.bands + c] = std::stod(cell);
        } catch (const std::exception&) {
          throw FormatError("unparseable value in " + payload);
        }
      }
      ++pixel;
    }
    if (pixel != pixels) throw FormatError("row count mismatch in " + payload);
  }

  check_finite(scene);

  if (meta.contains("label_file") && !meta["label_file"].is_null()) {
    const fs::path label_path =
        fs::path(base).parent_path() / meta["label_file"].get<std::string>();
    scene.labels = read_label_payload(label_path.string(),
                                      static_cast<std::size_t>(scene.height) * scene.width);
  }
  return scene;
}

std::string save_scene(const Scene& scene, const std::string& dir) {
  fs::create_directories(dir);
  const std::string base = (fs::path(dir) / scene.name).string();

  {
    std::ofstream out(base + ".hsr", std::ios::binary);
    if (!out) throw FormatError("cannot write " + base + ".hsr");
    const double* src = scene.pixels.data();
    const std::size_t count = scene.pixels.size();
    std::vector<float> raw(count);
    for (std::size_t i = 0; i < count; ++i) raw[i] = static_cast<float>(src[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
  }

  json meta;
  meta["height"] = scene.height;
  meta["width"] = scene.width;
  meta["bands"] = scene.bands;
  if (!scene.wavelengths.empty()) meta["wavelengths"] = scene.wavelengths;
  if (scene.has_labels()) {
    meta["label_file"] = scene.name + ".labels";
    std::ofstream out(base + ".labels", std::ios::binary);
    std::vector<std::int32_t> raw(scene.labels.begin(), scene.labels.end());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(std::int32_t)));
  }
  std::ofstream out(base + ".json");
  out << meta.dump(2) << "\n";
  return base;
}

void validate_split_spec(const SplitSpec& spec, int scene_height, int scene_width) {
  if (spec.tile_size < 1) throw ConfigError("tile_size must be >= 1");
  if (spec.pretrain_stride < 1) throw ConfigError("pretrain_stride must be >= 1");
  for (const Region& r : spec.regions) {
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > scene_width || r.y1 > scene_height ||
        r.x0 >= r.x1 || r.y0 >= r.y1)
      throw ConfigError("region outside scene bounds or empty");
  }
  for (std::size_t i = 0; i < spec.regions.size(); ++i)
    for (std::size_t j = i + 1; j < spec.regions.size(); ++j) {
      const Region& a = spec.regions[i];
      const Region& b = spec.regions[j];
      const bool overlap =
          a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
      if (overlap) throw ConfigError("split regions overlap");
    }
}

std::vector<DataCube> tile_scene(const Scene& scene, const SplitSpec& spec, Split split) {
  validate_split_spec(spec, scene.height, scene.width);
  const int tile = spec.tile_size;
  if (tile > scene.height || tile > scene.width)
    throw ConfigError("tile_size exceeds scene dimensions");

  const bool pretrain = split == Split::pretrain;
  const int stride = pretrain ? spec.pretrain_stride : tile;

  std::vector<const Region*> sources;
  for (const Region& r : spec.regions) {
    if (r.split == split || (pretrain && r.split == Split::train)) sources.push_back(&r);
  }
  if (sources.empty())
    throw ConfigError(std::string("no region assigned to split '") + split_name(split) + "'");

  std::vector<DataCube> cubes;
  for (const Region* r : sources) {
    for (int y = r->y0; y + tile <= r->y1; y += stride) {
      for (int x = r->x0; x + tile <= r->x1; x += stride) {
        DataCube cube;
        cube.values = Tensor({tile, tile, scene.bands});
        cube.origin = {scene.name, y, x};
        const double* src = scene.pixels.data();
        double* dst = cube.values.data();
        for (int i = 0; i < tile; ++i) {
          const std::size_t row_off =
              (static_cast<std::size_t>(y + i) * scene.width + x) * scene.bands;
          std::memcpy(dst + static_cast<std::size_t>(i) * tile * scene.bands,
                      src + row_off,
                      static_cast<std::size_t>(tile) * scene.bands * sizeof(double));
        }
        if (scene.has_labels()) {
          cube.labels.resize(static_cast<std::size_t>(tile) * tile);
          for (int i = 0; i < tile; ++i)
            for (int j = 0; j < tile; ++j)
              cube.labels[static_cast<std::size_t>(i) * tile + j] =
                  scene.label_at(y + i, x + j);
        }
        cubes.push_back(std::move(cube));
      }
    }
  }
  return cubes;
}

std::vector<BandStats> fit_normalizer(const std::vector<DataCube>& cubes) {
  if (cubes.empty()) throw DegenerateInputError("fit_normalizer needs at least one cube");
  const int bands = cubes.front().values.dim(2);
  for (const DataCube& c : cubes)
    if (c.values.dim(2) != bands)
      throw ShapeError("fit_normalizer: cubes disagree on band count");

  std::vector<double> sum(static_cast<std::size_t>(bands), 0.0);
  std::size_t pixels = 0;
  for (const DataCube& c : cubes) {
    const int hw = c.values.dim(0) * c.values.dim(1);
    const double* p = c.values.data();
    for (int i = 0; i < hw; ++i)
      for (int b = 0; b < bands; ++b)
        sum[static_cast<std::size_t>(b)] += p[static_cast<std::size_t>(i) * bands + b];
    pixels += static_cast<std::size_t>(hw);
  }
  std::vector<BandStats> stats(static_cast<std::size_t>(bands));
  for (int b = 0; b < bands; ++b)
    stats[static_cast<std::size_t>(b)].mean = sum[static_cast<std::size_t>(b)] / static_cast<double>(pixels);

  std::vector<double> sq(static_cast<std::size_t>(bands), 0.0);
  for (const DataCube& c : cubes) {
    const int hw = c.values.dim(0) * c.values.dim(1);
    const double* p = c.values.data();
    for (int i = 0; i < hw; ++i)
      for (int b = 0; b < bands; ++b) {
        const double d = p[static_cast<std::size_t>(i) * bands + b] -
                         stats[static_cast<std::size_t>(b)].mean;
        sq[static_cast<std::size_t>(b)] += d * d;
      }
  }
  for (int b = 0; b < bands; ++b)
    stats[static_cast<std::size_t>(b)].stddev =
        std::sqrt(sq[static_cast<std::size_t>(b)] / static_cast<double>(pixels));
  return stats;
}

namespace {

constexpr double kStdFloor = 1e-12;

double divisor_for(const BandStats& s) { return s.stddev < kStdFloor ? 1.0 : s.stddev; }

}  // namespace

Tensor normalize_values(const Tensor& hwc, const std::vector<BandStats>& stats) {
  const int bands = hwc.dim(2);
  if (static_cast<int>(stats.size()) != bands)
    throw ShapeError("normalize: stats length does not match band count");
  Tensor out = hwc;
  double* p = out.data();
  const std::size_t hw = out.size() / static_cast<std::size_t>(bands);
  for (std::size_t i = 0; i < hw; ++i)
    for (int b = 0; b < bands; ++b) {
      const BandStats& s = stats[static_cast<std::size_t>(b)];
      p[i * static_cast<std::size_t>(bands) + b] =
          (p[i * static_cast<std::size_t>(bands) + b] - s.mean) / divisor_for(s);
    }
  return out;
}

DataCube normalize(const DataCube& cube, const std::vector<BandStats>& stats) {
  DataCube out = cube;
  out.values = normalize_values(cube.values, stats);
  return out;
}

DataCube denormalize(const DataCube& cube, const std::vector<BandStats>& stats) {
  const int bands = cube.values.dim(2);
  if (static_cast<int>(stats.size()) != bands)
    throw ShapeError("denormalize: stats length does not match band count");
  DataCube out = cube;
  double* p = out.values.data();
  const std::size_t hw = out.values.size() / static_cast<std::size_t>(bands);
  for (std::size_t i = 0; i < hw; ++i)
    for (int b = 0; b < bands; ++b) {
      const BandStats& s = stats[static_cast<std::size_t>(b)];
      p[i * static_cast<std::size_t>(bands) + b] =
          p[i * static_cast<std::size_t>(bands) + b] * divisor_for(s) + s.mean;
    }
  return out;
}

SplitSpec load_split_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open split config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed split config " + path + ": " + e.what());
  }
  SplitSpec spec;
  spec.tile_size = j.value("tile_size", 16);
  spec.pretrain_stride = j.value("pretrain_stride", 8);
  if (!j.contains("regions") || !j["regions"].is_array())
    throw ConfigError("split config " + path + " missing 'regions' array");
  for (const auto& r : j["regions"]) {
    Region region;
    region.x0 = r.at("x0").get<int>();
    region.y0 = r.at("y0").get<int>();
    region.x1 = r.at("x1").get<int>();
    region.y1 = r.at("y1").get<int>();
    region.split = split_from_name(r.at("split").get<std::string>());
    spec.regions.push_back(region);
  }
  return spec;
}

void save_split_spec(const SplitSpec& spec, const std::string& path) {
  json j;
  j["tile_size"] = spec.tile_size;
  j["pretrain_stride"] = spec.pretrain_stride;
  j["regions"] = json::array();
  for (const Region& r : spec.regions) {
    j["regions"].push_back({{"x0", r.x0},
                            {"y0", r.y0},
                            {"x1", r.x1},
                            {"y1", r.y1},
                            {"split", split_name(r.split)}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write split config: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cmtssl
