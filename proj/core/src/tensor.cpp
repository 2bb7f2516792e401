#include "cmtssl/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cmtssl/errors.hpp"

namespace cmtssl {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor chw_from_hwc(const Tensor& hwc) {
  if (hwc.rank() != 3) throw ShapeError("chw_from_hwc expects a rank-3 tensor");
  const int h = hwc.dim(0), w = hwc.dim(1), c = hwc.dim(2);
  Tensor out({c, h, w});
  const double* src = hwc.data();
  double* dst = out.data();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < c; ++k)
        dst[(static_cast<std::size_t>(k) * h + i) * w + j] =
            src[(static_cast<std::size_t>(i) * w + j) * c + k];
  return out;
}

Tensor hwc_from_chw(const Tensor& chw) {
  if (chw.rank() != 3) throw ShapeError("hwc_from_chw expects a rank-3 tensor");
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out({h, w, c});
  const double* src = chw.data();
  double* dst = out.data();
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        dst[(static_cast<std::size_t>(i) * w + j) * c + k] =
            src[(static_cast<std::size_t>(k) * h + i) * w + j];
  return out;
}

}  // namespace cmtssl
