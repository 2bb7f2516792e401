#pragma once

#include <cstddef>
#include <vector>

namespace cmtssl {

// Dense row-major n-d array of doubles. Layout conventions are owned by the
// functions that produce/consume a tensor: HSI cubes are {H, W, C}, network
// activations are {C, H, W}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Index helpers for the two layouts used in this project.
  double& at3(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at3(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }

  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // True when every element is finite.
  bool all_finite() const;

  std::vector<double> to_vector() const { return data_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Converts a {H,W,C} cube to the {C,H,W} layout used by the network, and back.
Tensor chw_from_hwc(const Tensor& hwc);
Tensor hwc_from_chw(const Tensor& chw);

}  // namespace cmtssl
