#pragma once

#include <cstddef>
#include <vector>

namespace alc {

// Dense row-major array of doubles with an explicit shape. Carries images,
// probability maps, parameters and gradients.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);

  std::size_t rank() const { return shape.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  std::size_t numel() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  // Convenience accessors for the common ranks; hot paths index data directly.
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  double& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  double& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  double at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
};

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace alc
