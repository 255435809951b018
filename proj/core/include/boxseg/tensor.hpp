#pragma once

#include <string>
#include <vector>

namespace boxseg {

int shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Dense row-major tensor of doubles. Plain value type: construction validates
// the shape, after that the contents are treated as immutable by everything
// that shares a tensor. Gradients are tracked per graph node, not here
// (see graph.hpp).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  // Validates length and finiteness of `values`.
  static Tensor from_data(std::vector<int> s, std::vector<double> values);
  static Tensor scalar(double v) { return from_data({1}, {v}); }

  int numel() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  double& at(int i) { return data[i]; }
  double at(int i) const { return data[i]; }

  // [H,W]
  double& at2(int r, int c) { return data[r * shape[1] + c]; }
  double at2(int r, int c) const { return data[r * shape[1] + c]; }

  // [C,H,W]
  double& at3(int c, int y, int x) { return data[(c * shape[1] + y) * shape[2] + x]; }
  double at3(int c, int y, int x) const { return data[(c * shape[1] + y) * shape[2] + x]; }

  // [K,C,kh,kw]
  double& at4(int k, int c, int i, int j) {
    return data[((k * shape[1] + c) * shape[2] + i) * shape[3] + j];
  }
  double at4(int k, int c, int i, int j) const {
    return data[((k * shape[1] + c) * shape[2] + i) * shape[3] + j];
  }
};

}  // namespace boxseg
