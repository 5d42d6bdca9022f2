#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nis {

// Dense row-major tensor of 64-bit floats. Value-semantic; shape is fixed at
// construction and the element count always equals the product of extents.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> extents);
  Tensor(std::vector<std::int64_t> extents, std::vector<double> values);

  static Tensor scalar(double x);
  static Tensor zeros_like(const Tensor& t);

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
  bool is_scalar() const { return shape.empty() || (shape.size() == 1 && shape[0] == 1); }

  // 2-D accessors; rank is checked.
  std::int64_t rows() const;
  std::int64_t cols() const;
  double& at(std::int64_t r, std::int64_t c);
  double at(std::int64_t r, std::int64_t c) const;

  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);

}  // namespace nis
