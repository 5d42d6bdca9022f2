#include "nis/tensor.hpp"

#include <cmath>
#include <sstream>

#include "nis/errors.hpp"

namespace nis {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e <= 0) throw ContractViolation("tensor extent must be positive");
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<std::int64_t> extents)
    : shape(std::move(extents)), v(static_cast<std::size_t>(shape_numel(shape)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> extents, std::vector<double> values)
    : shape(std::move(extents)), v(std::move(values)) {
  if (shape_numel(shape) != static_cast<std::int64_t>(v.size()))
    throw ContractViolation("tensor value count does not match shape");
}

Tensor Tensor::scalar(double x) { return Tensor({1}, {x}); }

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape); }

std::int64_t Tensor::rows() const {
  if (shape.size() != 2) throw ContractViolation("rows() on non-matrix tensor " + shape_str());
  return shape[0];
}

std::int64_t Tensor::cols() const {
  if (shape.size() != 2) throw ContractViolation("cols() on non-matrix tensor " + shape_str());
  return shape[1];
}

double& Tensor::at(std::int64_t r, std::int64_t c) {
  return v[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
  return v[static_cast<std::size_t>(r * cols() + c)];
}

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

}  // namespace nis
