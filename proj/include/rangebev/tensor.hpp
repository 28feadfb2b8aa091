#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rangebev/errors.hpp"

namespace rangebev {

/// Dense row-major tensor of 64-bit reals. All feature maps, parameters and
/// gradients in the project live in this type.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(static_cast<std::size_t>(numel(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (numel(shape) != static_cast<std::int64_t>(values.size()))
      throw usage_error("tensor: shape does not match value count");
  }

  static std::int64_t numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  /// Index into a C x H x W tensor.
  std::int64_t idx3(int c, int h, int w) const {
    return (static_cast<std::int64_t>(c) * shape[1] + h) * shape[2] + w;
  }
  double& at3(int c, int h, int w) { return values[static_cast<std::size_t>(idx3(c, h, w))]; }
  double at3(int c, int h, int w) const { return values[static_cast<std::size_t>(idx3(c, h, w))]; }

  void fill(double v) { values.assign(values.size(), v); }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

/// Trainable tensor with its gradient and Adam moment slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // first moment
  Tensor v;  // second moment

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(shape), m(shape), v(shape) {}

  void zero_grad() { grad.fill(0.0); }
  bool empty() const { return value.values.empty(); }
};

}  // namespace rangebev
