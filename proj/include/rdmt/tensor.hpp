#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdmt::nd {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::int64_t rows = 0;
  std::int64_t cols = 0;

  std::int64_t numel() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline Shape row_vec(std::int64_t n) { return {1, n}; }
inline Shape col_vec(std::int64_t n) { return {n, 1}; }
inline Shape scalar_shape() { return {1, 1}; }

// Dense row-major 64-bit float tensor. grad is allocated iff requires_grad.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(Shape s, bool needs_grad = false) { resize(s, needs_grad); }

  void resize(Shape s, bool needs_grad) {
    shape = s;
    data.assign(static_cast<std::size_t>(s.numel()), 0.0);
    requires_grad = needs_grad;
    if (needs_grad) grad.assign(data.size(), 0.0);
  }

  std::size_t numel() const { return data.size(); }
  double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * shape.cols + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * shape.cols + c)]; }
  double* row(std::int64_t r) { return data.data() + r * shape.cols; }
  const double* row(std::int64_t r) const { return data.data() + r * shape.cols; }
  double* grad_row(std::int64_t r) { return grad.data() + r * shape.cols; }

  void zero_grad() {
    if (requires_grad) grad.assign(data.size(), 0.0);
  }
};

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    throw ShapeMismatch(std::string(op) + ": shape " + a.str() + " vs " + b.str());
  }
}

}  // namespace rdmt::nd
