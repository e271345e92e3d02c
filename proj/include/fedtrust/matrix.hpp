#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fedtrust {

// Minimal dense row-major matrix; all the training code needs.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return data[r * cols + c]; }

  const double* row(size_t r) const { return data.data() + r * cols; }
  double* row(size_t r) { return data.data() + r * cols; }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  Matrix& operator+=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("matrix shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
  }

  Matrix& operator-=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("matrix shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] -= other.data[i];
    return *this;
  }

  Matrix& scale(double s) {
    for (auto& v : data) v *= s;
    return *this;
  }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace fedtrust
