#pragma once

#include <cstddef>
#include <vector>

namespace loralab {

/// Dense row-major matrix of doubles. Rows are the unit every kernel
/// operates on, so row pointers are the main access path.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void release() {
    rows = cols = 0;
    data.clear();
    data.shrink_to_fit();
  }
};

}  // namespace loralab
