#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "mtp/rng.hpp"

namespace mtp {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EigenRowMajor>;
using ConstMatMap = Eigen::Map<const EigenRowMajor>;

// Dense row-major double matrix. Values are immutable by convention once a
// matrix leaves the module that built it; arithmetic goes through Eigen maps.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  MatMap map() { return MatMap(data.data(), rows, cols); }
  ConstMatMap map() const { return ConstMatMap(data.data(), rows, cols); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

// Entries i.i.d. N(0, 1) * scale. Row-major draw order (fixed contract, so a
// given seed yields the same matrix everywhere).
Matrix gaussian_matrix(int rows, int cols, double scale, RngStream& rng);

Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace mtp
