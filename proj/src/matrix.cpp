#include "mtp/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace mtp {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix gaussian_matrix(int rows, int cols, double scale, RngStream& rng) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("gaussian_matrix: dimensions must be >= 1");
  if (!std::isfinite(scale))
    throw std::invalid_argument("gaussian_matrix: scale must be finite");
  Matrix m(rows, cols);
  for (double& v : m.data) v = scale * rng.gaussian();
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix out(a.rows, b.cols);
  out.map().noalias() = a.map() * b.map();
  return out;
}

}  // namespace mtp
