#include "tta/lm/matrix.hpp"

#include <cmath>

#include "tta/errors.hpp"

namespace tta::lm {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data size " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void affine(const Matrix& w, std::span<const double> bias, std::span<const double> x,
            std::span<double> out) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    out[r] = dot(w.row(r), x) + bias[r];
  }
}

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("inner dimensions differ: " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) oi[j] = dot(ai, b.row(j));
  }
  return out;
}

}  // namespace tta::lm
