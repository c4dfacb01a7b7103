#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tta::lm {

// Dense row-major matrix of doubles. Small enough that plain loops are the
// whole story; every kernel here runs in a fixed order so results are
// reproducible bit-for-bit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// out = W x + b, W is (out x in).
void affine(const Matrix& w, std::span<const double> bias, std::span<const double> x,
            std::span<double> out);

// Returns A Bᵀ, i.e. (n x k) * (m x k)ᵀ -> (n x m). Used for logits = H W_LMᵀ.
Matrix multiply_transposed(const Matrix& a, const Matrix& b);

}  // namespace tta::lm
