#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedlwf {

/// Dense row-major matrix of doubles. The single numeric carrier for
/// weights, activations and gradients.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Throws ShapeError unless data.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

  [[nodiscard]] bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a[m x k] * b[k x n]
[[nodiscard]] Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a)[k x m] * b[m x n], without materializing the transpose.
[[nodiscard]] Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a[m x n] * transpose(b)[n x k]
[[nodiscard]] Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Rows of `m` selected by `indices`, in that order.
[[nodiscard]] Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Row-wise softmax of logits / temperature with max subtraction.
[[nodiscard]] Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

/// Bit-for-bit comparison (distinguishes -0.0 from 0.0, equal NaN payloads compare equal).
[[nodiscard]] bool bitwise_equal(std::span<const double> a, std::span<const double> b) noexcept;
[[nodiscard]] bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept;

}  // namespace fedlwf
