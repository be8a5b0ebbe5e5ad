#include "fedlwf/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fedlwf/errors.hpp"

namespace fedlwf {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) +
                     " values, expected " + dims(rows, cols));
  }
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a.rows(), a.cols()) + " * " + dims(b.rows(), b.cols()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.row(i).data();
    const double* ai = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * bp[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: transpose(" + dims(a.rows(), a.cols()) + ") * " +
                     dims(b.rows(), b.cols()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(k, n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* ar = a.row(r).data();
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double s = ar[i];
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + dims(a.rows(), a.cols()) + " * transpose(" +
                     dims(b.rows(), b.cols()) + ")");
  }
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  Matrix out(m, k);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.row(i).data();
    double* o = out.row(i).data();
    for (std::size_t j = 0; j < k; ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) s += ai[p] * bj[p];
      o[j] = s;
    }
  }
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(indices[i]) + " of " +
                       std::to_string(m.rows()));
    }
    const auto src = m.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  const double inv_t = 1.0 / temperature;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto in = logits.row(r);
    auto o = out.row(r);
    double mx = -INFINITY;
    for (double z : in) mx = std::max(mx, z * inv_t);
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] * inv_t - mx);
      sum += o[c];
    }
    for (double& p : o) p /= sum;
  }
  return out;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) noexcept {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept {
  return a.rows() == b.rows() && a.cols() == b.cols() && bitwise_equal(a.values(), b.values());
}

}  // namespace fedlwf
