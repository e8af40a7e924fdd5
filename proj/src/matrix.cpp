#include "remest/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace remest {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  check_finite("Matrix");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: entry count does not match " + std::to_string(rows_) +
                                "x" + std::to_string(cols_));
  }
  check_finite("Matrix");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  check_finite("Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  m.check_finite("Matrix::diagonal");
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::symmetrized() const {
  if (!is_square()) throw std::invalid_argument("symmetrized: matrix is not square");
  Matrix s(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) s(r, c) = 0.5 * ((*this)(r, c) + (*this)(c, r));
  return s;
}

double Matrix::trace() const {
  if (!is_square()) throw std::invalid_argument("trace: matrix is not square");
  double t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Matrix::inf_norm() const {
  double m = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (double v : row_span(r)) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

std::vector<double> Matrix::diagonal_entries() const {
  std::vector<double> d(std::min(rows_, cols_));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
  return d;
}

std::vector<double> Matrix::row_sums() const {
  std::vector<double> s(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (double v : row_span(r)) s[r] += v;
  return s;
}

std::vector<double> Matrix::col_sums() const {
  std::vector<double> s(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) s[c] += (*this)(r, c);
  return s;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Matrix::is_symmetric(double tol) const {
  if (!is_square()) return false;
  const double scale = std::max(1.0, max_abs());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      if (std::abs((*this)(r, c) - (*this)(c, r)) > tol * scale) return false;
  return true;
}

Matrix Matrix::submatrix(std::span<const std::size_t> row_idx,
                         std::span<const std::size_t> col_idx) const {
  Matrix s(row_idx.size(), col_idx.size());
  for (std::size_t r = 0; r < row_idx.size(); ++r)
    for (std::size_t c = 0; c < col_idx.size(); ++c) s(r, c) = (*this)(row_idx[r], col_idx[c]);
  return s;
}

Matrix Matrix::hcat(const Matrix& other) const {
  if (other.rows_ != rows_) throw std::invalid_argument("hcat: row count mismatch");
  Matrix out(rows_, cols_ + other.cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out(r, c) = (*this)(r, c);
    for (std::size_t c = 0; c < other.cols_; ++c) out(r, cols_ + c) = other(r, c);
  }
  return out;
}

Matrix Matrix::vcat(const Matrix& other) const {
  if (other.cols_ != cols_) throw std::invalid_argument("vcat: column count mismatch");
  std::vector<double> d = data_;
  d.insert(d.end(), other.data_.begin(), other.data_.end());
  return Matrix(rows_ + other.rows_, cols_, std::move(d));
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("operator+: dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  check_finite("operator+");
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("operator-: dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  check_finite("operator-");
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  check_finite("operator*");
  return *this;
}

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols_ != rhs.rows_) {
    throw std::invalid_argument("operator*: inner dimensions " + std::to_string(lhs.cols_) +
                                " and " + std::to_string(rhs.rows_) + " differ");
  }
  Matrix out(lhs.rows_, rhs.cols_);
  for (std::size_t r = 0; r < lhs.rows_; ++r) {
    for (std::size_t k = 0; k < lhs.cols_; ++k) {
      const double a = lhs(r, k);
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < rhs.cols_; ++c) out(r, c) += a * rhs(k, c);
    }
  }
  out.check_finite("operator*");
  return out;
}

std::string Matrix::to_string() const {
  std::ostringstream os;
  char buf[32];
  os << '[';
  for (std::size_t r = 0; r < rows_; ++r) {
    os << (r ? "; " : "");
    for (std::size_t c = 0; c < cols_; ++c) {
      std::snprintf(buf, sizeof buf, "%.6g", (*this)(r, c));
      os << (c ? " " : "") << buf;
    }
  }
  os << ']';
  return os.str();
}

void Matrix::check_finite(const char* what) const {
  if (!all_finite()) throw NumericError(std::string(what) + ": non-finite entry");
}

Vector multiply(const Matrix& z, std::span<const double> x) {
  if (z.cols() != x.size()) throw std::invalid_argument("multiply: dimension mismatch");
  Vector y(z.rows(), 0.0);
  for (std::size_t r = 0; r < z.rows(); ++r) y[r] = dot(z.row_span(r), x);
  return y;
}

Vector left_multiply(std::span<const double> x, const Matrix& z) {
  if (z.rows() != x.size()) throw std::invalid_argument("left_multiply: dimension mismatch");
  Vector y(z.cols(), 0.0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (x[r] == 0.0) continue;
    for (std::size_t c = 0; c < z.cols(); ++c) y[c] += x[r] * z(r, c);
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix power(const Matrix& z, unsigned k) {
  if (!z.is_square()) throw std::invalid_argument("power: matrix is not square");
  Matrix result = Matrix::identity(z.rows());
  Matrix base = z;
  while (k > 0) {
    if (k & 1u) result = result * base;
    k >>= 1u;
    if (k > 0) base = base * base;
  }
  return result;
}

}  // namespace remest
