#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace remest {

/// Thrown when a numeric routine cannot produce a finite or well-posed result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense real matrix stored row-major.
///
/// Sized for the small systems handled here (plant and channel matrices of a
/// few dozen rows at most). Every public operation leaves the entries finite;
/// an arithmetic result that overflows raises NumericError.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix diagonal(std::span<const double> values);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  bool is_square() const { return rows_ == cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> data() const { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  Matrix transpose() const;
  /// (X + Xᵀ) / 2.
  Matrix symmetrized() const;
  double trace() const;
  /// Largest absolute entry.
  double max_abs() const;
  /// Induced infinity norm (maximum absolute row sum).
  double inf_norm() const;
  std::vector<double> diagonal_entries() const;
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  bool all_finite() const;
  bool is_symmetric(double tol) const;

  /// Rows and columns picked by index, in the given order.
  Matrix submatrix(std::span<const std::size_t> row_idx, std::span<const std::size_t> col_idx) const;
  /// Horizontal concatenation [this, other].
  Matrix hcat(const Matrix& other) const;
  /// Vertical concatenation [this; other].
  Matrix vcat(const Matrix& other) const;

  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator-=(const Matrix& rhs);
  Matrix& operator*=(double s);

  friend Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
  friend Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
  friend Matrix operator*(Matrix lhs, double s) { return lhs *= s; }
  friend Matrix operator*(double s, Matrix rhs) { return rhs *= s; }
  friend Matrix operator*(const Matrix& lhs, const Matrix& rhs);
  friend bool operator==(const Matrix& lhs, const Matrix& rhs) = default;

  std::string to_string() const;

 private:
  void check_finite(const char* what) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Vector = std::vector<double>;

/// y = Z x.
Vector multiply(const Matrix& z, std::span<const double> x);
/// yᵀ = xᵀ Z.
Vector left_multiply(std::span<const double> x, const Matrix& z);
double dot(std::span<const double> a, std::span<const double> b);
double norm1(std::span<const double> v);
/// max_ij |a_ij - b_ij|.
double max_abs_diff(const Matrix& a, const Matrix& b);
/// Z^k by binary exponentiation (no rescaling; caller guards against overflow).
Matrix power(const Matrix& z, unsigned k);

}  // namespace remest
