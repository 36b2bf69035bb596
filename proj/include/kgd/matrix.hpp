#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "kgd/errors.hpp"

namespace kgd {

/// Dense row-major matrix of doubles — the only tensor type in the project.
/// Every ℝ^{a×b} object (token tables, span representations, teacher blocks)
/// is one of these.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  void fill(double v) { values_.assign(values_.size(), v); }
  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

std::string shape_str(const Matrix& m);
void require_same_shape(const char* op, const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);     // a(n×k) · b(k×m)
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a(n×d) · bᵀ(d×m), b is m×d
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ(k×n) · b(n×m), a is n×k
Matrix transpose(const Matrix& m);
Matrix concat_cols(const Matrix& a, const Matrix& b);
Matrix relu(const Matrix& m);

/// Scales every row to unit L2 norm (rows with zero norm are left alone).
void normalize_rows(Matrix& m);

}  // namespace kgd
