// SPDX-License-Identifier: Apache-2.0
//
// Small dense kernels. Everything here is row-major double and sized for
// the problems this library sees (a few hundred rows at most).
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace csforge {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vector& d);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(const Vector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& storage() const { return data_; }

  Matrix transpose() const;
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& b);
  Vector col(std::size_t c) const;
  Vector row(std::size_t r) const;
  Vector diag() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, const Vector& x);

Matrix transpose_times(const Matrix& a, const Matrix& b);  // aᵀb
Matrix times_transpose(const Matrix& a, const Matrix& b);  // abᵀ
Vector transpose_times(const Matrix& a, const Vector& x);  // aᵀx

double trace(const Matrix& m);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
Matrix symmetrize(const Matrix& m);
Matrix columns(const Matrix& m, const std::vector<std::size_t>& idx);
Matrix submatrix(const Matrix& m, const std::vector<std::size_t>& idx);
Matrix block_diagonal(const Matrix& a, const Matrix& b);
Matrix vstack(const Matrix& a, const Matrix& b);
Matrix hstack(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
  int sweeps = 0;
};

SymEig sym_eig(const Matrix& m);
Matrix psd_project(const Matrix& m);

// f applied to the spectrum of a symmetric matrix
template <class F>
Matrix spectral_map(const SymEig& e, F f) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(e.values[k]);
    if (fk == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = e.vectors(i, k) * fk;
      if (vik == 0.0) continue;
      double* out_row = out.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j) out_row[j] += vik * e.vectors(j, k);
    }
  }
  return out;
}

struct Svd {
  Matrix u;        // M×M
  Vector sigma;    // M, descending
  Matrix v;        // L×M
};

Svd svd_thin(const Matrix& a);

// lower-triangular factor; throws definiteness error on a non-positive pivot
Matrix cholesky(const Matrix& m);
Matrix cholesky_solve(const Matrix& l, const Matrix& b);
Vector cholesky_solve(const Matrix& l, const Vector& b);
Matrix forward_substitute(const Matrix& l, const Matrix& b);
Vector forward_substitute(const Matrix& l, const Vector& b);
double log_det_from_cholesky(const Matrix& l);

Matrix solve_spd(const Matrix& m, const Matrix& b);
Vector solve_spd(const Matrix& m, const Vector& b);
Matrix inverse_spd(const Matrix& m);
double trace_inverse_spd(const Matrix& m);
Matrix pinv(const Matrix& a);

// Gram–Schmidt: orthonormalize columns of a in order, dropping dependent ones
Matrix orthonormal_columns(const Matrix& a, double tol = 1e-10);

}  // namespace csforge
