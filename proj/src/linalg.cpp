// SPDX-License-Identifier: Apache-2.0
#include "csforge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "csforge/errors.hpp"

namespace csforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::domain: return "domain";
    case ErrorKind::definiteness: return "definiteness";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::solver: return "solver";
    case ErrorKind::case_mismatch: return "case_mismatch";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::dimension, "ragged matrix literal");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::column(const Vector& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  require(r0 + nr <= rows_ && c0 + nc <= cols_, ErrorKind::dimension, "block out of range");
  Matrix b(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    std::copy_n(row_ptr(r0 + i) + c0, nc, b.row_ptr(i));
  return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
  require(r0 + b.rows() <= rows_ && c0 + b.cols() <= cols_, ErrorKind::dimension,
          "set_block out of range");
  for (std::size_t i = 0; i < b.rows(); ++i)
    std::copy_n(b.row_ptr(i), b.cols(), row_ptr(r0 + i) + c0);
}

Vector Matrix::col(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, c);
  return v;
}

Vector Matrix::row(std::size_t r) const { return Vector(row_ptr(r), row_ptr(r) + cols_); }

Vector Matrix::diag() const {
  const std::size_t n = std::min(rows_, cols_);
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (*this)(i, i);
  return d;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require(rows_ == o.rows_ && cols_ == o.cols_, ErrorKind::dimension, "matrix + shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require(rows_ == o.rows_ && cols_ == o.cols_, ErrorKind::dimension, "matrix - shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::dimension, "matrix product shape mismatch");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row_ptr(i);
    const double* ai = a.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row_ptr(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Vector operator*(const Matrix& a, const Vector& x) {
  require(a.cols() == x.size(), ErrorKind::dimension, "matvec shape mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

Matrix transpose_times(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::dimension, "aᵀb shape mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row_ptr(k);
    const double* bk = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix times_transpose(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::dimension, "abᵀ shape mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row_ptr(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

Vector transpose_times(const Matrix& a, const Vector& x) {
  require(a.rows() == x.size(), ErrorKind::dimension, "aᵀx shape mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* ak = a.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) y[i] += ak[i] * xk;
  }
  return y;
}

double trace(const Matrix& m) {
  require(m.square(), ErrorKind::dimension, "trace of non-square matrix");
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.storage()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.storage()) s = std::max(s, std::abs(v));
  return s;
}

double dot(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::dimension, "dot size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

Matrix symmetrize(const Matrix& m) {
  require(m.square(), ErrorKind::dimension, "symmetrize of non-square matrix");
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

Matrix columns(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix c(m.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    require(idx[j] < m.cols(), ErrorKind::dimension, "column index out of range");
    for (std::size_t i = 0; i < m.rows(); ++i) c(i, j) = m(i, idx[j]);
  }
  return c;
}

Matrix submatrix(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix s(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) s(i, j) = m(idx[i], idx[j]);
  return s;
}

Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix m(a.rows() + b.rows(), a.cols() + b.cols());
  m.set_block(0, 0, a);
  m.set_block(a.rows(), a.cols(), b);
  return m;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::dimension, "vstack column mismatch");
  Matrix m(a.rows() + b.rows(), a.cols());
  m.set_block(0, 0, a);
  m.set_block(a.rows(), 0, b);
  return m;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::dimension, "hstack row mismatch");
  Matrix m(a.rows(), a.cols() + b.cols());
  m.set_block(0, 0, a);
  m.set_block(0, a.cols(), b);
  return m;
}

bool all_finite(const Matrix& m) {
  for (double v : m.storage())
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymEig sym_eig(const Matrix& m) {
  require(m.square(), ErrorKind::dimension, "sym_eig needs a square matrix");
  const std::size_t n = m.rows();
  SymEig out;
  if (n == 0) return out;
  Matrix a = symmetrize(m);
  require(all_finite(a), ErrorKind::domain, "sym_eig input has non-finite entries");
  Matrix v = Matrix::identity(n);

  const double thresh = 1e-12 * frobenius_norm(a);
  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  double off = off_diagonal_norm(a);
  for (; sweep < kMaxSweeps && off > thresh; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // negligible against both diagonal entries: drop it
        if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
            std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        double* rp = a.row_ptr(p);
        double* rq = a.row_ptr(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = rp[k];
          const double aqk = rq[k];
          rp[k] = c * apk - s * aqk;
          rq[k] = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          double* vk = v.row_ptr(k);
          const double vkp = vk[p];
          const double vkq = vk[q];
          vk[p] = c * vkp - s * vkq;
          vk[q] = s * vkp + c * vkq;
        }
      }
    }
    off = off_diagonal_norm(a);
  }
  if (off > thresh) {
    std::ostringstream msg;
    msg << "sym_eig did not converge after " << kMaxSweeps << " sweeps, off-diagonal residual "
        << off;
    fail(ErrorKind::solver, msg.str());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  out.sweeps = sweep;
  return out;
}

Matrix psd_project(const Matrix& m) {
  const SymEig e = sym_eig(m);
  return spectral_map(e, [](double x) { return x > 0.0 ? x : 0.0; });
}

Matrix orthonormal_columns(const Matrix& a, double tol) {
  const std::size_t n = a.rows();
  std::vector<Vector> kept;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    Vector v = a.col(j);
    const double n0 = norm2(v);
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : kept) {
        const double d = dot(q, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= d * q[i];
      }
    const double nv = norm2(v);
    if (nv <= tol * n0) continue;
    for (double& x : v) x /= nv;
    kept.push_back(std::move(v));
  }
  Matrix q(n, kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) q(i, j) = kept[j][i];
  return q;
}

Svd svd_thin(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t l = a.cols();
  require(m <= l, ErrorKind::dimension, "svd_thin needs rows <= cols");
  const SymEig e = sym_eig(times_transpose(a, a));
  const Matrix atu = transpose_times(a, e.vectors);  // L×M, column i = aᵀuᵢ

  Vector sig(m);
  for (std::size_t i = 0; i < m; ++i) sig[i] = norm2(atu.col(i));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sig[i] > sig[j]; });

  Svd out;
  out.u = Matrix(m, m);
  out.sigma.resize(m);
  out.v = Matrix(l, m);
  const double smax = m ? sig[order[0]] : 0.0;
  const double tiny = smax * 1e-14 * static_cast<double>(l);
  std::vector<bool> filled(m, false);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = order[k];
    out.sigma[k] = sig[i];
    for (std::size_t r = 0; r < m; ++r) out.u(r, k) = e.vectors(r, i);
    if (sig[i] > tiny && sig[i] > 0.0) {
      for (std::size_t r = 0; r < l; ++r) out.v(r, k) = atu(r, i) / sig[i];
      filled[k] = true;
    }
  }

  // re-orthogonalize in σ order, then complete null directions from the
  // standard basis
  std::vector<Vector> basis;
  for (std::size_t k = 0; k < m; ++k) {
    if (!filled[k]) continue;
    Vector v = out.v.col(k);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : basis) {
        const double d = dot(q, v);
        for (std::size_t r = 0; r < l; ++r) v[r] -= d * q[r];
      }
    const double nv = norm2(v);
    if (nv < 0.5) {
      filled[k] = false;
      continue;
    }
    for (std::size_t r = 0; r < l; ++r) out.v(r, k) = v[r] / nv;
    basis.push_back(out.v.col(k));
  }
  std::size_t next = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (filled[k]) continue;
    for (; next < l; ++next) {
      Vector v(l, 0.0);
      v[next] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const Vector& q : basis) {
          const double d = dot(q, v);
          for (std::size_t r = 0; r < l; ++r) v[r] -= d * q[r];
        }
      const double nv = norm2(v);
      if (nv > 1e-6) {
        for (std::size_t r = 0; r < l; ++r) out.v(r, k) = v[r] / nv;
        basis.push_back(out.v.col(k));
        ++next;
        break;
      }
    }
  }
  return out;
}

Matrix cholesky(const Matrix& m) {
  require(m.square(), ErrorKind::dimension, "cholesky needs a square matrix");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    const double* lj = l.row_ptr(j);
    for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream msg;
      msg << "matrix is not positive definite (pivot " << j << " = " << d << ")";
      fail(ErrorKind::definiteness, msg.str());
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      const double* li = l.row_ptr(i);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Vector forward_substitute(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  require(b.size() == n, ErrorKind::dimension, "forward substitution size mismatch");
  Vector y(b);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = l.row_ptr(i);
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * y[k];
    y[i] = s / li[i];
  }
  return y;
}

Matrix forward_substitute(const Matrix& l, const Matrix& b) {
  const std::size_t n = l.rows();
  require(b.rows() == n, ErrorKind::dimension, "forward substitution size mismatch");
  Matrix y(b);
  const std::size_t c = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y.row_ptr(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      if (lik == 0.0) continue;
      const double* yk = y.row_ptr(k);
      for (std::size_t j = 0; j < c; ++j) yi[j] -= lik * yk[j];
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t j = 0; j < c; ++j) yi[j] *= inv;
  }
  return y;
}

Vector cholesky_solve(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  Vector y = forward_substitute(l, b);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * y[k];
    y[ii] = s / l(ii, ii);
  }
  return y;
}

Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  const std::size_t n = l.rows();
  Matrix y = forward_substitute(l, b);
  const std::size_t c = b.cols();
  for (std::size_t ii = n; ii-- > 0;) {
    double* yi = y.row_ptr(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l(k, ii);
      if (lki == 0.0) continue;
      const double* yk = y.row_ptr(k);
      for (std::size_t j = 0; j < c; ++j) yi[j] -= lki * yk[j];
    }
    const double inv = 1.0 / l(ii, ii);
    for (std::size_t j = 0; j < c; ++j) yi[j] *= inv;
  }
  return y;
}

double log_det_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Matrix solve_spd(const Matrix& m, const Matrix& b) {
  require(m.rows() == b.rows(), ErrorKind::dimension, "solve_spd size mismatch");
  return cholesky_solve(cholesky(symmetrize(m)), b);
}

Vector solve_spd(const Matrix& m, const Vector& b) {
  require(m.rows() == b.size(), ErrorKind::dimension, "solve_spd size mismatch");
  return cholesky_solve(cholesky(symmetrize(m)), b);
}

Matrix inverse_spd(const Matrix& m) {
  return symmetrize(solve_spd(m, Matrix::identity(m.rows())));
}

double trace_inverse_spd(const Matrix& m) {
  // Tr(m⁻¹) = ‖L⁻¹‖_F²
  const Matrix l = cholesky(symmetrize(m));
  const Matrix li = forward_substitute(l, Matrix::identity(m.rows()));
  const double f = frobenius_norm(li);
  return f * f;
}

Matrix pinv(const Matrix& a) {
  if (a.empty()) return Matrix(a.cols(), a.rows());
  const bool wide = a.rows() <= a.cols();
  const Svd s = svd_thin(wide ? a : a.transpose());
  const double smax = s.sigma.empty() ? 0.0 : s.sigma[0];
  const double tol =
      smax * 1e-9 * static_cast<double>(std::max(a.rows(), a.cols()));
  // wide: a = UΣVᵀ, a⁺ = VΣ⁺Uᵀ; tall: aᵀ = UΣVᵀ, a⁺ = UΣ⁺Vᵀ
  const Matrix& left = wide ? s.v : s.u;
  const Matrix& right = wide ? s.u : s.v;
  Matrix out(a.cols(), a.rows());
  for (std::size_t k = 0; k < s.sigma.size(); ++k) {
    if (s.sigma[k] <= tol) continue;
    const double inv = 1.0 / s.sigma[k];
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const double li = left(i, k) * inv;
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += li * right(j, k);
    }
  }
  return out;
}

}  // namespace csforge
