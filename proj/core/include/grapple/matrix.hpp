#pragma once

#include <string>
#include <vector>

namespace grapple {

// Dense rank-2 float64 grid, row-major. The only tensor shape in the
// engine; vectors are n x 1 or 1 x n as context demands.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
  static Matrix ones(int r, int c) { return Matrix(r, c, 1.0); }

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  int size() const { return rows * cols; }
  bool empty() const { return rows == 0 || cols == 0; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar() const;

  bool all_finite() const;
};

std::string shape_str(const Matrix& m);

// Value-level kernels. The tape wraps these for autodiff; tests and
// oracles call them directly. All of them validate shapes/domains and
// throw Error on violation.
Matrix matmul(const Matrix& a, const Matrix& b);      // a(m,k) * b(k,n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);   // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);   // a * b^T
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);  // elementwise
Matrix div(const Matrix& a, const Matrix& b);  // elementwise; b must be nonzero everywhere
Matrix scale(const Matrix& a, double s);
Matrix add_scalar(const Matrix& a, double s);

Matrix relu(const Matrix& a);
Matrix max_const(const Matrix& a, double c);
Matrix exp_elem(const Matrix& a);
Matrix log_elem(const Matrix& a);   // domain: strictly positive
Matrix sqrt_elem(const Matrix& a);  // domain: nonnegative

Matrix softmax_rows(const Matrix& a);  // numerically stable, per row
Matrix sum_rows(const Matrix& a);      // n x 1
Matrix mean_rows(const Matrix& a);     // n x 1
double sum_all(const Matrix& a);
double mean_all(const Matrix& a);
Matrix l2norm_rows(const Matrix& a);   // n x 1 Euclidean norms

Matrix concat_cols(const Matrix& a, const Matrix& b);
Matrix gather_rows(const Matrix& a, const std::vector<int>& idx);
// out[dst[k]] += src[k]; out has out_rows rows.
Matrix scatter_add_rows(const Matrix& src, const std::vector<int>& dst, int out_rows);
Matrix broadcast_row(const Matrix& row, int n);  // 1 x d -> n x d

bool approx_equal(const Matrix& a, const Matrix& b, double tol);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace grapple
