#include "grapple/matrix.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "grapple/error.hpp"

namespace grapple {

namespace {

using EigenMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EigenCMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

EigenCMap emap(const Matrix& m) { return EigenCMap(m.a.data(), m.rows, m.cols); }
EigenMap emap(Matrix& m) { return EigenMap(m.a.data(), m.rows, m.cols); }

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  check(a.same_shape(b), std::string(op) + ": shape mismatch " + shape_str(a) +
                             " vs " + shape_str(b));
}

}  // namespace

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c) {
  check(r >= 0 && c >= 0, "Matrix: negative dimension");
  a.assign(static_cast<size_t>(r) * c, fill);
}

double Matrix::scalar() const {
  check(is_scalar(), "scalar() on non-1x1 matrix " + shape_str(*this));
  return a[0];
}

bool Matrix::all_finite() const {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check(a.cols == b.rows,
        "matmul: inner dimensions disagree " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows, b.cols);
  emap(out).noalias() = emap(a) * emap(b);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check(a.rows == b.rows,
        "matmul_tn: row counts disagree " + shape_str(a) + " vs " + shape_str(b));
  Matrix out(a.cols, b.cols);
  emap(out).noalias() = emap(a).transpose() * emap(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check(a.cols == b.cols,
        "matmul_nt: col counts disagree " + shape_str(a) + " vs " + shape_str(b));
  Matrix out(a.rows, b.rows);
  emap(out).noalias() = emap(a) * emap(b).transpose();
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] + b.a[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "sub");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] - b.a[i];
  return out;
}

Matrix mul(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "mul");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] * b.a[i];
  return out;
}

Matrix div(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "div");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) {
    check(b.a[i] != 0.0, "div: division by zero at flat index " + std::to_string(i));
    out.a[i] = a.a[i] / b.a[i];
  }
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] * s;
  return out;
}

Matrix add_scalar(const Matrix& a, double s) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] + s;
  return out;
}

Matrix relu(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] > 0.0 ? a.a[i] : 0.0;
  return out;
}

Matrix max_const(const Matrix& a, double c) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = a.a[i] > c ? a.a[i] : c;
  return out;
}

Matrix exp_elem(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) out.a[i] = std::exp(a.a[i]);
  return out;
}

Matrix log_elem(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) {
    check(a.a[i] > 0.0, "log: nonpositive input at flat index " + std::to_string(i));
    out.a[i] = std::log(a.a[i]);
  }
  return out;
}

Matrix sqrt_elem(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.size(); ++i) {
    check(a.a[i] >= 0.0, "sqrt: negative input at flat index " + std::to_string(i));
    out.a[i] = std::sqrt(a.a[i]);
  }
  return out;
}

Matrix softmax_rows(const Matrix& a) {
  check(a.cols >= 1, "softmax_rows: empty rows");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* src = a.row(i);
    double* dst = out.row(i);
    double mx = src[0];
    for (int j = 1; j < a.cols; ++j) mx = std::max(mx, src[j]);
    double sum = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    for (int j = 0; j < a.cols; ++j) dst[j] /= sum;
  }
  return out;
}

Matrix sum_rows(const Matrix& a) {
  Matrix out(a.rows, 1);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a.at(i, j);
    out.at(i, 0) = s;
  }
  return out;
}

Matrix mean_rows(const Matrix& a) {
  check(a.cols > 0, "mean_rows: zero columns");
  Matrix out = sum_rows(a);
  for (int i = 0; i < out.size(); ++i) out.a[i] /= a.cols;
  return out;
}

double sum_all(const Matrix& a) {
  double s = 0.0;
  for (double v : a.a) s += v;
  return s;
}

double mean_all(const Matrix& a) {
  check(a.size() > 0, "mean_all: empty matrix");
  return sum_all(a) / a.size();
}

Matrix l2norm_rows(const Matrix& a) {
  Matrix out(a.rows, 1);
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += a.at(i, j) * a.at(i, j);
    out.at(i, 0) = std::sqrt(s);
  }
  return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  check(a.rows == b.rows,
        "concat_cols: row counts disagree " + shape_str(a) + " vs " + shape_str(b));
  Matrix out(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    std::copy(a.row(i), a.row(i) + a.cols, out.row(i));
    std::copy(b.row(i), b.row(i) + b.cols, out.row(i) + a.cols);
  }
  return out;
}

Matrix gather_rows(const Matrix& a, const std::vector<int>& idx) {
  Matrix out(static_cast<int>(idx.size()), a.cols);
  for (size_t k = 0; k < idx.size(); ++k) {
    check(idx[k] >= 0 && idx[k] < a.rows,
          "gather_rows: index " + std::to_string(idx[k]) + " out of range [0," +
              std::to_string(a.rows) + ")");
    std::copy(a.row(idx[k]), a.row(idx[k]) + a.cols, out.row(static_cast<int>(k)));
  }
  return out;
}

Matrix scatter_add_rows(const Matrix& src, const std::vector<int>& dst, int out_rows) {
  check(static_cast<int>(dst.size()) == src.rows,
        "scatter_add_rows: index count " + std::to_string(dst.size()) +
            " != source rows " + std::to_string(src.rows));
  Matrix out(out_rows, src.cols);
  for (int k = 0; k < src.rows; ++k) {
    check(dst[k] >= 0 && dst[k] < out_rows,
          "scatter_add_rows: index " + std::to_string(dst[k]) + " out of range [0," +
              std::to_string(out_rows) + ")");
    double* o = out.row(dst[k]);
    const double* s = src.row(k);
    for (int j = 0; j < src.cols; ++j) o[j] += s[j];
  }
  return out;
}

Matrix broadcast_row(const Matrix& row, int n) {
  check(row.rows == 1, "broadcast_row: expected 1-row matrix, got " + shape_str(row));
  Matrix out(n, row.cols);
  for (int i = 0; i < n; ++i)
    std::copy(row.row(0), row.row(0) + row.cols, out.row(i));
  return out;
}

bool approx_equal(const Matrix& a, const Matrix& b, double tol) {
  if (!a.same_shape(b)) return false;
  return max_abs_diff(a, b) <= tol;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  check(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.a[i] - b.a[i]));
  return m;
}

}  // namespace grapple
