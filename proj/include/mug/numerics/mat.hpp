#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mug/error.hpp"

namespace mug {

// Dense row-major matrix of doubles.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Mat(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw DimensionError("Mat: data length " + std::to_string(data.size()) + " != " + std::to_string(r) + "x" + std::to_string(c));
  }
  Mat(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& row : init) {
      if (row.size() != cols) throw DimensionError("Mat: ragged initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
  }

  static Mat zeros(std::size_t r, std::size_t c) { return Mat(r, c, 0.0); }
  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Mat(1, n, std::move(v));
  }
  static Mat scalar(double v) { return Mat(1, 1, v); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  bool same_shape(const Mat& o) const noexcept { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Mat& a, const Mat& b) { return a.rows == b.rows && a.cols == b.cols && a.data == b.data; }
};

inline std::string shape_str(const Mat& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

inline void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

namespace kernels {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap view(const Mat& m) { return ConstMap(m.data.data(), Eigen::Index(m.rows), Eigen::Index(m.cols)); }
inline MutMap view(Mat& m) { return MutMap(m.data.data(), Eigen::Index(m.rows), Eigen::Index(m.cols)); }

// C = op(A) * op(B), optionally accumulating into C.
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat c(a.rows, b.cols);
  if (!c.empty() && a.cols > 0) view(c).noalias() = view(a) * view(b);
  return c;
}

// a^T * b
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw DimensionError("matmul_tn: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat c(a.cols, b.cols);
  if (!c.empty() && a.rows > 0) view(c).noalias() = view(a).transpose() * view(b);
  return c;
}

// a * b^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) throw DimensionError("matmul_nt: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat c(a.rows, b.rows);
  if (!c.empty() && a.cols > 0) view(c).noalias() = view(a) * view(b).transpose();
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline void axpy(double alpha, const Mat& x, Mat& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline Mat scaled(const Mat& a, double s) {
  Mat r = a;
  for (double& v : r.data) v *= s;
  return r;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline Mat select_rows(const Mat& a, const std::vector<std::size_t>& idx) {
  Mat r(idx.size(), a.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(a.row_ptr(idx[i]), a.cols, r.row_ptr(i));
  return r;
}

// Row-wise L2 normalization; zero rows stay zero.
inline Mat row_normalized(const Mat& a) {
  Mat r = a;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* p = r.row_ptr(i);
    const double n = std::sqrt(dot(p, p, a.cols));
    if (n > 0.0)
      for (std::size_t j = 0; j < a.cols; ++j) p[j] /= n;
  }
  return r;
}

inline Mat hconcat(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw DimensionError("hconcat: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat r(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::copy_n(a.row_ptr(i), a.cols, r.row_ptr(i));
    std::copy_n(b.row_ptr(i), b.cols, r.row_ptr(i) + a.cols);
  }
  return r;
}

}  // namespace kernels
}  // namespace mug
