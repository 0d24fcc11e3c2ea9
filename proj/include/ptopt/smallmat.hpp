#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ptopt {

/// Fixed-capacity vector with runtime length. Storage is inline so solver
/// workspaces never allocate in the hot loop; the capacity is chosen once
/// from the problem dimensions.
template <int Cap>
struct Vec {
  static_assert(Cap >= 0, "capacity must be nonnegative");

  int n = Cap;
  std::array<double, static_cast<std::size_t>(Cap)> a{};

  Vec() = default;
  explicit Vec(int len) : n(len) {
    if (len < 0 || len > Cap)
      throw std::invalid_argument("Vec: length " + std::to_string(len) +
                                  " outside capacity " + std::to_string(Cap));
  }

  double& operator[](int i) { return a[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return a[static_cast<std::size_t>(i)]; }

  void set_zero() {
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = 0.0;
  }

  template <int C2>
  void assign(const Vec<C2>& other) {
    if (other.n > Cap)
      throw std::invalid_argument("Vec::assign: source length exceeds capacity");
    n = other.n;
    for (int i = 0; i < n; ++i) (*this)[i] = other[i];
  }
};

/// Dense row-major matrix with runtime shape inside a fixed capacity.
template <int RCap, int CCap>
struct Mat {
  static_assert(RCap >= 0 && CCap >= 0, "capacity must be nonnegative");

  int rows = RCap;
  int cols = CCap;
  std::array<double, static_cast<std::size_t>(RCap) * static_cast<std::size_t>(CCap)> a{};

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c) {
    if (r < 0 || r > RCap || c < 0 || c > CCap)
      throw std::invalid_argument("Mat: shape " + std::to_string(r) + "x" + std::to_string(c) +
                                  " outside capacity " + std::to_string(RCap) + "x" +
                                  std::to_string(CCap));
  }

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * cols + j)]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * cols + j)]; }

  void set_zero() {
    for (int i = 0; i < rows * cols; ++i) a[static_cast<std::size_t>(i)] = 0.0;
  }

  void set_identity() {
    set_zero();
    const int m = rows < cols ? rows : cols;
    for (int i = 0; i < m; ++i) (*this)(i, i) = 1.0;
  }
};

namespace detail {
inline std::string shape_str(int r, int c) {
  return std::to_string(r) + "x" + std::to_string(c);
}
}  // namespace detail

/// y = A x, or y = A^T x when `transpose` is set. Plain accumulation in
/// ascending index order, no blocking.
template <int RCap, int CCap, int VCap>
Vec<(RCap > CCap ? RCap : CCap)> mat_vec(const Mat<RCap, CCap>& A, const Vec<VCap>& x,
                                         bool transpose = false) {
  const int in_dim = transpose ? A.rows : A.cols;
  const int out_dim = transpose ? A.cols : A.rows;
  if (in_dim != x.n)
    throw std::invalid_argument("mat_vec: operator is " + detail::shape_str(A.rows, A.cols) +
                                (transpose ? " (transposed)" : "") + ", vector has length " +
                                std::to_string(x.n));
  Vec<(RCap > CCap ? RCap : CCap)> y(out_dim);
  if (!transpose) {
    for (int i = 0; i < A.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < A.cols; ++j) acc += A(i, j) * x[j];
      y[i] = acc;
    }
  } else {
    for (int j = 0; j < A.cols; ++j) {
      double acc = 0.0;
      for (int i = 0; i < A.rows; ++i) acc += A(i, j) * x[i];
      y[j] = acc;
    }
  }
  return y;
}

/// C = A B with the classic triple loop.
template <int RA, int CA, int RB, int CB>
Mat<RA, CB> mat_mat(const Mat<RA, CA>& A, const Mat<RB, CB>& B) {
  if (A.cols != B.rows)
    throw std::invalid_argument("mat_mat: " + detail::shape_str(A.rows, A.cols) + " times " +
                                detail::shape_str(B.rows, B.cols));
  Mat<RA, CB> C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < A.cols; ++k) acc += A(i, k) * B(k, j);
      C(i, j) = acc;
    }
  return C;
}

struct VecNorms {
  double two = 0.0;
  double inf = 0.0;
  double one = 0.0;
};

template <int Cap>
VecNorms norms(const Vec<Cap>& x) {
  if (x.n < 1) throw std::invalid_argument("norms: empty vector");
  VecNorms r;
  double sq = 0.0;
  for (int i = 0; i < x.n; ++i) {
    const double v = std::abs(x[i]);
    sq += v * v;
    r.one += v;
    if (v > r.inf) r.inf = v;
  }
  r.two = std::sqrt(sq);
  return r;
}

template <int C1, int C2>
double dot(const Vec<C1>& x, const Vec<C2>& y) {
  if (x.n != y.n)
    throw std::invalid_argument("dot: lengths " + std::to_string(x.n) + " and " +
                                std::to_string(y.n));
  double acc = 0.0;
  for (int i = 0; i < x.n; ++i) acc += x[i] * y[i];
  return acc;
}

template <int RCap, int CCap>
Mat<CCap, RCap> transposed(const Mat<RCap, CCap>& A) {
  Mat<CCap, RCap> T(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

template <int Cap>
Mat<Cap, Cap> identity(int n) {
  Mat<Cap, Cap> I(n, n);
  I.set_identity();
  return I;
}

/// y += alpha * x
template <int C1, int C2>
void add_scaled(Vec<C1>& y, double alpha, const Vec<C2>& x) {
  if (x.n != y.n)
    throw std::invalid_argument("add_scaled: lengths " + std::to_string(y.n) + " and " +
                                std::to_string(x.n));
  for (int i = 0; i < y.n; ++i) y[i] += alpha * x[i];
}

template <int Cap>
void scale(Vec<Cap>& x, double alpha) {
  for (int i = 0; i < x.n; ++i) x[i] *= alpha;
}

template <int C1, int C2>
double inf_norm_diff(const Vec<C1>& x, const Vec<C2>& y) {
  if (x.n != y.n)
    throw std::invalid_argument("inf_norm_diff: lengths " + std::to_string(x.n) + " and " +
                                std::to_string(y.n));
  double m = 0.0;
  for (int i = 0; i < x.n; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

template <int Cap>
double inf_norm(const Vec<Cap>& x) {
  double m = 0.0;
  for (int i = 0; i < x.n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

template <int Cap>
bool all_finite(const Vec<Cap>& x) {
  for (int i = 0; i < x.n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

}  // namespace ptopt
