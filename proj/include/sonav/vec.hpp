#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>

#include "sonav/errors.hpp"

namespace sonav {

/// Fixed-size column vector over the ambient dimension (2 or 3).
template <int N>
struct Vec {
  static_assert(N == 2 || N == 3, "ambient dimension must be 2 or 3");

  std::array<double, N> e{};

  constexpr Vec() = default;
  constexpr Vec(double x, double y) requires(N == 2) : e{x, y} {}
  constexpr Vec(double x, double y, double z) requires(N == 3) : e{x, y, z} {}
  explicit constexpr Vec(const std::array<double, N>& a) : e(a) {}

  constexpr double& operator[](int i) { return e[static_cast<std::size_t>(i)]; }
  constexpr double operator[](int i) const { return e[static_cast<std::size_t>(i)]; }

  static constexpr Vec zero() { return Vec{}; }
  static constexpr Vec unit(int axis) {
    Vec v{};
    v[axis] = 1.0;
    return v;
  }

  constexpr Vec& operator+=(const Vec& o) {
    for (int i = 0; i < N; ++i) e[i] += o.e[i];
    return *this;
  }
  constexpr Vec& operator-=(const Vec& o) {
    for (int i = 0; i < N; ++i) e[i] -= o.e[i];
    return *this;
  }
  constexpr Vec& operator*=(double s) {
    for (auto& c : e) c *= s;
    return *this;
  }

  friend constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend constexpr Vec operator*(Vec a, double s) { return a *= s; }
  friend constexpr Vec operator*(double s, Vec a) { return a *= s; }
  friend constexpr Vec operator/(Vec a, double s) { return a *= (1.0 / s); }
  friend constexpr Vec operator-(Vec a) { return a *= -1.0; }

  friend constexpr bool operator==(const Vec& a, const Vec& b) { return a.e == b.e; }

  constexpr double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += e[i] * o.e[i];
    return s;
  }
  constexpr double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }

  Vec normalized() const {
    const double n = norm();
    return *this / n;
  }

  bool all_finite() const {
    for (double c : e)
      if (!std::isfinite(c)) return false;
    return true;
  }

  friend std::ostream& operator<<(std::ostream& os, const Vec& v) {
    os << '(';
    for (int i = 0; i < N; ++i) os << (i ? ", " : "") << v[i];
    return os << ')';
  }
};

/// Square matrix over the ambient dimension. Row-major; mat(i, j) is the
/// entry in row i, column j.
template <int N>
struct Mat {
  std::array<double, static_cast<std::size_t>(N) * N> e{};

  constexpr double& operator()(int i, int j) { return e[static_cast<std::size_t>(i) * N + j]; }
  constexpr double operator()(int i, int j) const {
    return e[static_cast<std::size_t>(i) * N + j];
  }

  static constexpr Mat zero() { return Mat{}; }
  static constexpr Mat identity() {
    Mat m{};
    for (int i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }
  static constexpr Mat diagonal(const Vec<N>& d) {
    Mat m{};
    for (int i = 0; i < N; ++i) m(i, i) = d[i];
    return m;
  }

  constexpr Mat& operator+=(const Mat& o) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += o.e[i];
    return *this;
  }
  constexpr Mat& operator-=(const Mat& o) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= o.e[i];
    return *this;
  }
  constexpr Mat& operator*=(double s) {
    for (auto& c : e) c *= s;
    return *this;
  }

  friend constexpr Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend constexpr Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend constexpr Mat operator*(Mat a, double s) { return a *= s; }
  friend constexpr Mat operator*(double s, Mat a) { return a *= s; }

  constexpr Vec<N> operator*(const Vec<N>& v) const {
    Vec<N> r{};
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r[i] += (*this)(i, j) * v[j];
    return r;
  }

  constexpr Mat operator*(const Mat& o) const {
    Mat r{};
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j) r(i, j) += (*this)(i, k) * o(k, j);
    return r;
  }

  constexpr Mat transposed() const {
    Mat r;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r(j, i) = (*this)(i, j);
    return r;
  }

  constexpr Mat symmetrized() const {
    Mat r;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
    return r;
  }

  constexpr double trace() const {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += (*this)(i, i);
    return s;
  }

  constexpr double det() const {
    if constexpr (N == 2) {
      return (*this)(0, 0) * (*this)(1, 1) - (*this)(0, 1) * (*this)(1, 0);
    } else {
      const Mat& m = *this;
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    }
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double c : e) s += c * c;
    return std::sqrt(s);
  }

  double max_abs() const {
    double s = 0.0;
    for (double c : e) s = std::max(s, std::abs(c));
    return s;
  }

  bool all_finite() const {
    for (double c : e)
      if (!std::isfinite(c)) return false;
    return true;
  }
};

template <int N>
constexpr Mat<N> outer(const Vec<N>& a, const Vec<N>& b) {
  Mat<N> r;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) r(i, j) = a[i] * b[j];
  return r;
}

/// Solves A x = b for a small dense system by Gaussian elimination with
/// partial pivoting. Throws NoConvergence on a (numerically) singular pivot.
template <int N>
Vec<N> solve(Mat<N> a, Vec<N> b) {
  std::array<int, N> perm{};
  for (int i = 0; i < N; ++i) perm[i] = i;
  for (int col = 0; col < N; ++col) {
    int piv = col;
    for (int r = col + 1; r < N; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) < 1e-300)
      throw NoConvergence("linear solve: singular matrix");
    if (piv != col) {
      for (int j = 0; j < N; ++j) std::swap(a(col, j), a(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < N; ++r) {
      const double f = a(r, col) / a(col, col);
      for (int j = col; j < N; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  Vec<N> x{};
  for (int i = N - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < N; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in `values` and the orthonormal eigenvectors as the
/// columns of `vectors` (A = V diag(values) V^T).
template <int N>
struct SymmetricEigen {
  Vec<N> values;
  Mat<N> vectors;
};

template <int N>
SymmetricEigen<N> symmetric_eigen(Mat<N> a) {
  Mat<N> v = Mat<N>::identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < N; ++p)
      for (int q = p + 1; q < N; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < N; ++p) {
      for (int q = p + 1; q < N; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < N; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < N; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < N; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymmetricEigen<N> out;
  for (int i = 0; i < N; ++i) out.values[i] = a(i, i);
  out.vectors = v;
  return out;
}

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;
using Mat2 = Mat<2>;
using Mat3 = Mat<3>;

}  // namespace sonav
