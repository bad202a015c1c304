#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "sonav/errors.hpp"
#include "sonav/vec.hpp"

namespace sonav {

/// Small dense square matrix with runtime size, used for assembled
/// closed-loop Jacobians (size 2n) and as the general eigenvalue oracle.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(int m) : m_(m), e_(static_cast<std::size_t>(m) * m, 0.0) {}

  int size() const { return m_; }
  double& operator()(int i, int j) { return e_[static_cast<std::size_t>(i) * m_ + j]; }
  double operator()(int i, int j) const { return e_[static_cast<std::size_t>(i) * m_ + j]; }

  template <int N>
  static DenseMatrix from(const Mat<N>& a) {
    DenseMatrix d(N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) d(i, j) = a(i, j);
    return d;
  }

  /// Writes `block` with its top-left entry at (row, col).
  template <int N>
  void set_block(int row, int col, const Mat<N>& block) {
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) (*this)(row + i, col + j) = block(i, j);
  }

 private:
  int m_ = 0;
  std::vector<double> e_;
};

namespace detail {

/// Reduces `a` to upper Hessenberg form in place (Householder similarity
/// transforms). Entries below the first subdiagonal are zeroed.
inline void hessenberg_reduce(DenseMatrix& a) {
  const int m = a.size();
  for (int k = 1; k < m - 1; ++k) {
    double scale = 0.0;
    for (int i = k; i < m; ++i) scale += std::abs(a(i, k - 1));
    if (scale == 0.0) continue;
    double h = 0.0;
    std::vector<double> u(static_cast<std::size_t>(m), 0.0);
    for (int i = k; i < m; ++i) {
      u[i] = a(i, k - 1) / scale;
      h += u[i] * u[i];
    }
    double g = std::sqrt(h);
    if (u[k] > 0) g = -g;
    h -= u[k] * g;
    u[k] -= g;
    if (h == 0.0) continue;
    // apply P = I - u u^T / h from both sides
    for (int j = 0; j < m; ++j) {
      double f = 0.0;
      for (int i = k; i < m; ++i) f += u[i] * a(i, j);
      f /= h;
      for (int i = k; i < m; ++i) a(i, j) -= f * u[i];
    }
    for (int i = 0; i < m; ++i) {
      double f = 0.0;
      for (int j = k; j < m; ++j) f += a(i, j) * u[j];
      f /= h;
      for (int j = k; j < m; ++j) a(i, j) -= f * u[j];
    }
    a(k, k - 1) = scale * g;
    for (int i = k + 1; i < m; ++i) a(i, k - 1) = 0.0;
  }
}

inline double sign_of(double a, double b) { return b >= 0 ? std::abs(a) : -std::abs(a); }

/// Francis double-shift QR iteration on an upper Hessenberg matrix.
/// Classic hqr scheme; eigenvalues are collected from deflated 1x1 and
/// 2x2 trailing blocks.
inline std::vector<std::complex<double>> hessenberg_qr_eigenvalues(DenseMatrix& a,
                                                                   int max_total_iters) {
  const int m = a.size();
  const double eps = std::numeric_limits<double>::epsilon();
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(m));

  double anorm = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = std::max(i - 1, 0); j < m; ++j) anorm += std::abs(a(i, j));
  if (anorm == 0.0) return roots;  // zero matrix

  int total_its = 0;
  int nn = m - 1;
  double t = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        roots[static_cast<std::size_t>(nn)] = x + t;
        --nn;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          double p = 0.5 * (y - x);
          double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            roots[static_cast<std::size_t>(nn - 1)] = x + z;
            roots[static_cast<std::size_t>(nn)] = (z != 0.0) ? x - w / z : x + z;
          } else {
            roots[static_cast<std::size_t>(nn - 1)] = {x + p, z};
            roots[static_cast<std::size_t>(nn)] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (++total_its > max_total_iters)
            throw NoConvergence("QR eigenvalue iteration exceeded its sweep budget");
          if (its == 10 || its == 20) {
            // exceptional shift
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          int mm;
          for (mm = nn - 2; mm >= l; --mm) {
            z = a(mm, mm);
            double rr = x - z;
            double ss = y - z;
            p = (rr * ss - w) / a(mm + 1, mm) + a(mm, mm + 1);
            q = a(mm + 1, mm + 1) - z - rr - ss;
            r = a(mm + 2, mm + 1);
            double s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (mm == l) break;
            const double u = std::abs(a(mm, mm - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(mm - 1, mm - 1)) + std::abs(z) +
                                            std::abs(a(mm + 1, mm + 1)));
            if (u <= eps * v) break;
          }
          for (int i = mm + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != mm + 2) a(i, i - 3) = 0.0;
          }
          for (int k = mm; k <= nn - 1; ++k) {
            if (k != mm) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == mm) {
              if (l != mm) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            double yy = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a(k, j) + q * a(k + 1, j);
              if (k != nn - 1) {
                p += r * a(k + 2, j);
                a(k + 2, j) -= p * z;
              }
              a(k + 1, j) -= p * yy;
              a(k, j) -= p * x;
            }
            const int mmin = (nn < k + 3) ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
              p = x * a(i, k) + yy * a(i, k + 1);
              if (k != nn - 1) {
                p += z * a(i, k + 2);
                a(i, k + 2) -= p * r;
              }
              a(i, k + 1) -= p * q;
              a(i, k) -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return roots;
}

}  // namespace detail

/// All eigenvalues of a small dense real matrix (size <= 8) via Hessenberg
/// reduction followed by shifted QR iteration. Independent of the
/// closed-form spectral paths, so it can cross-check them.
inline std::vector<std::complex<double>> eigenvalues_dense(DenseMatrix a) {
  const int m = a.size();
  if (m == 0) return {};
  if (m > 8) throw OutOfRange("eigenvalues_dense: matrix larger than 8x8");
  detail::hessenberg_reduce(a);
  auto roots = detail::hessenberg_qr_eigenvalues(a, 100 * m);
  std::sort(roots.begin(), roots.end(), [](const auto& p, const auto& q) {
    if (p.real() != q.real()) return p.real() < q.real();
    return p.imag() < q.imag();
  });
  return roots;
}

/// Roots of the characteristic polynomial of a 2x2 or 3x3 real matrix,
/// closed form with complex arithmetic (quadratic / Cardano). Used by the
/// control-gain bound and equilibrium classification, where the matrix is
/// the planner Jacobian in the ambient dimension.
template <int N>
std::array<std::complex<double>, N> characteristic_roots(const Mat<N>& a) {
  using C = std::complex<double>;
  if constexpr (N == 2) {
    const double tr = a.trace();
    const double de = a.det();
    const C disc = std::sqrt(C(tr * tr - 4.0 * de, 0.0));
    return {0.5 * (C(tr) - disc), 0.5 * (C(tr) + disc)};
  } else {
    // monic cubic l^3 + c2 l^2 + c1 l + c0
    const double c2 = -a.trace();
    const double m01 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double m02 = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    const double m12 = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    const double c1 = m01 + m02 + m12;
    const double c0 = -a.det();
    // depressed cubic t^3 + p t + q with l = t - c2/3
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    const C shift(-c2 / 3.0, 0.0);
    const C disc = std::sqrt(C(q * q / 4.0 + p * p * p / 27.0, 0.0));
    C u = std::pow(-C(q) / 2.0 + disc, 1.0 / 3.0);
    if (std::abs(u) < 1e-100) u = std::pow(-C(q) / 2.0 - disc, 1.0 / 3.0);
    std::array<C, 3> roots;
    if (std::abs(u) < 1e-100) {
      roots = {shift, shift, shift};
    } else {
      const C w(-0.5, std::sqrt(3.0) / 2.0);
      for (int k = 0; k < 3; ++k) {
        const C uk = u * std::pow(w, k);
        roots[static_cast<std::size_t>(k)] = uk - C(p) / (3.0 * uk) + shift;
      }
    }
    // polish with one complex Newton step on the original polynomial
    for (auto& r : roots) {
      const C f = ((r + C(c2)) * r + C(c1)) * r + C(c0);
      const C df = (3.0 * r + C(2.0 * c2)) * r + C(c1);
      if (std::abs(df) > 1e-100) r -= f / df;
    }
    // real matrices have conjugate-paired spectra; scrub rounding dust off
    // imaginary parts of essentially-real roots
    for (auto& r : roots) {
      if (std::abs(r.imag()) < 1e-12 * (1.0 + std::abs(r.real()))) r = C(r.real(), 0.0);
    }
    return roots;
  }
}

}  // namespace sonav
