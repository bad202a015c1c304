#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sonav/errors.hpp"
#include "sonav/vec.hpp"

namespace sonav {

enum class ObstacleKind { Sphere, Ellipsoid, BoundarySphere };

/// A compact obstacle. Sphere and Ellipsoid are solid convex bodies; a
/// BoundarySphere is the complement of an open ball and models the region
/// outside a spherical workspace. The anchor is a fixed interior point
/// used by the sensor-based planner's repulsive term; it defaults to the
/// center.
template <int N>
struct Obstacle {
  ObstacleKind kind = ObstacleKind::Sphere;
  Vec<N> center{};
  double radius = 0.0;  // Sphere / BoundarySphere
  Mat<N> shape{};       // Ellipsoid: {x | (x-c)^T S (x-c) <= 1}, S SPD
  Vec<N> anchor{};

  static Obstacle sphere(const Vec<N>& c, double rho) {
    Obstacle o;
    o.kind = ObstacleKind::Sphere;
    o.center = c;
    o.radius = rho;
    o.anchor = c;
    return o;
  }

  static Obstacle ellipsoid(const Vec<N>& c, const Mat<N>& s) {
    Obstacle o;
    o.kind = ObstacleKind::Ellipsoid;
    o.center = c;
    o.shape = s;
    o.anchor = c;
    return o;
  }

  static Obstacle boundary_sphere(const Vec<N>& c, double rho) {
    Obstacle o;
    o.kind = ObstacleKind::BoundarySphere;
    o.center = c;
    o.radius = rho;
    o.anchor = c;
    return o;
  }

  /// Quadratic form (x-c)^T S (x-c) for ellipsoids.
  double level(const Vec<N>& x) const {
    const Vec<N> d = x - center;
    return d.dot(shape * d);
  }

  bool contains_interior(const Vec<N>& x) const {
    switch (kind) {
      case ObstacleKind::Sphere:
        return (x - center).norm() < radius;
      case ObstacleKind::Ellipsoid:
        return level(x) < 1.0;
      case ObstacleKind::BoundarySphere:
        return (x - center).norm() > radius;
    }
    return false;
  }
};

template <int N>
struct Projection {
  double dist = 0.0;
  Vec<N> closest{};
};

namespace detail {

/// Projects an exterior point onto an axis-aligned ellipsoid
/// sum_k (y_k / a_k)^2 = 1 by solving the monotone secular equation
/// g(t) = sum_k (a_k u_k / (t + a_k^2))^2 - 1 = 0 for t > 0 with
/// safeguarded Newton (bisection fallback). `u` is the point in the
/// aligned frame; returns the closest boundary point in that frame.
template <int N>
Vec<N> ellipsoid_project_aligned(const Vec<N>& u, const Vec<N>& a) {
  auto g = [&](double t) {
    double s = -1.0;
    for (int k = 0; k < N; ++k) {
      const double w = a[k] * u[k] / (t + a[k] * a[k]);
      s += w * w;
    }
    return s;
  };
  auto dg = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < N; ++k) {
      const double ak2 = a[k] * a[k];
      const double w = a[k] * u[k];
      s -= 2.0 * w * w / ((t + ak2) * (t + ak2) * (t + ak2));
    }
    return s;
  };

  double lo = 0.0;
  double hi = 0.0;
  for (int k = 0; k < N; ++k) hi += a[k] * a[k] * u[k] * u[k];
  hi = std::sqrt(hi);  // g(hi) <= 0 since each denominator exceeds t
  double t = 0.5 * hi;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const double gt = g(t);
    if (std::abs(gt) < 1e-14 || hi - lo < 1e-12 * (1.0 + t)) {
      converged = true;
      break;
    }
    (gt > 0.0 ? lo : hi) = t;
    const double slope = dg(t);
    double next = (slope != 0.0) ? t - gt / slope : t;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  if (!converged) throw NonConvergence("ellipsoid projection: secular solve stalled");
  Vec<N> y;
  for (int k = 0; k < N; ++k) y[k] = a[k] * a[k] * u[k] / (t + a[k] * a[k]);
  return y;
}

}  // namespace detail

/// Euclidean distance from `x` to the obstacle along with the closest
/// point on its boundary. Throws InsideObstacle when x lies in the
/// obstacle interior, where the projection is ill-defined.
template <int N>
Projection<N> distance_to_obstacle(const Vec<N>& x, const Obstacle<N>& ob) {
  switch (ob.kind) {
    case ObstacleKind::Sphere: {
      const Vec<N> d = x - ob.center;
      const double nd = d.norm();
      if (nd < ob.radius) throw InsideObstacle("point inside spherical obstacle");
      if (nd == 0.0) throw InsideObstacle("point at sphere center");
      return {nd - ob.radius, ob.center + (ob.radius / nd) * d};
    }
    case ObstacleKind::BoundarySphere: {
      const Vec<N> d = x - ob.center;
      const double nd = d.norm();
      if (nd > ob.radius) throw InsideObstacle("point outside the workspace ball");
      if (nd == 0.0) {
        // every boundary point is equidistant; pick a fixed representative
        return {ob.radius, ob.center + ob.radius * Vec<N>::unit(0)};
      }
      return {ob.radius - nd, ob.center + (ob.radius / nd) * d};
    }
    case ObstacleKind::Ellipsoid: {
      const double q = ob.level(x);
      if (q < 1.0 - 1e-12) throw InsideObstacle("point inside ellipsoidal obstacle");
      if (q <= 1.0 + 1e-12) return {0.0, x};
      const auto eig = symmetric_eigen(ob.shape);
      Vec<N> axes;
      for (int k = 0; k < N; ++k) axes[k] = 1.0 / std::sqrt(eig.values[k]);
      // aligned frame: u = Q^T (x - c)
      const Vec<N> d = x - ob.center;
      Vec<N> u{};
      for (int k = 0; k < N; ++k)
        for (int i = 0; i < N; ++i) u[k] += eig.vectors(i, k) * d[i];
      const Vec<N> y = detail::ellipsoid_project_aligned(u, axes);
      Vec<N> closest = ob.center;
      for (int i = 0; i < N; ++i)
        for (int k = 0; k < N; ++k) closest[i] += eig.vectors(i, k) * y[k];
      return {(x - closest).norm(), closest};
    }
  }
  throw Error("unreachable obstacle kind");
}

namespace detail {

/// Largest distance from point `p` to any point of a solid obstacle
/// (Sphere or Ellipsoid). Used for workspace-boundary separation checks.
template <int N>
double max_distance_to_body(const Vec<N>& p, const Obstacle<N>& ob) {
  if (ob.kind == ObstacleKind::Sphere) return (ob.center - p).norm() + ob.radius;
  // ellipsoid: maximize ||b + A y|| over ||y|| <= 1 with A = S^{-1/2};
  // ascent iteration y <- normalize(A^T (b + A y)) from several starts
  const auto eig = symmetric_eigen(ob.shape);
  Mat<N> a{};  // A = Q diag(1/sqrt(lambda)) Q^T
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int k = 0; k < N; ++k)
        s += eig.vectors(i, k) * eig.vectors(j, k) / std::sqrt(eig.values[k]);
      a(i, j) = s;
    }
  const Vec<N> b = ob.center - p;
  double best = 0.0;
  std::vector<Vec<N>> starts;
  if (b.norm() > 1e-12) starts.push_back((a.transposed() * b).normalized());
  for (int k = 0; k < N; ++k) {
    Vec<N> axis{};
    for (int i = 0; i < N; ++i) axis[i] = eig.vectors(i, k);
    starts.push_back(axis);
    starts.push_back(-axis);
  }
  for (Vec<N> y : starts) {
    for (int it = 0; it < 200; ++it) {
      const Vec<N> grad = a.transposed() * (b + a * y);
      if (grad.norm() < 1e-300) break;
      const Vec<N> next = grad.normalized();
      if ((next - y).norm() < 1e-13) {
        y = next;
        break;
      }
      y = next;
    }
    best = std::max(best, (b + a * y).norm());
  }
  return best;
}

/// Distance between two disjoint solid convex obstacles by alternating
/// boundary projections. Returns a negative value when one body's center
/// lies inside the other (overlap).
template <int N>
double convex_pair_distance(const Obstacle<N>& oa, const Obstacle<N>& ob) {
  if (oa.kind == ObstacleKind::Sphere && ob.kind == ObstacleKind::Sphere)
    return (oa.center - ob.center).norm() - oa.radius - ob.radius;
  try {
    Vec<N> p = distance_to_obstacle(ob.center, oa).closest;
    double dist = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
      const Vec<N> q = distance_to_obstacle(p, ob).closest;
      const Vec<N> p2 = distance_to_obstacle(q, oa).closest;
      const double d = (p2 - q).norm();
      if (std::abs(dist - d) < 1e-12) return d;
      dist = d;
      p = p2;
    }
    return dist;
  } catch (const InsideObstacle&) {
    return -1.0;  // overlapping bodies
  }
}

}  // namespace detail

/// Distance between two obstacles, d(O_i, O_j) = min over point pairs.
template <int N>
double obstacle_pair_distance(const Obstacle<N>& oa, const Obstacle<N>& ob) {
  const bool ba = oa.kind == ObstacleKind::BoundarySphere;
  const bool bb = ob.kind == ObstacleKind::BoundarySphere;
  if (ba && bb) throw ValidationError("two workspace boundaries in one world");
  if (ba || bb) {
    const Obstacle<N>& wall = ba ? oa : ob;
    const Obstacle<N>& body = ba ? ob : oa;
    return wall.radius - detail::max_distance_to_body(wall.center, body);
  }
  return detail::convex_pair_distance(oa, ob);
}

template <int N>
struct SafetyMargin {
  double d_x = 0.0;          // distance to the nearest obstacle minus r
  std::size_t active_index = 0;
  Vec<N> eta{};              // unit normal, gradient of d_x where unique
};

/// Workspace plus obstacle list plus robot radius. Owns every distance
/// query. Immutable after construction and safely shareable. Ellipsoid
/// eigenframes are precomputed once; distance queries sit on the closed
/// loop's hot path.
template <int N>
class WorldModel {
 public:
  WorldModel(std::vector<Obstacle<N>> obstacles, double robot_radius, double delta_u)
      : obstacles_(std::move(obstacles)), robot_radius_(robot_radius), delta_u_(delta_u) {
    if (!(robot_radius_ > 0.0)) throw ValidationError("robot_radius must be positive");
    if (!(delta_u_ > 0.0)) throw ValidationError("delta_u must be positive");
    frames_.resize(obstacles_.size());
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const auto& ob = obstacles_[i];
      if (ob.kind == ObstacleKind::BoundarySphere && i != 0)
        throw ValidationError("workspace boundary must be obstacle 0");
      if (ob.kind != ObstacleKind::Ellipsoid && !(ob.radius > 0.0))
        throw ValidationError("obstacle " + std::to_string(i) + ": radius must be positive");
      if (ob.kind == ObstacleKind::Ellipsoid) {
        if ((ob.shape - ob.shape.transposed()).frobenius_norm() >= 1e-12)
          throw ValidationError("obstacle " + std::to_string(i) +
                                ": shape matrix must be symmetric");
        const auto eig = symmetric_eigen(ob.shape);
        for (int k = 0; k < N; ++k)
          if (!(eig.values[k] > 0.0))
            throw ValidationError("obstacle " + std::to_string(i) +
                                  ": shape matrix must be positive definite");
        frames_[i].q = eig.vectors;
        for (int k = 0; k < N; ++k) frames_[i].axes[k] = 1.0 / std::sqrt(eig.values[k]);
      }
    }
    validate_separation();
  }

  /// Distance from x to obstacle `index`, using the cached eigenframe for
  /// ellipsoids. Matches distance_to_obstacle exactly.
  Projection<N> distance_to(std::size_t index, const Vec<N>& x) const {
    const auto& ob = obstacles_[index];
    if (ob.kind != ObstacleKind::Ellipsoid) return distance_to_obstacle(x, ob);
    const double q = ob.level(x);
    if (q < 1.0 - 1e-12) throw InsideObstacle("point inside ellipsoidal obstacle");
    if (q <= 1.0 + 1e-12) return {0.0, x};
    const auto& fr = frames_[index];
    const Vec<N> d = x - ob.center;
    Vec<N> u{};
    for (int k = 0; k < N; ++k)
      for (int i = 0; i < N; ++i) u[k] += fr.q(i, k) * d[i];
    const Vec<N> y = detail::ellipsoid_project_aligned(u, fr.axes);
    Vec<N> closest = ob.center;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k) closest[i] += fr.q(i, k) * y[k];
    return {(x - closest).norm(), closest};
  }

  const std::vector<Obstacle<N>>& obstacles() const { return obstacles_; }
  std::size_t size() const { return obstacles_.size(); }
  double robot_radius() const { return robot_radius_; }
  double validity_shell() const { return delta_u_; }
  bool has_boundary() const {
    return !obstacles_.empty() && obstacles_[0].kind == ObstacleKind::BoundarySphere;
  }

  /// Safety margin d_x = min_i d(x, O_i) - r together with the active
  /// obstacle and the unit normal. Ties within 1e-9 go to the smallest
  /// index; eta is consumed only by diagnostics.
  SafetyMargin<N> safety_margin(const Vec<N>& x) const {
    SafetyMargin<N> out;
    out.d_x = std::numeric_limits<double>::infinity();
    out.active_index = obstacles_.size();
    double best = std::numeric_limits<double>::infinity();
    Vec<N> best_closest{};
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const auto pr = distance_to(i, x);
      if (pr.dist < best - 1e-9) {
        best = pr.dist;
        best_closest = pr.closest;
        out.active_index = i;
      }
    }
    if (out.active_index == obstacles_.size()) return out;  // empty world
    out.d_x = best - robot_radius_;
    const Vec<N> d = x - best_closest;
    const double nd = d.norm();
    out.eta = (nd > 0.0) ? d / nd : Vec<N>{};
    return out;
  }

  /// Count of obstacles whose distance ties the active one within `tol`
  /// (closest-point uniqueness proxy for diagnostics).
  int near_tie_count(const Vec<N>& x, double tol = 1e-9) const {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> dists;
    dists.reserve(obstacles_.size());
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const double d = distance_to(i, x).dist;
      dists.push_back(d);
      best = std::min(best, d);
    }
    int ties = 0;
    for (double d : dists)
      if (d - best <= tol) ++ties;
    return ties > 0 ? ties - 1 : 0;
  }

  /// Central-finite-difference Hessian of d_x, built from the exact
  /// gradient eta and symmetrized. Diagnostics only.
  Mat<N> fd_hessian_of_distance(const Vec<N>& x, double h) const {
    Mat<N> a;
    for (int j = 0; j < N; ++j) {
      const Vec<N> step = h * Vec<N>::unit(j);
      const Vec<N> gp = safety_margin(x + step).eta;
      const Vec<N> gm = safety_margin(x - step).eta;
      for (int i = 0; i < N; ++i) a(i, j) = (gp[i] - gm[i]) / (2.0 * h);
    }
    return a.symmetrized();
  }

  /// Default diagnostic step for the Hessian stencil.
  static double hessian_step(const Vec<N>& x) { return 1e-4 * (1.0 + x.norm()); }

  /// Axis-aligned box that covers every obstacle inflated by `pad`.
  /// With a workspace boundary the box of its ball is used instead.
  std::pair<Vec<N>, Vec<N>> bounding_box(double pad) const {
    Vec<N> lo, hi;
    for (int i = 0; i < N; ++i) {
      lo[i] = std::numeric_limits<double>::infinity();
      hi[i] = -std::numeric_limits<double>::infinity();
    }
    auto grow = [&](const Vec<N>& c, const Vec<N>& extent) {
      for (int i = 0; i < N; ++i) {
        lo[i] = std::min(lo[i], c[i] - extent[i]);
        hi[i] = std::max(hi[i], c[i] + extent[i]);
      }
    };
    if (has_boundary()) {
      Vec<N> ext;
      for (int i = 0; i < N; ++i) ext[i] = obstacles_[0].radius;
      grow(obstacles_[0].center, ext);
    } else {
      for (const auto& ob : obstacles_) {
        Vec<N> ext;
        if (ob.kind == ObstacleKind::Sphere) {
          for (int i = 0; i < N; ++i) ext[i] = ob.radius + pad;
        } else {
          // support of the ellipsoid along axis i is sqrt((S^-1)_{ii})
          const auto eig = symmetric_eigen(ob.shape);
          for (int i = 0; i < N; ++i) {
            double s = 0.0;
            for (int k = 0; k < N; ++k)
              s += eig.vectors(i, k) * eig.vectors(i, k) / eig.values[k];
            ext[i] = std::sqrt(s) + pad;
          }
        }
        grow(ob.center, ext);
      }
    }
    return {lo, hi};
  }

 private:
  void validate_separation() const {
    for (std::size_t i = 0; i < obstacles_.size(); ++i)
      for (std::size_t j = i + 1; j < obstacles_.size(); ++j) {
        const double d = obstacle_pair_distance(obstacles_[i], obstacles_[j]);
        if (!(d > 2.0 * robot_radius_))
          throw SeparationViolation("obstacles " + std::to_string(i) + " and " +
                                    std::to_string(j) + " are " + std::to_string(d) +
                                    " apart; need > 2r = " +
                                    std::to_string(2.0 * robot_radius_));
      }
  }

  struct EllipsoidFrame {
    Mat<N> q{};      // eigenvector columns of the shape matrix
    Vec<N> axes{};   // semi-axes 1/sqrt(lambda_k)
  };

  std::vector<Obstacle<N>> obstacles_;
  double robot_radius_;
  double delta_u_;
  std::vector<EllipsoidFrame> frames_;
};

}  // namespace sonav
