#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sonav/errors.hpp"
#include "sonav/geometry.hpp"
#include "sonav/vec.hpp"

namespace sonav {

/// One planner query: velocity field value, its spatial Jacobian
/// (jacobian(i, j) = d v_i / d x_j), and the underlying scalar potential
/// when the planner derives from one.
template <int N>
struct PlannerEval {
  Vec<N> v_d{};
  Mat<N> jacobian{};
  std::optional<double> potential;
  std::optional<Vec<N>> grad_potential;
};

template <int N>
struct PotentialEval {
  double phi = 0.0;
  Vec<N> grad{};
};

/// Parameters of the kappa-navigation-function planner
/// v_d = -k1 grad phi with phi = f / (f^kappa + h)^(1/kappa).
template <int N>
struct NfPlannerParams {
  double k1 = 1.0;
  double kappa = 6.0;
  double delta1 = 0.01;  // attractive scale, f = delta1 |x - x_d|^2
  double delta2 = 0.01;  // proximity scale in the analytic h_i
  Vec<N> target{};
};

/// Parameters of the modified sensor-based planner (distance-based h_i
/// with the smoothstep bridge between eps1 and eps2).
template <int N>
struct ModifiedPlannerParams {
  double k1 = 1.0;
  double kappa = 10.0;
  double delta1 = 0.5;
  double eps1 = 0.5;
  double eps2 = 1.5;
  Vec<N> target{};  // also serves as the anchor x_0 of the workspace boundary
};

struct SmoothstepEval {
  double value = 0.0;
  double deriv = 0.0;
};

/// Cubic Hermite bridge on [eps1, eps2] pinned by value(eps1) = eps1,
/// value(eps2) = 1, deriv(eps1) = 1, deriv(eps2) = 0.
inline SmoothstepEval phi1_smoothstep(double p, double eps1, double eps2) {
  if (!(p >= eps1 && p <= eps2))
    throw OutOfRange("phi1_smoothstep: argument outside [eps1, eps2]");
  const double w = eps2 - eps1;
  const double s = (p - eps1) / w;
  const double h00 = (2.0 * s - 3.0) * s * s + 1.0;
  const double h10 = ((s - 2.0) * s + 1.0) * s;
  const double h01 = (3.0 - 2.0 * s) * s * s;
  const double d00 = 6.0 * s * (s - 1.0);
  const double d10 = (3.0 * s - 4.0) * s + 1.0;
  const double d01 = 6.0 * s * (1.0 - s);
  SmoothstepEval out;
  out.value = h00 * eps1 + h10 * w + h01;
  out.deriv = (d00 * eps1 + d01) / w + d10;
  return out;
}

template <int N>
struct ProximityEval {
  double value = 0.0;
  Vec<N> grad{};
};

/// Distance-based obstacle proximity factor of the modified planner:
/// h_i = d(x, O_i) - r below eps1, the smoothstep bridge in between, and
/// 1 beyond eps2. C^1 across both knots.
template <int N>
ProximityEval<N> hi_smooth(const Vec<N>& x, std::size_t ob_index, const WorldModel<N>& world,
                           double eps1, double eps2) {
  const auto pr = world.distance_to(ob_index, x);
  const double p = pr.dist - world.robot_radius();
  ProximityEval<N> out;
  if (p >= eps2) {
    out.value = 1.0;
    return out;
  }
  double slope = 1.0;
  if (p <= eps1) {
    out.value = p;
  } else {
    const auto sm = phi1_smoothstep(p, eps1, eps2);
    out.value = sm.value;
    slope = sm.deriv;
  }
  const Vec<N> d = x - pr.closest;
  const double nd = d.norm();
  if (nd > 0.0) out.grad = (slope / nd) * d;
  return out;
}

namespace detail {

template <int N>
struct Factor {
  double value;
  Vec<N> grad;
};

/// Analytic per-obstacle proximity factors of the navigation function
/// (quadratic level sets, scaled by delta2).
template <int N>
Factor<N> nf_factor(const Vec<N>& x, const Obstacle<N>& ob, double delta2) {
  const Vec<N> d = x - ob.center;
  switch (ob.kind) {
    case ObstacleKind::Sphere:
      return {delta2 * (d.squared_norm() - ob.radius * ob.radius), (2.0 * delta2) * d};
    case ObstacleKind::Ellipsoid:
      return {delta2 * (ob.level(x) - 1.0), (2.0 * delta2) * (ob.shape * d)};
    case ObstacleKind::BoundarySphere:
      return {delta2 * (ob.radius * ob.radius - d.squared_norm()), (-2.0 * delta2) * d};
  }
  throw Error("unreachable obstacle kind");
}

/// Product of factors and its gradient, Leibniz over the partial products.
template <int N>
Factor<N> product(const std::vector<Factor<N>>& fs) {
  Factor<N> out{1.0, {}};
  for (const auto& f : fs) out.value *= f.value;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    double rest = 1.0;
    for (std::size_t j = 0; j < fs.size(); ++j)
      if (j != i) rest *= fs[j].value;
    out.grad += rest * fs[i].grad;
  }
  return out;
}

}  // namespace detail

/// Navigation-function value and analytic gradient,
/// phi = f / (f^kappa + h)^(1/kappa) in [0, 1] wherever h >= 0.
template <int N>
PotentialEval<N> nf_potential(const Vec<N>& x, const NfPlannerParams<N>& params,
                              const WorldModel<N>& world) {
  std::vector<detail::Factor<N>> factors;
  factors.reserve(world.size());
  for (const auto& ob : world.obstacles())
    factors.push_back(detail::nf_factor(x, ob, params.delta2));
  const auto h = detail::product(factors);
  if (h.value < 0.0)
    throw OutsideDomain("navigation function undefined: obstacle proximity h(x) < 0");

  const Vec<N> to_target = x - params.target;
  const double f = params.delta1 * to_target.squared_norm();
  const Vec<N> gf = (2.0 * params.delta1) * to_target;

  const double fk = std::pow(f, params.kappa);
  const double base = fk + h.value;
  PotentialEval<N> out;
  out.phi = f / std::pow(base, 1.0 / params.kappa);
  // grad phi = (h grad f - (f/kappa) grad h) / (f^k + h)^(1 + 1/k)
  const double den = std::pow(base, 1.0 + 1.0 / params.kappa);
  out.grad = (1.0 / den) * (h.value * gf - (f / params.kappa) * h.grad);
  return out;
}

namespace detail {

constexpr double fd_step(double xnorm) { return 1e-6 * (1.0 + xnorm); }

}  // namespace detail

/// Full evaluation of the NF planner: v_d = -k1 grad phi, with the
/// Jacobian -k1 hess phi taken by central finite differences of the
/// analytic gradient.
template <int N>
PlannerEval<N> nf_planner_eval(const Vec<N>& x, const NfPlannerParams<N>& params,
                               const WorldModel<N>& world) {
  const auto pot = nf_potential(x, params, world);
  PlannerEval<N> out;
  out.v_d = -params.k1 * pot.grad;
  out.potential = pot.phi;
  out.grad_potential = pot.grad;
  const double h = detail::fd_step(x.norm());
  Mat<N> hess;
  for (int j = 0; j < N; ++j) {
    const Vec<N> step = h * Vec<N>::unit(j);
    const Vec<N> gp = nf_potential(x + step, params, world).grad;
    const Vec<N> gm = nf_potential(x - step, params, world).grad;
    for (int i = 0; i < N; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  out.jacobian = -params.k1 * hess.symmetrized();
  return out;
}

/// Velocity of the modified sensor-based planner,
/// v_d = k1 [ (f/kappa) sum_i g_i (x - x_i) - h grad f ].
template <int N>
Vec<N> modified_planner_velocity(const Vec<N>& x, const ModifiedPlannerParams<N>& params,
                                 const WorldModel<N>& world) {
  const std::size_t m = world.size();
  std::vector<double> hi(m);
  for (std::size_t i = 0; i < m; ++i)
    hi[i] = hi_smooth(x, i, world, params.eps1, params.eps2).value;

  const Vec<N> to_target = x - params.target;
  const double f = params.delta1 * to_target.squared_norm();
  const Vec<N> gf = (2.0 * params.delta1) * to_target;

  double h = 1.0;
  for (double v : hi) h *= v;

  Vec<N> repulsive{};
  for (std::size_t i = 0; i < m; ++i) {
    double hbar = 1.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) hbar *= hi[j];
    const auto& ob = world.obstacles()[i];
    const bool is_wall = ob.kind == ObstacleKind::BoundarySphere;
    const double gi = is_wall ? (hi[i] - 1.0) * hbar : (1.0 - hi[i]) * hbar;
    const Vec<N> anchor = is_wall ? params.target : ob.anchor;
    repulsive += gi * (x - anchor);
  }
  return params.k1 * ((f / params.kappa) * repulsive - h * gf);
}

/// Full evaluation of the modified planner; no scalar potential is known
/// for this field, so the potential slots stay empty. Jacobian by central
/// finite differences of the velocity.
template <int N>
PlannerEval<N> modified_planner_eval(const Vec<N>& x, const ModifiedPlannerParams<N>& params,
                                     const WorldModel<N>& world) {
  PlannerEval<N> out;
  out.v_d = modified_planner_velocity(x, params, world);
  const double h = detail::fd_step(x.norm());
  for (int j = 0; j < N; ++j) {
    const Vec<N> step = h * Vec<N>::unit(j);
    const Vec<N> vp = modified_planner_velocity(x + step, params, world);
    const Vec<N> vm = modified_planner_velocity(x - step, params, world);
    for (int i = 0; i < N; ++i) out.jacobian(i, j) = (vp[i] - vm[i]) / (2.0 * h);
  }
  return out;
}

/// A first-order motion planner bound to its world. Value semantics: the
/// planner owns a copy of the world model, so it is freely shareable and
/// evaluation is pure.
template <int N>
class MotionPlanner {
 public:
  static MotionPlanner navigation_function(const NfPlannerParams<N>& p, WorldModel<N> world) {
    validate_common(p.k1, p.kappa, p.delta1, p.target, world, "planner");
    if (!(p.delta2 > 0.0)) throw ValidationError("planner.delta2 must be positive");
    return MotionPlanner(p, std::move(world));
  }

  static MotionPlanner modified_sensor_based(const ModifiedPlannerParams<N>& p,
                                             WorldModel<N> world) {
    validate_common(p.k1, p.kappa, p.delta1, p.target, world, "planner");
    if (!(p.eps1 > 0.0 && p.eps1 < 1.0))
      throw ValidationError("planner.eps1 must lie in (0,1)");
    if (!(p.eps2 > p.eps1)) throw ValidationError("planner.eps2 must exceed eps1");
    for (std::size_t i = 0; i < world.size(); ++i) {
      const auto& ob = world.obstacles()[i];
      if (ob.kind != ObstacleKind::BoundarySphere && !ob.contains_interior(ob.anchor))
        throw ValidationError("world.obstacles[" + std::to_string(i) +
                              "].anchor must lie strictly inside the obstacle");
    }
    // the bridge must be monotone for the stated knot values
    double prev = p.eps1;
    for (int k = 1; k <= 100; ++k) {
      const double q = p.eps1 + (p.eps2 - p.eps1) * k / 100.0;
      const double v = phi1_smoothstep(q, p.eps1, p.eps2).value;
      if (v < prev - 1e-12)
        throw ValidationError("planner.eps1/eps2 yield a non-monotone smoothstep bridge");
      prev = v;
    }
    return MotionPlanner(p, std::move(world));
  }

  /// Trivial planner v_d == 0 with potential phi == 0; free-flight and
  /// equilibrium fixtures.
  static MotionPlanner zero(const Vec<N>& target, WorldModel<N> world) {
    return MotionPlanner(ZeroTag{target}, std::move(world));
  }

  Vec<N> velocity(const Vec<N>& x) const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params_))
      return -nf->k1 * nf_potential(x, *nf, world_).grad;
    if (const auto* mp = std::get_if<ModifiedPlannerParams<N>>(&params_))
      return modified_planner_velocity(x, *mp, world_);
    return {};
  }

  PlannerEval<N> evaluate(const Vec<N>& x) const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params_))
      return nf_planner_eval(x, *nf, world_);
    if (const auto* mp = std::get_if<ModifiedPlannerParams<N>>(&params_))
      return modified_planner_eval(x, *mp, world_);
    PlannerEval<N> out;
    out.potential = 0.0;
    out.grad_potential = Vec<N>{};
    return out;
  }

  Mat<N> jacobian(const Vec<N>& x) const { return evaluate(x).jacobian; }

  bool has_potential() const {
    return !std::holds_alternative<ModifiedPlannerParams<N>>(params_);
  }

  /// Scalar potential and gradient; throws NoPotential for planners that
  /// are not gradient fields.
  PotentialEval<N> potential(const Vec<N>& x) const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params_))
      return nf_potential(x, *nf, world_);
    if (std::holds_alternative<ZeroTag>(params_)) return {};
    throw NoPotential("the sensor-based planner exposes no scalar potential");
  }

  double gain() const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params_)) return nf->k1;
    if (const auto* mp = std::get_if<ModifiedPlannerParams<N>>(&params_)) return mp->k1;
    return 0.0;
  }

  const Vec<N>& target() const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params_)) return nf->target;
    if (const auto* mp = std::get_if<ModifiedPlannerParams<N>>(&params_)) return mp->target;
    return std::get<ZeroTag>(params_).target;
  }

  const WorldModel<N>& world() const { return world_; }

  bool is_navigation_function() const {
    return std::holds_alternative<NfPlannerParams<N>>(params_);
  }

 private:
  struct ZeroTag {
    Vec<N> target{};
  };
  using Params = std::variant<NfPlannerParams<N>, ModifiedPlannerParams<N>, ZeroTag>;

  MotionPlanner(Params p, WorldModel<N> world)
      : params_(std::move(p)), world_(std::move(world)) {}

  static void validate_common(double k1, double kappa, double delta1, const Vec<N>& target,
                              const WorldModel<N>& world, const std::string& path) {
    if (!(k1 > 0.0)) throw ValidationError(path + ".k1 must be positive");
    if (!(kappa > 0.0)) throw ValidationError(path + ".kappa must be positive");
    if (!(delta1 > 0.0)) throw ValidationError(path + ".delta1 must be positive");
    try {
      if (!(world.safety_margin(target).d_x > 0.0))
        throw ValidationError(path + ".target must lie strictly inside the free space");
    } catch (const InsideObstacle&) {
      throw ValidationError(path + ".target must lie strictly inside the free space");
    }
  }

  Params params_;
  WorldModel<N> world_;
};

}  // namespace sonav
