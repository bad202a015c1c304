#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include "sonav/eigensolve.hpp"
#include "sonav/errors.hpp"
#include "sonav/geometry.hpp"
#include "sonav/planners.hpp"
#include "sonav/vec.hpp"

namespace sonav {

/// Knots of the dynamic damping gain: beta == 1 beyond eps2, 1/p below
/// eps1, bridged by a line segment in between.
struct DampingSchedule {
  double eps1 = 0.25;
  double eps2 = 0.75;

  void validate(const std::string& path = "schedule") const {
    if (!(eps1 > 0.0 && eps1 < 1.0)) throw ValidationError(path + ".eps1 must lie in (0,1)");
    if (!(eps2 > eps1)) throw ValidationError(path + ".eps2 must exceed eps1");
  }
};

/// Damping multiplier beta(p) >= 1, continuous, non-increasing on (0, eps2].
/// Undefined at contact: throws Unsafe for p <= 0.
inline double beta(double p, const DampingSchedule& s) {
  if (!(p > 0.0)) throw Unsafe("damping gain undefined at d_x <= 0");
  if (p >= s.eps2) return 1.0;
  if (p <= s.eps1) return 1.0 / p;
  return (s.eps2 - s.eps1 * s.eps1 + (s.eps1 - 1.0) * p) / (s.eps1 * (s.eps2 - s.eps1));
}

enum class ControllerKind { Ddf, Vtf, FixedDamping };

struct ControllerConfig {
  ControllerKind kind = ControllerKind::Ddf;
  double k1 = 1.0;
  double kd = 1.0;
  DampingSchedule schedule{};

  void validate(const std::string& path = "controller") const {
    if (!(k1 > 0.0)) throw ValidationError(path + ".k1 must be positive");
    if (!(kd > 0.0)) throw ValidationError(path + ".kd must be positive");
    schedule.validate(path);
  }
};

namespace detail {

/// Control evaluation with the safety margin already in hand; the
/// simulator computes d_x once per RK4 stage and shares it.
template <int N>
Vec<N> control_at(const Vec<N>& x, const Vec<N>& v, double d_x,
                  const MotionPlanner<N>& planner, const ControllerConfig& cfg) {
  switch (cfg.kind) {
    case ControllerKind::Ddf: {
      const double b = beta(d_x, cfg.schedule);
      const auto pot = planner.potential(x);
      return -cfg.k1 * pot.grad - (cfg.kd * b) * v;
    }
    case ControllerKind::Vtf: {
      const double b = beta(d_x, cfg.schedule);
      const auto eval = planner.evaluate(x);
      return -(cfg.kd * b) * (v - eval.v_d) + eval.jacobian * v;
    }
    case ControllerKind::FixedDamping: {
      const auto pot = planner.potential(x);
      return -cfg.k1 * pot.grad - cfg.kd * v;
    }
  }
  throw Error("unreachable controller kind");
}

}  // namespace detail

/// Dynamic damping feedback u = -k1 grad phi(x) - kd beta(d_x) v.
/// Requires a planner that exposes the scalar potential.
template <int N>
Vec<N> ddf_control(const Vec<N>& x, const Vec<N>& v, const MotionPlanner<N>& planner,
                   const ControllerConfig& cfg, const WorldModel<N>& world) {
  ControllerConfig c = cfg;
  c.kind = ControllerKind::Ddf;
  return detail::control_at(x, v, world.safety_margin(x).d_x, planner, c);
}

/// Velocity tracking feedback
/// u = -kd beta(d_x) (v - v_d(x)) + grad v_d(x)^T v;
/// the trailing term is the feedforward J v with J the velocity Jacobian.
template <int N>
Vec<N> vtf_control(const Vec<N>& x, const Vec<N>& v, const MotionPlanner<N>& planner,
                   const ControllerConfig& cfg, const WorldModel<N>& world) {
  ControllerConfig c = cfg;
  c.kind = ControllerKind::Vtf;
  return detail::control_at(x, v, world.safety_margin(x).d_x, planner, c);
}

/// Constant damping baseline u = -k1 grad phi(x) - kd v. No beta and no
/// safety guarantee.
template <int N>
Vec<N> fixed_damping_control(const Vec<N>& x, const Vec<N>& v, const MotionPlanner<N>& planner,
                             const ControllerConfig& cfg) {
  ControllerConfig c = cfg;
  c.kind = ControllerKind::FixedDamping;
  return detail::control_at(x, v, 1.0, planner, c);
}

template <int N>
Vec<N> control(const Vec<N>& x, const Vec<N>& v, const MotionPlanner<N>& planner,
               const ControllerConfig& cfg, const WorldModel<N>& world) {
  const double d_x = cfg.kind == ControllerKind::FixedDamping
                         ? 1.0
                         : world.safety_margin(x).d_x;
  return detail::control_at(x, v, d_x, planner, cfg);
}

struct KdBound {
  double g_max = 0.0;  // largest imaginary part over eig(grad v_d(x_d))
  double r_max = 0.0;  // largest real part
  double bound = 0.0;  // |g_max| / sqrt(|r_max|), 0 when the spectrum is real
};

/// Damping-gain lower bound from the planner Jacobian at the target.
/// Eigenvalues come from the closed-form characteristic roots (n <= 3).
/// Imaginary parts below 1e-8 relative are conjugate-pair rounding dust
/// from the finite-difference Jacobian and are treated as zero, which is
/// the symmetric-Jacobian case where any kd > 0 is admissible.
template <int N>
KdBound kd_lower_bound(const Mat<N>& jac_at_target) {
  const auto roots = characteristic_roots(jac_at_target);
  KdBound out;
  out.g_max = 0.0;
  out.r_max = -std::numeric_limits<double>::infinity();
  for (const auto& g : roots) {
    if (std::abs(g.real()) < 1e-10)
      throw DegenerateEquilibrium(
          "planner Jacobian at the target has an eigenvalue with near-zero real part");
    const double im = (std::abs(g.imag()) <= 1e-8 * (1.0 + std::abs(g.real())))
                          ? 0.0
                          : g.imag();
    out.g_max = std::max(out.g_max, im);
    out.r_max = std::max(out.r_max, g.real());
  }
  out.bound = (out.g_max == 0.0) ? 0.0 : std::abs(out.g_max) / std::sqrt(std::abs(out.r_max));
  return out;
}

}  // namespace sonav
