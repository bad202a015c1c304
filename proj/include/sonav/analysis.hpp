#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "sonav/controllers.hpp"
#include "sonav/eigensolve.hpp"
#include "sonav/errors.hpp"
#include "sonav/geometry.hpp"
#include "sonav/planners.hpp"
#include "sonav/vec.hpp"

namespace sonav {

enum class EquilibriumKind { Target, Stable, Saddle, Degenerate };

inline std::string to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Target:
      return "Target";
    case EquilibriumKind::Stable:
      return "Stable";
    case EquilibriumKind::Saddle:
      return "Saddle";
    case EquilibriumKind::Degenerate:
      return "Degenerate";
  }
  return "?";
}

/// An equilibrium with a +/- 1e-10 guard band on real parts: anything
/// inside the band is Degenerate rather than silently classified.
inline EquilibriumKind classify_equilibrium(const std::vector<std::complex<double>>& spectrum) {
  bool pos = false, neg = false;
  for (const auto& z : spectrum) {
    if (std::abs(z.real()) <= 1e-10) return EquilibriumKind::Degenerate;
    (z.real() > 0.0 ? pos : neg) = true;
  }
  if (neg && !pos) return EquilibriumKind::Stable;
  // Mixed signs. A spectrum with no stable direction cannot arise from the
  // lifted closed loops (their trace is -n kd beta < 0), so everything else
  // reports as Saddle.
  return EquilibriumKind::Saddle;
}

template <int N>
struct Equilibrium {
  Vec<N> x_star{};
  double residual = 0.0;  // ||v_d(x*)||
  EquilibriumKind kind = EquilibriumKind::Degenerate;
  Mat<N> planner_jac{};
  std::vector<std::complex<double>> closed_loop_spectrum;
};

template <int N>
struct Box {
  Vec<N> lo{};
  Vec<N> hi{};
};

struct EquilibriumSearchOptions {
  double dedup_tol = 1e-6;
  double residual_tol = 1e-8;
  int max_newton_iters = 80;
  int max_halvings = 30;
};

namespace detail {

template <int N>
bool in_free_space(const WorldModel<N>& world, const Vec<N>& x) {
  try {
    return world.safety_margin(x).d_x > 0.0;
  } catch (const InsideObstacle&) {
    return false;
  }
}

template <int N>
EquilibriumKind classify_from_planner_jac(const Mat<N>& jac) {
  if (std::abs(jac.det()) < 1e-12) return EquilibriumKind::Degenerate;
  const auto roots = characteristic_roots(jac);
  return classify_equilibrium({roots.begin(), roots.end()});
}

}  // namespace detail

/// Finds the zeros of the planner field by damped Newton iteration from a
/// grid of seeds. The planner is only piecewise-smooth across its
/// proximity knots, so steps halve until the residual decreases. Seeds
/// that fail to converge are dropped; converged roots are deduplicated.
template <int N>
std::vector<Equilibrium<N>> find_equilibria(const MotionPlanner<N>& planner,
                                            const WorldModel<N>& world, const Box<N>& region,
                                            int grid_n,
                                            const EquilibriumSearchOptions& opt = {}) {
  if (grid_n < 2) throw ValidationError("find_equilibria: grid_n must be >= 2");
  std::vector<Vec<N>> seeds;
  const int total = [&] {
    int p = 1;
    for (int i = 0; i < N; ++i) p *= grid_n;
    return p;
  }();
  for (int flat = 0; flat < total; ++flat) {
    Vec<N> x;
    int rem = flat;
    for (int i = 0; i < N; ++i) {
      const int k = rem % grid_n;
      rem /= grid_n;
      x[i] = region.lo[i] + (region.hi[i] - region.lo[i]) * k / (grid_n - 1);
    }
    if (detail::in_free_space(world, x)) seeds.push_back(x);
  }

  std::vector<Equilibrium<N>> roots;
  auto try_velocity = [&](const Vec<N>& x, Vec<N>& out) {
    try {
      if (!detail::in_free_space(world, x)) return false;
      out = planner.velocity(x);
      return true;
    } catch (const Error&) {
      return false;
    }
  };

  for (const auto& seed : seeds) {
    Vec<N> x = seed;
    Vec<N> vx;
    if (!try_velocity(x, vx)) continue;
    for (int it = 0; it < opt.max_newton_iters; ++it) {
      if (vx.norm() < 1e-12) break;
      Mat<N> jac;
      try {
        jac = planner.evaluate(x).jacobian;
      } catch (const Error&) {
        break;
      }
      Vec<N> delta;
      try {
        delta = solve(jac, -vx);
      } catch (const NoConvergence&) {
        break;
      }
      double alpha = 1.0;
      bool improved = false;
      for (int halve = 0; halve <= opt.max_halvings; ++halve) {
        Vec<N> trial_v;
        const Vec<N> trial = x + alpha * delta;
        if (try_velocity(trial, trial_v) && trial_v.norm() < vx.norm()) {
          x = trial;
          vx = trial_v;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;
    }
    if (vx.norm() >= opt.residual_tol) continue;

    bool duplicate = false;
    for (const auto& r : roots)
      if ((r.x_star - x).norm() < opt.dedup_tol) {
        duplicate = true;
        break;
      }
    if (duplicate) continue;

    Equilibrium<N> eq;
    eq.x_star = x;
    eq.residual = vx.norm();
    eq.planner_jac = planner.evaluate(x).jacobian;
    eq.kind = ((x - planner.target()).norm() < opt.dedup_tol)
                  ? EquilibriumKind::Target
                  : detail::classify_from_planner_jac(eq.planner_jac);
    roots.push_back(std::move(eq));
  }
  std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) {
    return a.x_star[0] < b.x_star[0];
  });
  return roots;
}

/// Closed-loop Jacobian of the dynamic damping feedback at an equilibrium
/// (x*, 0): [0 I; -k1 hess phi(x*)  -kd beta(d_x*) I]. The velocity is
/// zero there, which kills the grad-beta coupling term.
template <int N>
DenseMatrix assemble_jacobian_ddf(const Vec<N>& x_star, const MotionPlanner<N>& planner,
                                  const ControllerConfig& cfg, const WorldModel<N>& world) {
  const double d_star = world.safety_margin(x_star).d_x;
  if (!(d_star > 0.0)) throw Unsafe("equilibrium has d_x <= 0");
  const double b = beta(d_star, cfg.schedule);

  const double h = 1e-6 * (1.0 + x_star.norm());
  Mat<N> hess;
  for (int j = 0; j < N; ++j) {
    const Vec<N> step = h * Vec<N>::unit(j);
    const Vec<N> gp = planner.potential(x_star + step).grad;
    const Vec<N> gm = planner.potential(x_star - step).grad;
    for (int i = 0; i < N; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  hess = hess.symmetrized();

  DenseMatrix j(2 * N);
  j.set_block(0, N, Mat<N>::identity());
  j.set_block(N, 0, -cfg.k1 * hess);
  j.set_block(N, N, (-cfg.kd * b) * Mat<N>::identity());
  return j;
}

/// Closed-loop Jacobian of the velocity tracking feedback at (x*, 0):
/// [0 I; kd beta J*  -kd beta I + J*] with J* the planner Jacobian at x*.
template <int N>
DenseMatrix assemble_jacobian_vtf(const Vec<N>& x_star, const MotionPlanner<N>& planner,
                                  const ControllerConfig& cfg, const WorldModel<N>& world) {
  const double d_star = world.safety_margin(x_star).d_x;
  if (!(d_star > 0.0)) throw Unsafe("equilibrium has d_x <= 0");
  const double b = beta(d_star, cfg.schedule);
  const Mat<N> jac = planner.evaluate(x_star).jacobian;

  DenseMatrix j(2 * N);
  j.set_block(0, N, Mat<N>::identity());
  j.set_block(N, 0, (cfg.kd * b) * jac);
  j.set_block(N, N, jac + (-cfg.kd * b) * Mat<N>::identity());
  return j;
}

/// Equilibria with the closed-loop spectrum of the configured control law
/// attached and classified.
template <int N>
std::vector<Equilibrium<N>> analyze_equilibria(const MotionPlanner<N>& planner,
                                               const WorldModel<N>& world, const Box<N>& region,
                                               int grid_n, const ControllerConfig& cfg,
                                               const EquilibriumSearchOptions& opt = {}) {
  auto roots = find_equilibria(planner, world, region, grid_n, opt);
  for (auto& eq : roots) {
    const DenseMatrix j = (cfg.kind == ControllerKind::Vtf)
                              ? assemble_jacobian_vtf(eq.x_star, planner, cfg, world)
                              : assemble_jacobian_ddf(eq.x_star, planner, cfg, world);
    eq.closed_loop_spectrum = eigenvalues_dense(j);
    if (eq.kind != EquilibriumKind::Target)
      eq.kind = classify_equilibrium(eq.closed_loop_spectrum);
  }
  return roots;
}

/// Empirical surrogate for the planner and distance-regularity
/// assumptions, sampled on the shell d_x in (0, delta_d). Descriptive
/// only: it reports the observed constants, it certifies nothing.
struct AssumptionReport {
  int shell_samples = 0;
  double min_inner_product = std::numeric_limits<double>::infinity();  // empirical mu
  double max_hessian_norm = 0.0;                                       // empirical H
  double max_vd_norm = 0.0;                                            // empirical D
  double gradient_check_max_err = 0.0;
  int uniqueness_violations = 0;
  double delta_d = 0.0;
};

template <int N>
AssumptionReport check_assumptions(const MotionPlanner<N>& planner, const WorldModel<N>& world,
                                   double delta_d, int n_samples, std::uint64_t seed) {
  if (!(delta_d > 0.0)) throw ValidationError("delta_d must be positive");
  if (delta_d > world.validity_shell())
    throw ValidationError("delta_d must not exceed the world's delta_u");
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");

  const auto [lo, hi] = world.bounding_box(world.robot_radius() + delta_d + 1.0);
  std::mt19937_64 rng(seed);
  auto uniform01 = [&]() { return (rng() >> 11) * 0x1.0p-53; };

  AssumptionReport rep;
  rep.delta_d = delta_d;
  const long budget = 100L * n_samples;
  for (long draw = 0; draw < budget && rep.shell_samples < n_samples; ++draw) {
    Vec<N> x;
    for (int i = 0; i < N; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * uniform01();
    SafetyMargin<N> sm;
    try {
      sm = world.safety_margin(x);
    } catch (const InsideObstacle&) {
      continue;
    }
    if (!(sm.d_x > 0.0)) continue;

    Vec<N> vd;
    try {
      vd = planner.velocity(x);
    } catch (const Error&) {
      continue;
    }
    rep.max_vd_norm = std::max(rep.max_vd_norm, vd.norm());
    if (sm.d_x >= delta_d) continue;

    ++rep.shell_samples;
    rep.min_inner_product = std::min(rep.min_inner_product, vd.dot(sm.eta));
    rep.max_hessian_norm =
        std::max(rep.max_hessian_norm,
                 world.fd_hessian_of_distance(x, WorldModel<N>::hessian_step(x))
                     .frobenius_norm());
    // finite-difference gradient of d_x against the exact unit normal
    const double h = 1e-6 * (1.0 + x.norm());
    Vec<N> grad;
    for (int j = 0; j < N; ++j) {
      const Vec<N> step = h * Vec<N>::unit(j);
      grad[j] = (world.safety_margin(x + step).d_x - world.safety_margin(x - step).d_x) /
                (2.0 * h);
    }
    rep.gradient_check_max_err = std::max(rep.gradient_check_max_err, (grad - sm.eta).norm());
    if (world.near_tie_count(x) > 0) ++rep.uniqueness_violations;
  }
  if (rep.shell_samples == 0)
    throw EmptyShell("no sample landed in the shell d_x in (0, delta_d)");
  return rep;
}

}  // namespace sonav
