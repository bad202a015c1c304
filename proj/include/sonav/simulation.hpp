#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sonav/controllers.hpp"
#include "sonav/errors.hpp"
#include "sonav/geometry.hpp"
#include "sonav/planners.hpp"
#include "sonav/vec.hpp"

namespace sonav {

template <int N>
struct State {
  Vec<N> x{};
  Vec<N> v{};
};

/// Fixed-step RK4 with proximity-triggered substepping. The damping gain
/// is only C0 at its knots, so a fixed step keeps the error analysis and
/// determinism simple; refinement handles the 1/d_x regime near obstacles.
struct IntegratorConfig {
  double dt = 1e-3;
  double t_max = 200.0;
  double stop_pos_tol = 1e-2;
  double stop_vel_tol = 1e-2;
  double substep_margin = 0.25;  // shell width below which dt is refined
  int substep_factor = 4;

  void validate(const std::string& path = "integrator") const {
    if (!(dt > 0.0)) throw ValidationError(path + ".dt must be positive");
    if (!(t_max > 0.0)) throw ValidationError(path + ".t_max must be positive");
    if (!(dt <= t_max)) throw ValidationError(path + ".dt must not exceed t_max");
    if (!(stop_pos_tol > 0.0)) throw ValidationError(path + ".stop_pos_tol must be positive");
    if (!(stop_vel_tol > 0.0)) throw ValidationError(path + ".stop_vel_tol must be positive");
    if (!(substep_margin > 0.0))
      throw ValidationError(path + ".substep_margin must be positive");
    if (substep_factor < 2) throw ValidationError(path + ".substep_factor must be >= 2");
  }
};

template <int N>
struct Sample {
  double t = 0.0;
  Vec<N> x{};
  Vec<N> v{};
  double d_x = 0.0;
  double z_norm = 0.0;  // ||v - v_d(x)||
  Vec<N> u{};
  double u_norm = 0.0;
};

enum class Outcome { Converged, Collided, TimedOut };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Converged:
      return "Converged";
    case Outcome::Collided:
      return "Collided";
    case Outcome::TimedOut:
      return "TimedOut";
  }
  return "?";
}

template <int N>
struct Trajectory {
  std::vector<Sample<N>> samples;
  Outcome outcome = Outcome::TimedOut;
  double collision_time = std::numeric_limits<double>::quiet_NaN();
};

struct Metrics {
  double path_length = 0.0;
  double min_d_x = 0.0;
  double final_pos_err = 0.0;
  double final_vel_norm = 0.0;
  double settling_time = 0.0;  // first t after which pos err stays below tol
  double max_u_norm = 0.0;
};

/// One classical RK4 step of the closed-loop field (v, accel(x, v)).
template <int N, typename AccelFn>
State<N> rk4_step(const State<N>& s, AccelFn&& accel, double dt) {
  const Vec<N> k1x = s.v;
  const Vec<N> k1v = accel(s.x, s.v);
  const Vec<N> k2x = s.v + (dt / 2) * k1v;
  const Vec<N> k2v = accel(s.x + (dt / 2) * k1x, k2x);
  const Vec<N> k3x = s.v + (dt / 2) * k2v;
  const Vec<N> k3v = accel(s.x + (dt / 2) * k2x, k3x);
  const Vec<N> k4x = s.v + dt * k3v;
  const Vec<N> k4v = accel(s.x + dt * k3x, k4x);
  State<N> out;
  out.x = s.x + (dt / 6) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.v = s.v + (dt / 6) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  return out;
}

/// One RK4 step of the chosen control law; every stage point is checked
/// against the free space and the step throws Unsafe as soon as any stage
/// has d_x <= 0. The caller turns that into a collision event.
template <int N>
State<N> step(const State<N>& s, const ControllerConfig& cfg, const MotionPlanner<N>& planner,
              const WorldModel<N>& world, double dt) {
  auto accel = [&](const Vec<N>& x, const Vec<N>& v) {
    const double d_x = world.safety_margin(x).d_x;
    if (!(d_x > 0.0)) throw Unsafe("RK4 stage point has d_x <= 0");
    return detail::control_at(x, v, d_x, planner, cfg);
  };
  return rk4_step(s, accel, dt);
}

namespace detail {

/// Control evaluation that stays defined marginally past contact: the
/// damping argument is floored at a tiny positive value. Only used while
/// localizing a collision time, where the control value is immaterial at
/// the 1e-6 s scale being resolved.
template <int N>
Vec<N> control_permissive(const Vec<N>& x, const Vec<N>& v, const MotionPlanner<N>& planner,
                          const ControllerConfig& cfg, const WorldModel<N>& world) {
  if (cfg.kind == ControllerKind::FixedDamping)
    return control_at(x, v, 1.0, planner, cfg);
  return control_at(x, v, std::max(world.safety_margin(x).d_x, 1e-12), planner, cfg);
}

}  // namespace detail

/// Integrates the closed loop until convergence to (x_d, 0), collision
/// (d_x <= 0, crossing time bisected to 1e-6 s), or t_max.
template <int N>
Trajectory<N> simulate(const State<N>& initial, const ControllerConfig& cfg,
                       const MotionPlanner<N>& planner, const WorldModel<N>& world,
                       const IntegratorConfig& ic) {
  ic.validate();
  if (!(world.safety_margin(initial.x).d_x > 0.0))
    throw BadInitialState("initial position has d_x <= 0");

  Trajectory<N> traj;
  const Vec<N>& target = planner.target();

  auto record = [&](double t, const State<N>& s, const Vec<N>& u, double d_x) {
    Sample<N> smp;
    smp.t = t;
    smp.x = s.x;
    smp.v = s.v;
    smp.d_x = d_x;
    smp.z_norm = (s.v - planner.velocity(s.x)).norm();
    smp.u = u;
    smp.u_norm = u.norm();
    traj.samples.push_back(smp);
  };

  auto permissive = [&](const Vec<N>& x, const Vec<N>& v) {
    return detail::control_permissive(x, v, planner, cfg, world);
  };

  State<N> s = initial;
  double t = 0.0;
  double dd = world.safety_margin(s.x).d_x;
  record(t, s, detail::control_at(s.x, s.v, dd, planner, cfg), dd);

  while (true) {
    if ((s.x - target).norm() < ic.stop_pos_tol && s.v.norm() < ic.stop_vel_tol) {
      traj.outcome = Outcome::Converged;
      return traj;
    }
    if (t >= ic.t_max - 1e-15) {
      traj.outcome = Outcome::TimedOut;
      return traj;
    }

    // Refine dt while inside the shell, keeping h roughly proportional to
    // d_x so the 1/d_x damping stays within the explicit-RK4 stability
    // region. Depth is capped: a trajectory actually crossing d_x = 0
    // (the fixed-damping baseline) must reach the crossing in finite
    // steps so the bisection can take over.
    double h = ic.dt;
    double margin = ic.substep_margin;
    for (int level = 0; dd < margin && level < 6; ++level) {
      h /= ic.substep_factor;
      margin /= ic.substep_factor;
    }
    h = std::min(h, ic.t_max - t);

    bool hit = false;
    State<N> next;
    double dd_next = 0.0;
    try {
      next = step(s, cfg, planner, world, h);
      dd_next = world.safety_margin(next.x).d_x;
      if (!(dd_next > 0.0)) hit = true;
    } catch (const Unsafe&) {
      hit = true;
    }

    if (hit) {
      // Localize the crossing of d_x = 0 within (t, t + 2h]: scan for a
      // step size whose endpoint is unsafe, then bisect to 1e-6 s.
      auto endpoint = [&](double hh) { return rk4_step(s, permissive, hh); };
      auto endpoint_dx = [&](const State<N>& e) {
        try {
          return world.safety_margin(e.x).d_x;
        } catch (const InsideObstacle&) {
          return -1.0;
        }
      };
      double lo = 0.0, hi = 0.0;
      for (int k = 1; k <= 16 && hi == 0.0; ++k) {
        const double hh = 2.0 * h * k / 16.0;
        (endpoint_dx(endpoint(hh)) <= 0.0 ? hi : lo) = hh;
      }
      if (hi == 0.0) {
        // An interior RK4 stage dipped below d_x = 0 while every endpoint
        // in the window stayed safe; count the stage hit as the collision.
        lo = 0.0;
        hi = h;
        auto stage_unsafe = [&](double hh) {
          try {
            step(s, cfg, planner, world, hh);
            return false;
          } catch (const Unsafe&) {
            return true;
          }
        };
        while (hi - lo > 1e-6) {
          const double mid = 0.5 * (lo + hi);
          (stage_unsafe(mid) ? hi : lo) = mid;
        }
      } else {
        while (hi - lo > 1e-6) {
          const double mid = 0.5 * (lo + hi);
          (endpoint_dx(endpoint(mid)) <= 0.0 ? hi : lo) = mid;
        }
      }
      const State<N> sc = endpoint(hi);
      const double d_hit = endpoint_dx(sc);
      record(t + hi, sc, permissive(sc.x, sc.v), d_hit);
      traj.outcome = Outcome::Collided;
      traj.collision_time = t + hi;
      return traj;
    }

    s = next;
    dd = dd_next;
    t += h;
    record(t, s, detail::control_at(s.x, s.v, dd, planner, cfg), dd);
  }
}

/// Polyline length of the position trace.
template <int N>
double path_length(const Trajectory<N>& traj) {
  if (traj.samples.size() < 2)
    throw TooShort("path_length needs at least two samples");
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k)
    len += (traj.samples[k + 1].x - traj.samples[k].x).norm();
  return len;
}

template <int N>
Metrics compute_metrics(const Trajectory<N>& traj, const Vec<N>& target,
                        const IntegratorConfig& ic) {
  Metrics m;
  m.min_d_x = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    m.min_d_x = std::min(m.min_d_x, s.d_x);
    m.max_u_norm = std::max(m.max_u_norm, s.u_norm);
  }
  if (traj.samples.size() >= 2) m.path_length = path_length(traj);
  const auto& last = traj.samples.back();
  m.final_pos_err = (last.x - target).norm();
  m.final_vel_norm = last.v.norm();
  m.settling_time = std::numeric_limits<double>::infinity();
  for (auto it = traj.samples.rbegin(); it != traj.samples.rend(); ++it) {
    if ((it->x - target).norm() >= ic.stop_pos_tol) break;
    m.settling_time = it->t;
  }
  return m;
}

template <int N>
struct RunResult {
  Trajectory<N> trajectory;
  Metrics metrics;
  bool ok = false;
  std::string error;  // per-run failure, batch keeps going
};

/// Independent simulations over a list of starts; deterministic given the
/// inputs. Per-run errors are collected, not rethrown.
template <int N>
std::vector<RunResult<N>> batch_run(const std::vector<State<N>>& starts,
                                    const ControllerConfig& cfg, const MotionPlanner<N>& planner,
                                    const WorldModel<N>& world, const IntegratorConfig& ic) {
  std::vector<RunResult<N>> results;
  results.reserve(starts.size());
  for (const auto& s0 : starts) {
    RunResult<N> r;
    try {
      r.trajectory = simulate(s0, cfg, planner, world, ic);
      r.metrics = compute_metrics(r.trajectory, planner.target(), ic);
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace sonav
