#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sonav/analysis.hpp"
#include "sonav/controllers.hpp"
#include "sonav/errors.hpp"
#include "sonav/geometry.hpp"
#include "sonav/planners.hpp"
#include "sonav/simulation.hpp"
#include "sonav/vec.hpp"

namespace sonav {

using json = nlohmann::json;

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Standard-normal vector from the named generator recorded in scenario
/// files ("mt19937_64-boxmuller"): Box-Muller over 53-bit uniforms, fully
/// deterministic for a given seed.
template <int N>
Vec<N> randn_velocity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u01 = [&]() {
    const double u = (rng() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  };
  Vec<N> out{};
  int have = 0;
  while (have < N) {
    const double r = std::sqrt(-2.0 * std::log(u01()));
    const double a = 2.0 * 3.14159265358979323846 * u01();
    out[have++] = r * std::cos(a);
    if (have < N) out[have++] = r * std::sin(a);
  }
  return out;
}

template <int N>
struct Start {
  Vec<N> x{};
  Vec<N> v{};
  bool random_v = false;
  std::uint64_t seed = 0;

  Vec<N> resolved_v() const { return random_v ? randn_velocity<N>(seed) : v; }
};

template <int N>
struct PlannerChoice {
  std::variant<NfPlannerParams<N>, ModifiedPlannerParams<N>> params;

  MotionPlanner<N> make(const WorldModel<N>& world) const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params))
      return MotionPlanner<N>::navigation_function(*nf, world);
    return MotionPlanner<N>::modified_sensor_based(
        std::get<ModifiedPlannerParams<N>>(params), world);
  }

  const Vec<N>& target() const {
    if (const auto* nf = std::get_if<NfPlannerParams<N>>(&params)) return nf->target;
    return std::get<ModifiedPlannerParams<N>>(params).target;
  }
};

inline constexpr const char* kRngName = "mt19937_64-boxmuller";

/// A fully validated experiment description: world, planner, control law,
/// integrator, and the set of initial states.
template <int N>
struct Scenario {
  std::string name;
  std::string provenance;
  WorldModel<N> world;
  PlannerChoice<N> planner;
  ControllerConfig controller;
  IntegratorConfig integrator;
  std::vector<Start<N>> starts;
  std::string outputs;
  std::vector<std::string> warnings;  // derived at load time, not serialized

  MotionPlanner<N> make_planner() const { return planner.make(world); }

  std::vector<State<N>> initial_states() const {
    std::vector<State<N>> out;
    out.reserve(starts.size());
    for (const auto& s : starts) out.push_back({s.x, s.resolved_v()});
    return out;
  }
};

using ScenarioAny = std::variant<Scenario<2>, Scenario<3>>;

namespace detail {

inline void require_keys(const json& j, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ValidationError(path + ": unknown key \"" + key + "\"");
  }
}

inline double get_number(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ValidationError(path + "." + key + " is required");
  if (!j[key].is_number()) throw ValidationError(path + "." + key + " must be a number");
  return j[key].get<double>();
}

inline double get_number_or(const json& j, const std::string& path, const char* key,
                            double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ValidationError(path + "." + key + " must be a number");
  return j[key].get<double>();
}

inline std::string get_string(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ValidationError(path + "." + key + " is required");
  if (!j[key].is_string()) throw ValidationError(path + "." + key + " must be a string");
  return j[key].get<std::string>();
}

template <int N>
Vec<N> get_vec(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N)
    throw ValidationError(path + " must be an array of " + std::to_string(N) + " numbers");
  Vec<N> out;
  for (int i = 0; i < N; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      throw ValidationError(path + " must contain only numbers");
    out[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

template <int N>
Mat<N> get_mat(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N)
    throw ValidationError(path + " must be an " + std::to_string(N) + "x" +
                          std::to_string(N) + " matrix");
  Mat<N> out;
  for (int i = 0; i < N; ++i) {
    const Vec<N> row = get_vec<N>(j[static_cast<std::size_t>(i)],
                                  path + "[" + std::to_string(i) + "]");
    for (int k = 0; k < N; ++k) out(i, k) = row[k];
  }
  return out;
}

template <int N>
json vec_json(const Vec<N>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v[i]);
  return a;
}

template <int N>
json mat_json(const Mat<N>& m) {
  json a = json::array();
  for (int i = 0; i < N; ++i) {
    json row = json::array();
    for (int k = 0; k < N; ++k) row.push_back(m(i, k));
    a.push_back(row);
  }
  return a;
}

template <int N>
Obstacle<N> parse_obstacle(const json& j, const std::string& path) {
  require_keys(j, path, {"type", "center", "radius", "shape", "anchor"});
  const std::string type = get_string(j, path, "type");
  Obstacle<N> ob;
  if (!j.contains("center")) throw ValidationError(path + ".center is required");
  const Vec<N> center = get_vec<N>(j["center"], path + ".center");
  if (type == "sphere" || type == "boundary_sphere") {
    if (j.contains("shape"))
      throw ValidationError(path + ".shape only applies to ellipsoids");
    const double radius = get_number(j, path, "radius");
    ob = (type == "sphere") ? Obstacle<N>::sphere(center, radius)
                            : Obstacle<N>::boundary_sphere(center, radius);
  } else if (type == "ellipsoid") {
    if (j.contains("radius"))
      throw ValidationError(path + ".radius only applies to spheres");
    if (!j.contains("shape")) throw ValidationError(path + ".shape is required");
    ob = Obstacle<N>::ellipsoid(center, get_mat<N>(j["shape"], path + ".shape"));
  } else {
    throw ValidationError(path + ".type must be sphere, ellipsoid, or boundary_sphere");
  }
  if (j.contains("anchor")) ob.anchor = get_vec<N>(j["anchor"], path + ".anchor");
  return ob;
}

template <int N>
json obstacle_json(const Obstacle<N>& ob) {
  json j;
  switch (ob.kind) {
    case ObstacleKind::Sphere:
      j["type"] = "sphere";
      j["radius"] = ob.radius;
      break;
    case ObstacleKind::BoundarySphere:
      j["type"] = "boundary_sphere";
      j["radius"] = ob.radius;
      break;
    case ObstacleKind::Ellipsoid:
      j["type"] = "ellipsoid";
      j["shape"] = mat_json(ob.shape);
      break;
  }
  j["center"] = vec_json(ob.center);
  j["anchor"] = vec_json(ob.anchor);
  return j;
}

inline std::uint64_t parse_randn_seed(const std::string& s, const std::string& path) {
  if (s.rfind("randn(", 0) != 0 || s.back() != ')')
    throw ValidationError(path + " must be a velocity array or \"randn(<seed>)\"");
  const std::string digits = s.substr(6, s.size() - 7);
  if (digits.empty()) throw ValidationError(path + ": randn() needs a seed");
  std::uint64_t seed = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') throw ValidationError(path + ": randn seed must be an integer");
    seed = seed * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return seed;
}

template <int N>
Scenario<N> parse_scenario(const json& j) {
  require_keys(j, "scenario",
               {"name", "provenance", "dimension", "rng", "world", "planner", "controller",
                "integrator", "starts", "outputs"});

  const std::string name = get_string(j, "scenario", "name");
  std::string provenance;
  if (j.contains("provenance")) provenance = get_string(j, "scenario", "provenance");
  if (j.contains("rng")) {
    if (j["rng"].get<std::string>() != kRngName)
      throw ValidationError(std::string("rng must be \"") + kRngName + "\"");
  }

  if (!j.contains("world")) throw ValidationError("world is required");
  const json& jw = j["world"];
  require_keys(jw, "world", {"robot_radius", "delta_u", "obstacles"});
  const double robot_radius = get_number(jw, "world", "robot_radius");
  const double delta_u = get_number_or(jw, "world", "delta_u", robot_radius);
  std::vector<Obstacle<N>> obstacles;
  if (jw.contains("obstacles")) {
    if (!jw["obstacles"].is_array())
      throw ValidationError("world.obstacles must be an array");
    std::size_t i = 0;
    for (const auto& jo : jw["obstacles"])
      obstacles.push_back(
          parse_obstacle<N>(jo, "world.obstacles[" + std::to_string(i++) + "]"));
  }
  WorldModel<N> world(std::move(obstacles), robot_radius, delta_u);

  if (!j.contains("planner")) throw ValidationError("planner is required");
  const json& jp = j["planner"];
  const std::string ptype = get_string(jp, "planner", "type");
  PlannerChoice<N> planner;
  if (!jp.contains("target")) throw ValidationError("planner.target is required");
  const Vec<N> target = get_vec<N>(jp["target"], "planner.target");
  if (ptype == "nf") {
    require_keys(jp, "planner", {"type", "k1", "kappa", "delta1", "delta2", "target"});
    NfPlannerParams<N> p;
    p.k1 = get_number(jp, "planner", "k1");
    p.kappa = get_number(jp, "planner", "kappa");
    p.delta1 = get_number(jp, "planner", "delta1");
    p.delta2 = get_number(jp, "planner", "delta2");
    p.target = target;
    planner.params = p;
  } else if (ptype == "modified") {
    require_keys(jp, "planner", {"type", "k1", "kappa", "delta1", "eps1", "eps2", "target"});
    ModifiedPlannerParams<N> p;
    p.k1 = get_number(jp, "planner", "k1");
    p.kappa = get_number(jp, "planner", "kappa");
    p.delta1 = get_number(jp, "planner", "delta1");
    p.eps1 = get_number(jp, "planner", "eps1");
    p.eps2 = get_number(jp, "planner", "eps2");
    p.target = target;
    planner.params = p;
  } else {
    throw ValidationError("planner.type must be nf or modified");
  }

  if (!j.contains("controller")) throw ValidationError("controller is required");
  const json& jc = j["controller"];
  require_keys(jc, "controller", {"kind", "k1", "kd", "eps1", "eps2"});
  ControllerConfig cfg;
  const std::string kind = get_string(jc, "controller", "kind");
  if (kind == "ddf")
    cfg.kind = ControllerKind::Ddf;
  else if (kind == "vtf")
    cfg.kind = ControllerKind::Vtf;
  else if (kind == "fixed")
    cfg.kind = ControllerKind::FixedDamping;
  else
    throw ValidationError("controller.kind must be ddf, vtf, or fixed");
  const double planner_k1 =
      std::visit([](const auto& p) { return p.k1; }, planner.params);
  cfg.k1 = get_number_or(jc, "controller", "k1", planner_k1);
  cfg.kd = get_number(jc, "controller", "kd");
  cfg.schedule.eps1 = get_number(jc, "controller", "eps1");
  cfg.schedule.eps2 = get_number(jc, "controller", "eps2");
  cfg.validate("controller");

  IntegratorConfig ic;
  if (j.contains("integrator")) {
    const json& ji = j["integrator"];
    require_keys(ji, "integrator",
                 {"dt", "t_max", "stop_pos_tol", "stop_vel_tol", "substep_margin",
                  "substep_factor"});
    ic.dt = get_number_or(ji, "integrator", "dt", ic.dt);
    ic.t_max = get_number_or(ji, "integrator", "t_max", ic.t_max);
    ic.stop_pos_tol = get_number_or(ji, "integrator", "stop_pos_tol", ic.stop_pos_tol);
    ic.stop_vel_tol = get_number_or(ji, "integrator", "stop_vel_tol", ic.stop_vel_tol);
    ic.substep_margin =
        get_number_or(ji, "integrator", "substep_margin", cfg.schedule.eps1);
    if (ji.contains("substep_factor")) {
      if (!ji["substep_factor"].is_number_integer())
        throw ValidationError("integrator.substep_factor must be an integer");
      ic.substep_factor = ji["substep_factor"].get<int>();
    }
  } else {
    ic.substep_margin = cfg.schedule.eps1;
  }
  ic.validate("integrator");

  if (!j.contains("starts") || !j["starts"].is_array() || j["starts"].empty())
    throw ValidationError("starts must be a non-empty array");
  std::vector<Start<N>> starts;
  std::size_t si = 0;
  for (const auto& js : j["starts"]) {
    const std::string path = "starts[" + std::to_string(si++) + "]";
    require_keys(js, path, {"x", "v"});
    if (!js.contains("x")) throw ValidationError(path + ".x is required");
    Start<N> st;
    st.x = get_vec<N>(js["x"], path + ".x");
    if (!js.contains("v")) throw ValidationError(path + ".v is required");
    if (js["v"].is_string()) {
      st.random_v = true;
      st.seed = parse_randn_seed(js["v"].get<std::string>(), path + ".v");
    } else {
      st.v = get_vec<N>(js["v"], path + ".v");
    }
    starts.push_back(st);
  }

  std::string outputs = "out/" + name;
  if (j.contains("outputs")) outputs = get_string(j, "scenario", "outputs");

  Scenario<N> sc{name,      provenance, std::move(world), planner, cfg,
                 ic,        starts,     outputs,          {}};

  // semantic validation beyond per-field checks
  sc.make_planner();  // validates gains, knots, target interiority, anchors
  for (std::size_t i = 0; i < sc.starts.size(); ++i) {
    try {
      if (!(sc.world.safety_margin(sc.starts[i].x).d_x > 0.0))
        throw ValidationError("starts[" + std::to_string(i) +
                              "].x must lie strictly inside the free space");
    } catch (const InsideObstacle&) {
      throw ValidationError("starts[" + std::to_string(i) +
                            "].x must lie strictly inside the free space");
    }
  }
  if (cfg.kind == ControllerKind::Ddf || cfg.kind == ControllerKind::FixedDamping) {
    if (!sc.make_planner().has_potential())
      throw ValidationError("controller.kind needs a planner with a scalar potential");
  }
  // Eq.-7 style gain check is advisory: report, never reject, so that
  // under-damped failure modes stay reproducible.
  try {
    const auto planner_obj = sc.make_planner();
    const auto bound = kd_lower_bound(planner_obj.evaluate(planner_obj.target()).jacobian);
    if (!(cfg.kd > bound.bound))
      sc.warnings.push_back("controller.kd = " + format_double(cfg.kd) +
                            " is not above the stability bound " +
                            format_double(bound.bound));
  } catch (const DegenerateEquilibrium& e) {
    sc.warnings.push_back(std::string("gain bound unavailable: ") + e.what());
  }
  return sc;
}

}  // namespace detail

template <int N>
json scenario_to_json(const Scenario<N>& sc) {
  json j;
  j["name"] = sc.name;
  j["provenance"] = sc.provenance;
  j["dimension"] = N;
  j["rng"] = kRngName;
  json jw;
  jw["robot_radius"] = sc.world.robot_radius();
  jw["delta_u"] = sc.world.validity_shell();
  jw["obstacles"] = json::array();
  for (const auto& ob : sc.world.obstacles())
    jw["obstacles"].push_back(detail::obstacle_json(ob));
  j["world"] = jw;
  json jp;
  if (const auto* nf = std::get_if<NfPlannerParams<N>>(&sc.planner.params)) {
    jp["type"] = "nf";
    jp["k1"] = nf->k1;
    jp["kappa"] = nf->kappa;
    jp["delta1"] = nf->delta1;
    jp["delta2"] = nf->delta2;
    jp["target"] = detail::vec_json(nf->target);
  } else {
    const auto& mp = std::get<ModifiedPlannerParams<N>>(sc.planner.params);
    jp["type"] = "modified";
    jp["k1"] = mp.k1;
    jp["kappa"] = mp.kappa;
    jp["delta1"] = mp.delta1;
    jp["eps1"] = mp.eps1;
    jp["eps2"] = mp.eps2;
    jp["target"] = detail::vec_json(mp.target);
  }
  j["planner"] = jp;
  json jc;
  switch (sc.controller.kind) {
    case ControllerKind::Ddf:
      jc["kind"] = "ddf";
      break;
    case ControllerKind::Vtf:
      jc["kind"] = "vtf";
      break;
    case ControllerKind::FixedDamping:
      jc["kind"] = "fixed";
      break;
  }
  jc["k1"] = sc.controller.k1;
  jc["kd"] = sc.controller.kd;
  jc["eps1"] = sc.controller.schedule.eps1;
  jc["eps2"] = sc.controller.schedule.eps2;
  j["controller"] = jc;
  json ji;
  ji["dt"] = sc.integrator.dt;
  ji["t_max"] = sc.integrator.t_max;
  ji["stop_pos_tol"] = sc.integrator.stop_pos_tol;
  ji["stop_vel_tol"] = sc.integrator.stop_vel_tol;
  ji["substep_margin"] = sc.integrator.substep_margin;
  ji["substep_factor"] = sc.integrator.substep_factor;
  j["integrator"] = ji;
  j["starts"] = json::array();
  for (const auto& s : sc.starts) {
    json js;
    js["x"] = detail::vec_json(s.x);
    if (s.random_v)
      js["v"] = "randn(" + std::to_string(s.seed) + ")";
    else
      js["v"] = detail::vec_json(s.v);
    j["starts"].push_back(js);
  }
  j["outputs"] = sc.outputs;
  return j;
}

inline ScenarioAny parse_scenario_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    throw ValidationError("dimension is required and must be 2 or 3");
  const int dim = j["dimension"].get<int>();
  if (dim == 2) return detail::parse_scenario<2>(j);
  if (dim == 3) return detail::parse_scenario<3>(j);
  throw ValidationError("dimension must be 2 or 3");
}

inline ScenarioAny load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
  return parse_scenario_json(j);
}

/// Trajectory CSV: header t,x1..xn,v1..vn,d_x,z_norm,u1..un,u_norm, one
/// row per sample in shortest round-trip decimals, and a final comment
/// line carrying the outcome.
template <int N>
void write_trajectory_csv(const Trajectory<N>& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << 't';
  for (int i = 1; i <= N; ++i) out << ",x" << i;
  for (int i = 1; i <= N; ++i) out << ",v" << i;
  out << ",d_x,z_norm";
  for (int i = 1; i <= N; ++i) out << ",u" << i;
  out << ",u_norm\n";
  for (const auto& s : traj.samples) {
    out << format_double(s.t);
    for (int i = 0; i < N; ++i) out << ',' << format_double(s.x[i]);
    for (int i = 0; i < N; ++i) out << ',' << format_double(s.v[i]);
    out << ',' << format_double(s.d_x) << ',' << format_double(s.z_norm);
    for (int i = 0; i < N; ++i) out << ',' << format_double(s.u[i]);
    out << ',' << format_double(s.u_norm) << '\n';
  }
  out << "# outcome=" << to_string(traj.outcome);
  if (traj.outcome == Outcome::Collided)
    out << " t=" << format_double(traj.collision_time);
  out << '\n';
  if (!out) throw Error("write failed: " + path);
}

template <int N>
json equilibria_report_json(const std::vector<Equilibrium<N>>& eqs) {
  json arr = json::array();
  for (const auto& eq : eqs) {
    json je;
    je["x"] = detail::vec_json(eq.x_star);
    je["residual"] = eq.residual;
    je["kind"] = to_string(eq.kind);
    je["planner_jacobian"] = detail::mat_json(eq.planner_jac);
    json spec = json::array();
    for (const auto& z : eq.closed_loop_spectrum)
      spec.push_back(json::array({z.real(), z.imag()}));
    je["closed_loop_spectrum"] = spec;
    arr.push_back(je);
  }
  return arr;
}

inline json assumption_report_json(const AssumptionReport& rep) {
  json j;
  j["shell_samples"] = rep.shell_samples;
  j["min_inner_product"] = rep.min_inner_product;
  j["max_hessian_norm"] = rep.max_hessian_norm;
  j["max_vd_norm"] = rep.max_vd_norm;
  j["gradient_check_max_err"] = rep.gradient_check_max_err;
  j["uniqueness_violations"] = rep.uniqueness_violations;
  j["delta_d"] = rep.delta_d;
  return j;
}

}  // namespace sonav
