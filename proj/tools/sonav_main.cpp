#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "sonav/scenario.hpp"

namespace fs = std::filesystem;
using sonav::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

template <int N>
std::string run_and_write(const sonav::Scenario<N>& sc, std::size_t start_index,
                          const std::string& out_dir) {
  const auto planner = sc.make_planner();
  const auto states = sc.initial_states();
  const auto traj = sonav::simulate(states.at(start_index), sc.controller, planner, sc.world,
                                    sc.integrator);
  fs::create_directories(out_dir);
  const std::string path =
      (fs::path(out_dir) / (sc.name + "_start" + std::to_string(start_index) + ".csv"))
          .string();
  sonav::write_trajectory_csv(traj, path);
  const auto m = sonav::compute_metrics(traj, planner.target(), sc.integrator);
  std::ostringstream line;
  line << "start " << start_index << ": " << sonav::to_string(traj.outcome)
       << "  t_end=" << sonav::format_double(traj.samples.back().t)
       << "  min_d_x=" << sonav::format_double(m.min_d_x)
       << "  path_length=" << sonav::format_double(m.path_length) << "  -> " << path;
  return line.str();
}

template <int N>
int cmd_simulate(const sonav::Scenario<N>& sc, std::size_t start_index,
                 const std::string& out_dir) {
  print_warnings(sc.warnings);
  if (start_index >= sc.starts.size()) {
    std::cerr << "error: start index " << start_index << " out of range (have "
              << sc.starts.size() << " starts)\n";
    return kExitUsage;
  }
  std::cout << run_and_write(sc, start_index, out_dir) << "\n";
  return kExitOk;
}

template <int N>
int cmd_batch(const sonav::Scenario<N>& sc, const std::string& out_dir) {
  print_warnings(sc.warnings);
  const auto planner = sc.make_planner();
  const auto results =
      sonav::batch_run(sc.initial_states(), sc.controller, planner, sc.world, sc.integrator);
  fs::create_directories(out_dir);
  json report;
  report["scenario"] = sc.name;
  report["runs"] = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    json jr;
    jr["start"] = i;
    if (!r.ok) {
      jr["error"] = r.error;
      std::cout << "start " << i << ": error: " << r.error << "\n";
    } else {
      const std::string path =
          (fs::path(out_dir) / (sc.name + "_start" + std::to_string(i) + ".csv")).string();
      sonav::write_trajectory_csv(r.trajectory, path);
      jr["outcome"] = sonav::to_string(r.trajectory.outcome);
      jr["path_length"] = r.metrics.path_length;
      jr["min_d_x"] = r.metrics.min_d_x;
      jr["final_pos_err"] = r.metrics.final_pos_err;
      jr["final_vel_norm"] = r.metrics.final_vel_norm;
      jr["settling_time"] = r.metrics.settling_time;
      jr["max_u_norm"] = r.metrics.max_u_norm;
      jr["csv"] = path;
      std::cout << "start " << i << ": " << sonav::to_string(r.trajectory.outcome)
                << "  min_d_x=" << sonav::format_double(r.metrics.min_d_x)
                << "  path_length=" << sonav::format_double(r.metrics.path_length) << "\n";
    }
    report["runs"].push_back(jr);
  }
  const std::string mpath = (fs::path(out_dir) / (sc.name + "_metrics.json")).string();
  std::ofstream mf(mpath, std::ios::binary);
  mf << report.dump(2) << "\n";
  std::cout << "metrics -> " << mpath << "\n";
  return kExitOk;
}

template <int N>
sonav::Box<N> default_region(const sonav::Scenario<N>& sc) {
  auto [lo, hi] = sc.world.bounding_box(sc.world.robot_radius() + 1.0);
  auto grow = [&](const sonav::Vec<N>& p) {
    for (int i = 0; i < N; ++i) {
      lo[i] = std::min(lo[i], p[i] - 1.0);
      hi[i] = std::max(hi[i], p[i] + 1.0);
    }
  };
  grow(sc.planner.target());
  for (const auto& s : sc.starts) grow(s.x);
  return {lo, hi};
}

template <int N>
int cmd_equilibria(const sonav::Scenario<N>& sc, int grid, const std::string& out_file) {
  const auto planner = sc.make_planner();
  const auto region = default_region(sc);
  // DDF closed-loop spectra need a potential; fall back to the VTF loop
  // for planners without one.
  sonav::ControllerConfig cfg = sc.controller;
  if (cfg.kind == sonav::ControllerKind::FixedDamping) cfg.kind = sonav::ControllerKind::Ddf;
  if (!planner.has_potential()) cfg.kind = sonav::ControllerKind::Vtf;
  const auto eqs = sonav::analyze_equilibria(planner, sc.world, region, grid, cfg);
  json j;
  j["scenario"] = sc.name;
  j["grid_n"] = grid;
  j["region"] = {{"lo", sonav::detail::vec_json(region.lo)},
                 {"hi", sonav::detail::vec_json(region.hi)}};
  j["controller_kind"] = cfg.kind == sonav::ControllerKind::Vtf ? "vtf" : "ddf";
  j["equilibria"] = sonav::equilibria_report_json(eqs);
  if (out_file.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw sonav::Error("cannot open for writing: " + out_file);
    out << j.dump(2) << "\n";
    std::cout << "equilibria report -> " << out_file << " (" << eqs.size() << " found)\n";
  }
  return kExitOk;
}

template <int N>
int cmd_kd_bound(const sonav::Scenario<N>& sc) {
  const auto planner = sc.make_planner();
  const auto bound = sonav::kd_lower_bound(planner.evaluate(planner.target()).jacobian);
  std::cout << "g_max = " << sonav::format_double(bound.g_max) << "\n"
            << "r_max = " << sonav::format_double(bound.r_max) << "\n"
            << "bound = " << sonav::format_double(bound.bound) << "\n"
            << "kd    = " << sonav::format_double(sc.controller.kd)
            << (sc.controller.kd > bound.bound ? "  (above bound)" : "  (NOT above bound)")
            << "\n";
  return kExitOk;
}

template <int N>
int cmd_check_assumptions(const sonav::Scenario<N>& sc, int samples, std::uint64_t seed,
                          double delta_d, const std::string& out_file) {
  const auto planner = sc.make_planner();
  if (delta_d <= 0.0)
    delta_d = std::min(sc.controller.schedule.eps1, sc.world.validity_shell());
  const auto rep = sonav::check_assumptions(planner, sc.world, delta_d, samples, seed);
  json j;
  j["scenario"] = sc.name;
  j["samples_requested"] = samples;
  j["seed"] = seed;
  j["report"] = sonav::assumption_report_json(rep);
  if (out_file.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw sonav::Error("cannot open for writing: " + out_file);
    out << j.dump(2) << "\n";
    std::cout << "assumption report -> " << out_file << "\n";
  }
  return kExitOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_plot_data(const std::vector<std::string>& csvs, std::string out_dir) {
  for (const auto& csv : csvs) {
    std::ifstream in(csv);
    if (!in) throw sonav::Error("cannot open trajectory CSV: " + csv);
    std::string header;
    if (!std::getline(in, header)) throw sonav::Error("empty trajectory CSV: " + csv);
    const auto cols = split_csv_line(header);
    auto col_of = [&](const std::string& name) {
      for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return static_cast<long>(i);
      return -1L;
    };
    const long ct = col_of("t"), cdx = col_of("d_x"), cz = col_of("z_norm");
    std::vector<long> cx;
    for (int i = 1; col_of("x" + std::to_string(i)) >= 0; ++i)
      cx.push_back(col_of("x" + std::to_string(i)));
    if (ct < 0 || cdx < 0 || cz < 0 || cx.empty())
      throw sonav::Error("unrecognized trajectory CSV header in " + csv);

    const fs::path src(csv);
    const fs::path dir = out_dir.empty() ? src.parent_path() : fs::path(out_dir);
    fs::create_directories(dir.empty() ? "." : dir);
    const std::string stem = src.stem().string();
    std::ofstream fxy(dir / (stem + ".xy.csv"), std::ios::binary);
    std::ofstream fdx(dir / (stem + ".dx.csv"), std::ios::binary);
    std::ofstream fz(dir / (stem + ".znorm.csv"), std::ios::binary);
    for (std::size_t i = 0; i < cx.size(); ++i) fxy << (i ? "," : "") << "x" << i + 1;
    fxy << "\n";
    fdx << "t,d_x\n";
    fz << "t,z_norm\n";
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto f = split_csv_line(line);
      for (std::size_t i = 0; i < cx.size(); ++i)
        fxy << (i ? "," : "") << f[static_cast<std::size_t>(cx[i])];
      fxy << "\n";
      fdx << f[static_cast<std::size_t>(ct)] << "," << f[static_cast<std::size_t>(cdx)]
          << "\n";
      fz << f[static_cast<std::size_t>(ct)] << "," << f[static_cast<std::size_t>(cz)] << "\n";
    }
    std::cout << csv << " -> " << (dir / (stem + ".{xy,dx,znorm}.csv")).string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-order motion planners lifted to double-integrator robots: "
               "simulation, gain bounds, and equilibrium analysis"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, out_file;
  std::size_t start_index = 0;
  int grid = 40;
  int samples = 2000;
  std::uint64_t seed = 1;
  double delta_d = 0.0;
  std::vector<std::string> csvs;

  auto* sim = app.add_subcommand("simulate", "Run one start of a scenario and write its CSV");
  sim->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  sim->add_option("--out", out_dir, "output directory (default: the scenario's)");
  sim->add_option("--start", start_index, "start index (default 0)");

  auto* bat = app.add_subcommand("batch", "Run all starts of a scenario");
  bat->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  bat->add_option("--out", out_dir, "output directory (default: the scenario's)");

  auto* eqs = app.add_subcommand("equilibria", "Locate and classify planner equilibria");
  eqs->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  eqs->add_option("--grid", grid, "Newton seeds per axis (default 40)");
  eqs->add_option("--out", out_file, "report file (default: stdout)");

  auto* kdb = app.add_subcommand("kd-bound", "Damping-gain lower bound at the target");
  kdb->add_option("--scenario", scenario_path, "scenario JSON file")->required();

  auto* chk = app.add_subcommand("check-assumptions",
                                 "Empirical planner/distance assumption diagnostics");
  chk->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  chk->add_option("--samples", samples, "shell samples (default 2000)");
  chk->add_option("--seed", seed, "RNG seed (default 1)");
  chk->add_option("--delta-d", delta_d, "shell width (default min(eps1, delta_u))");
  chk->add_option("--out", out_file, "report file (default: stdout)");

  auto* pd = app.add_subcommand("plot-data", "Split trajectory CSVs into per-figure files");
  pd->add_option("--csv", csvs, "trajectory CSV file(s)")->required();
  pd->add_option("--out", out_dir, "output directory (default: alongside input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (pd->parsed()) return cmd_plot_data(csvs, out_dir);
    const auto any = sonav::load_scenario(scenario_path);
    return std::visit(
        [&](const auto& sc) -> int {
          const std::string dir = out_dir.empty() ? sc.outputs : out_dir;
          if (sim->parsed()) return cmd_simulate(sc, start_index, dir);
          if (bat->parsed()) return cmd_batch(sc, dir);
          if (eqs->parsed()) return cmd_equilibria(sc, grid, out_file);
          if (kdb->parsed()) return cmd_kd_bound(sc);
          if (chk->parsed()) return cmd_check_assumptions(sc, samples, seed, delta_d, out_file);
          return kExitUsage;
        },
        any);
  } catch (const sonav::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const sonav::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const sonav::SeparationViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
