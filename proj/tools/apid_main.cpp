// apid: simulate, Ziegler-Nichols probe, staged BO tuning and compliance sweeps.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration error, 3 simulation
// diverged, 4 Ziegler-Nichols probe failed.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "apid/config_io.hpp"
#include "apid/csv.hpp"
#include "apid/errors.hpp"
#include "apid/harness.hpp"

namespace fs = std::filesystem;
using apid::io::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;
constexpr int kZnFailed = 4;

apid::harness::Scenario scenario_or_default(const std::string& path) {
  return path.empty() ? apid::harness::default_scenario() : apid::io::load_scenario(path);
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  fs::create_directories(out);
  return out;
}

json costs_json(const std::vector<double>& costs) {
  json a = json::array();
  for (double c : costs) a.push_back(c);
  return a;
}

struct SimArgs {
  std::string scenario;
  std::string controllers;
  std::string out = "out";
  std::size_t decimate = 0;
};

int cmd_sim(const SimArgs& a) {
  const auto scenario = scenario_or_default(a.scenario);
  const auto assignment = apid::io::load_controllers(a.controllers, scenario.arm.n_links());
  apid::harness::CostWeights w;
  w.decimate_to_n = a.decimate;
  const auto trace = apid::harness::rollout(scenario, assignment, w);
  const fs::path out = prepare_out(a.out);
  apid::io::write_rollout_csv(out / "rollout.csv", trace);
  apid::io::write_json_file(out / "costs.json", json{{"joint_costs", costs_json(trace.joint_cost)}});
  for (std::size_t j = 0; j < trace.joint_cost.size(); ++j) {
    std::cout << "joint " << j + 1 << " cost " << apid::io::format_double(trace.joint_cost[j]) << '\n';
  }
  return kOk;
}

struct ZnArgs {
  std::string scenario;
  std::string out = "out";
};

int cmd_zn(const ZnArgs& a) {
  const auto scenario = scenario_or_default(a.scenario);
  auto probe = apid::harness::StagedTuneOptions::default_probe();
  probe.dt = scenario.dt;
  json joints = json::array();
  for (std::size_t j = 0; j < scenario.arm.n_links(); ++j) {
    const auto zn = apid::control::ziegler_nichols_tune(scenario.arm, j, scenario.initial_state.q, probe);
    joints.push_back({{"type", "pid"},
                      {"kp", zn.gains.kp},
                      {"ki", zn.gains.ki},
                      {"kd", zn.gains.kd},
                      {"ultimate_gain", zn.ultimate.gain},
                      {"ultimate_period", zn.ultimate.period}});
    std::cout << "joint " << j + 1 << " Ku " << apid::io::format_double(zn.ultimate.gain) << " Tu "
              << apid::io::format_double(zn.ultimate.period) << " -> kp " << apid::io::format_double(zn.gains.kp)
              << " ki " << apid::io::format_double(zn.gains.ki) << " kd " << apid::io::format_double(zn.gains.kd)
              << '\n';
  }
  apid::io::write_json_file(prepare_out(a.out) / "zn_gains.json", json{{"joints", joints}});
  return kOk;
}

struct TuneArgs {
  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 42;
  std::size_t budget = 20;
  std::size_t decimate = 0;
  bool learn_length_scale = false;
};

int cmd_tune(const TuneArgs& a) {
  if (a.budget < 6) throw apid::ConfigError("budget", "must be at least 6");
  const auto scenario = scenario_or_default(a.scenario);
  apid::harness::StagedTuneOptions opts;
  opts.seed = a.seed;
  opts.budget_per_joint = a.budget;
  opts.weights.decimate_to_n = a.decimate;
  opts.learn_length_scale = a.learn_length_scale;
  const auto result = apid::harness::staged_tune(scenario, opts);

  const fs::path out = prepare_out(a.out);
  for (const auto& c : result.campaigns) {
    apid::io::write_bo_trace_csv(out / ("bo_trace_joint" + std::to_string(c.joint + 1) + ".csv"), c.trace, c.box);
  }
  apid::io::write_json_file(out / "best_params.json", apid::io::controllers_to_json(result.final_assignment));
  apid::io::write_json_file(out / "zn_params.json", apid::io::controllers_to_json(result.baseline));

  const auto baseline = apid::harness::rollout(scenario, result.baseline, opts.weights);
  const auto tuned = apid::harness::rollout(scenario, result.final_assignment, opts.weights);
  apid::io::write_rollout_csv(out / "rollout_baseline.csv", baseline);
  apid::io::write_rollout_csv(out / "rollout_tuned.csv", tuned);

  json campaigns = json::array();
  for (const auto& c : result.campaigns) {
    campaigns.push_back({{"joint", c.joint + 1},
                         {"ultimate_gain", c.zn.ultimate.gain},
                         {"ultimate_period", c.zn.ultimate.period},
                         {"start_cost", c.start_cost},
                         {"best_cost", c.trace.best().cost},
                         {"best_iteration", c.trace.best().iteration}});
  }
  apid::io::write_json_file(out / "summary.json", json{{"seed", a.seed},
                                                       {"budget_per_joint", a.budget},
                                                       {"baseline_costs", costs_json(result.baseline_costs)},
                                                       {"final_costs", costs_json(result.final_costs)},
                                                       {"campaigns", campaigns}});
  for (std::size_t j = 0; j < result.final_costs.size(); ++j) {
    std::cout << "joint " << j + 1 << " baseline " << apid::io::format_double(result.baseline_costs[j])
              << " tuned " << apid::io::format_double(result.final_costs[j]) << " ratio "
              << apid::io::format_double(result.final_costs[j] / result.baseline_costs[j]) << '\n';
  }
  return kOk;
}

struct ComplianceArgs {
  std::string scenario;
  std::string out = "out";
  std::string grid;
  double stiffness_scale = 1.0;
};

struct Axis {
  double lo, hi;
  std::size_t count;
};

std::vector<Axis> parse_grid(const std::string& spec, std::size_t n) {
  std::vector<Axis> axes;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Axis ax{};
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    long long count = 0;
    if (!(is >> ax.lo >> c1 >> ax.hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 ||
        !(is >> std::ws).eof()) {
      throw apid::ConfigError("grid", "expected lo:hi:count, got '" + item + "'");
    }
    if (count == 1 && ax.lo != ax.hi) throw apid::ConfigError("grid", "count 1 needs lo == hi in '" + item + "'");
    ax.count = static_cast<std::size_t>(count);
    axes.push_back(ax);
  }
  if (axes.size() != n) {
    throw apid::ConfigError("grid", "expected " + std::to_string(n) + " axes, got " + std::to_string(axes.size()));
  }
  return axes;
}

std::vector<apid::dynamics::Vec> grid_points(const std::vector<Axis>& axes) {
  std::vector<apid::dynamics::Vec> pts;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    apid::dynamics::Vec q(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto& ax = axes[i];
      q[static_cast<Eigen::Index>(i)] =
          ax.count == 1 ? ax.lo : ax.lo + (ax.hi - ax.lo) * static_cast<double>(idx[i]) / static_cast<double>(ax.count - 1);
    }
    pts.push_back(q);
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].count) break;
      idx[k] = 0;
      if (k == 0) return pts;
    }
    if (axes.empty()) return pts;
  }
}

int cmd_compliance(const ComplianceArgs& a) {
  auto arm = a.scenario.empty() ? apid::harness::default_scenario().arm
                                : apid::io::arm_from_json(apid::io::read_json_file(a.scenario).at("arm"));
  if (!(a.stiffness_scale > 0.0)) throw apid::ConfigError("stiffness-scale", "must be > 0");
  for (double& k : arm.joint_stiffness) k *= a.stiffness_scale;
  const auto axes = parse_grid(a.grid, arm.n_links());
  const auto pts = grid_points(axes);
  const auto samples = apid::dynamics::compliance_sweep_parallel(arm, pts);
  apid::io::write_compliance_csv(prepare_out(a.out) / "compliance.csv", pts, samples);
  std::size_t singular = 0;
  for (const auto& s : samples) singular += s.singular ? 1 : 0;
  std::cout << pts.size() << " configurations, " << singular << " singular\n";
  return kOk;
}

void apply_thread_cap() {
  if (const char* env = std::getenv("APID_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"Adaptive PID tuning for a mobile manipulator"};
  app.require_subcommand(1);

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("sim", "Roll out a scenario under a controller set");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON (default: built-in scenario)");
  sim_cmd->add_option("--controllers", sim.controllers, "Controllers JSON")->required();
  sim_cmd->add_option("--out", sim.out, "Output directory");
  sim_cmd->add_option("--decimate", sim.decimate, "Score N evenly strided samples (0 = every step)");

  ZnArgs zn;
  auto* zn_cmd = app.add_subcommand("zn", "Ziegler-Nichols gains for every joint");
  zn_cmd->add_option("--scenario", zn.scenario, "Scenario JSON (default: built-in scenario)");
  zn_cmd->add_option("--out", zn.out, "Output directory");

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "Staged per-joint Bayesian optimization");
  tune_cmd->add_option("--scenario", tune.scenario, "Scenario JSON (default: built-in scenario)");
  tune_cmd->add_option("--seed", tune.seed, "RNG seed");
  tune_cmd->add_option("--budget", tune.budget, "Evaluations per joint (>= 6)");
  tune_cmd->add_option("--out", tune.out, "Output directory");
  tune_cmd->add_option("--decimate", tune.decimate, "Score N evenly strided samples (0 = every step)");
  tune_cmd->add_flag("--learn-length-scale", tune.learn_length_scale, "Select the GP length scale by marginal likelihood");

  ComplianceArgs comp;
  auto* comp_cmd = app.add_subcommand("compliance", "Compliance ellipsoids over a configuration grid");
  comp_cmd->add_option("--scenario", comp.scenario, "Scenario JSON providing the arm");
  comp_cmd->add_option("--grid", comp.grid, "lo:hi:count per joint, comma separated")->required();
  comp_cmd->add_option("--stiffness-scale", comp.stiffness_scale, "Multiply every joint stiffness");
  comp_cmd->add_option("--out", comp.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim_cmd) return cmd_sim(sim);
    if (*zn_cmd) return cmd_zn(zn);
    if (*tune_cmd) return cmd_tune(tune);
    if (*comp_cmd) return cmd_compliance(comp);
  } catch (const apid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const apid::SimulationDiverged& e) {
    std::cerr << "simulation diverged at t = " << apid::io::format_double(e.time()) << " s\n";
    return kDiverged;
  } catch (const apid::NoOscillationFound& e) {
    std::cerr << "ziegler-nichols failed: " << e.what() << '\n';
    return kZnFailed;
  } catch (const apid::UnstableProbe& e) {
    std::cerr << "ziegler-nichols failed: " << e.what() << '\n';
    return kZnFailed;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
