// End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the exit
// code is nonzero if any criterion fails.

#include <sys/wait.h>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "apid/bayesopt.hpp"
#include "apid/config_io.hpp"
#include "apid/control.hpp"
#include "apid/csv.hpp"
#include "apid/dynamics.hpp"
#include "apid/gp.hpp"
#include "apid/harness.hpp"
#include "apid/integrator.hpp"
#include "apid/ziegler_nichols.hpp"
#include "support.hpp"

#ifndef APID_CLI
#error "APID_CLI must point at the apid executable"
#endif
#ifndef APID_ACCEPTANCE_OUT
#error "APID_ACCEPTANCE_OUT must name an output directory"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace apid;
using dynamics::Mat;
using dynamics::Vec;
using oracle::Rng;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return io::format_double(v); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(APID_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  }
};

CsvTable read_csv(const fs::path& p) {
  CsvTable t;
  std::ifstream in(p);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (const auto& c : split(line)) row.push_back(std::stod(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// 1. BO improvement over the Ziegler-Nichols baseline.

fs::path tune_dir(std::uint64_t seed) { return fs::path(APID_ACCEPTANCE_OUT) / ("tune_seed" + std::to_string(seed)); }

bool tune_improves(std::uint64_t seed, std::string& detail) {
  const fs::path dir = tune_dir(seed);
  fs::create_directories(dir);
  const int code = run_cli("tune --seed " + std::to_string(seed) + " --budget 20 --out " + dir.string(), dir / "log.txt");
  if (code != 0) {
    detail += " seed " + std::to_string(seed) + ": tune exited " + std::to_string(code) + ";";
    return false;
  }
  const auto s = read_json(dir / "summary.json");
  bool ok = true;
  detail += " seed " + std::to_string(seed) + " ratios";
  for (std::size_t j = 0; j < s["baseline_costs"].size(); ++j) {
    const double base = s["baseline_costs"][j], fin = s["final_costs"][j];
    const double ratio = fin / base;
    detail += " " + fmt(ratio);
    ok = ok && fin <= 0.9 * base;
  }
  detail += ";";
  return ok;
}

Outcome criterion_bo() {
  Outcome o;
  if (tune_improves(42, o.detail)) {
    o.pass = true;
    return o;
  }
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) passed += tune_improves(seed, o.detail) ? 1 : 0;
  o.detail += " fallback seeds passed " + std::to_string(passed) + "/5";
  o.pass = passed >= 4;
  return o;
}

// ---------------------------------------------------------------------------
// 2. Gain laws.

Outcome criterion_gain_laws() {
  Rng rng(2001);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    control::NonlinearPidParams p;
    p.kp_min = rng.uniform(0.1, 500.0);
    p.kp_max = p.kp_min * rng.uniform(1.0, 4.0);
    p.tau_p = rng.uniform(0.0, 30.0);
    p.kd_max = rng.uniform(0.1, 100.0);
    p.tau_d = rng.uniform(0.0, 60.0);
    p.ki = rng.uniform(0.0, 1000.0);
    const double e = rng.uniform(-2.0, 2.0);
    const double e2 = std::abs(e) + rng.uniform(0.0, 1.0);
    const double kp = control::kp_of_error(p, e), kd = control::kd_of_error(p, e);
    const bool ok = kp == control::kp_of_error(p, -e) && kd == control::kd_of_error(p, -e) && kp >= p.kp_min &&
                    kp <= p.kp_max && kd > 0.0 && kd <= p.kd_max && control::kp_of_error(p, e2) >= kp &&
                    control::kd_of_error(p, e2) <= kd;
    violations += ok ? 0 : 1;
  }
  const control::NonlinearPidParams spot{10.0, 50.0, 2.0, 5.0, 1.0, 0.0};
  const double kp_ref = 50.0 - 80.0 / (std::exp(-2.0) + std::exp(2.0));
  const double kd_ref = 5.0 * std::exp(-1.0);
  const double kp = control::kp_of_error(spot, 1.0), kd = control::kd_of_error(spot, 1.0);
  Outcome o;
  o.pass = violations == 0 && std::abs(kp - kp_ref) < 1e-9 && std::abs(kd - kd_ref) < 1e-9;
  o.detail = "10000 draws, " + std::to_string(violations) + " violations; Kp(1) = " + fmt(kp) + ", Kd(1) = " + fmt(kd);
  return o;
}

// ---------------------------------------------------------------------------
// 3. GP posterior against a dense direct solve.

Outcome criterion_gp() {
  Rng rng(3001);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = rng.index(1, 5);
    const auto n = rng.index(1, 10);
    std::vector<gp::Vec> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(rng.vec(d, 0.0, 1.0));
      ys.push_back(rng.uniform(-2.0, 2.0));
    }
    const double se = rng.uniform(0.5, 2.0), ell = rng.uniform(0.1, 1.0), eps = rng.uniform(0.01, 0.3);
    const auto model = gp::fit(xs, ys, gp::KernelParams{se, {ell}, eps}, d);
    for (int q = 0; q < 5; ++q) {
      const gp::Vec xq = rng.vec(d, -0.2, 1.2);
      const auto ref = oracle::gp_posterior(xs, ys, xq, se, ell, eps);
      const auto p = model.posterior(xq);
      worst = std::max({worst, std::abs(p.mean - ref.mean), std::abs(p.variance - std::max(0.0, ref.variance))});
    }
  }
  return {worst < 1e-8, "100 datasets x 5 queries, worst deviation " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 4. Expected improvement against Monte Carlo.

double monte_carlo_ei(double mean, double var, double y_best, std::size_t n, std::mt19937_64& gen) {
  const boost::math::normal_distribution<double> std_normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double u = (static_cast<double>(i) + unif(gen)) / static_cast<double>(n);
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    acc += std::max(0.0, mean + sd * boost::math::quantile(std_normal, u) - y_best);
  }
  return acc / static_cast<double>(n);
}

Outcome criterion_ei() {
  Rng rng(4001);
  std::mt19937_64 gen(4002);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = rng.index(1, 5);
    std::vector<gp::Vec> xs;
    std::vector<double> ys;
    for (std::size_t i = 0, n = rng.index(1, 10); i < n; ++i) {
      xs.push_back(rng.vec(d, 0, 1));
      ys.push_back(rng.normal());
    }
    const auto model = gp::fit(xs, ys, gp::KernelParams{1.0, {0.2}, 0.05}, d);
    const double y_best = *std::max_element(ys.begin(), ys.end());
    const gp::Vec xq = rng.vec(d, 0, 1);
    const auto p = model.posterior(xq);
    const double mc = monte_carlo_ei(p.mean, p.variance, y_best, 1000000, gen);
    worst = std::max(worst, std::abs(bayesopt::expected_improvement(model, xq, y_best) - mc));
  }
  const double at_zero = bayesopt::expected_improvement(0.7, 0.0, 0.2);
  const double below_zero = bayesopt::expected_improvement(-0.7, 0.0, 0.2);
  return {worst < 1e-3 && at_zero == 0.0 && below_zero == 0.0,
          "20 pairs, worst |EI - MC| " + fmt(worst) + "; EI(V=0) = " + fmt(at_zero) + ", " + fmt(below_zero)};
}

// ---------------------------------------------------------------------------
// 5. Physics.

Outcome criterion_physics() {
  Rng rng(5001);
  bool ok = true;
  std::ostringstream detail;

  std::size_t not_spd = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto arm = oracle::random_arm(rng, rng.index(1, 5));
    const Vec q = rng.vec(arm.n_links(), -std::numbers::pi, std::numbers::pi);
    const Mat m = dynamics::mass_matrix(arm, q);
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if ((m - m.transpose()).cwiseAbs().maxCoeff() != 0.0 || !(es.eigenvalues().minCoeff() > 0.0)) ++not_spd;
  }
  ok = ok && not_spd == 0;
  detail << "M not SPD " << not_spd << "/1000";

  double skew = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    const auto arm = oracle::random_arm(rng, rng.index(2, 5));
    const auto n = arm.n_links();
    const Vec q = rng.vec(n, -3, 3), qd = rng.vec(n, -2, 2), x = rng.vec(n, -1, 1);
    const Mat mdot = (dynamics::mass_matrix(arm, q + h * qd) - dynamics::mass_matrix(arm, q - h * qd)) / (2.0 * h);
    skew = std::max(skew, std::abs(x.dot((mdot - 2.0 * dynamics::coriolis_matrix(arm, q, qd)) * x)));
  }
  ok = ok && skew < 1e-5;
  detail << "; skew residual " << fmt(skew);

  double grad = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto arm = oracle::random_arm(rng, rng.index(1, 5));
    const auto n = static_cast<Eigen::Index>(arm.n_links());
    const Vec q = rng.vec(arm.n_links(), -3, 3);
    const Vec g = dynamics::gravity_vector(arm, q);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Vec dq = h * Vec::Unit(n, k);
      const double fd = (oracle::potential_energy(arm, q + dq) - oracle::potential_energy(arm, q - dq)) / (2 * h);
      grad = std::max(grad, std::abs(g[k] - fd));
    }
  }
  ok = ok && grad < 1e-6;
  detail << "; gravity gradient " << fmt(grad);

  // Passive arm: no gravity, friction, torque or base motion. Kinetic energy is
  // conserved; the worst deviation over the run is reported.
  auto arm = oracle::random_arm(rng, 3, 0.0);
  arm.joint_viscous_friction = {0.0, 0.0, 0.0};
  const auto base = dynamics::BaseMotionProfile::at_rest(10.0);
  dynamics::JointState s{rng.vec(3, -2, 2), rng.vec(3, -1, 1), 0.0};
  const double e0 = dynamics::kinetic_energy(arm, s.q, s.qdot);
  double drift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    s = dynamics::step(arm, s, Vec::Zero(3), base, 1e-3);
    drift = std::max(drift, std::abs(dynamics::kinetic_energy(arm, s.q, s.qdot) - e0) / e0);
  }
  ok = ok && drift < 1e-6;
  detail << "; energy drift " << fmt(drift);

  auto solve = [](double dt) {
    double x = 1.0;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < n; ++i) x = apid::rk4_step([](double, double y) { return y; }, i * dt, x, dt);
    return x;
  };
  const double ratio = std::abs(solve(0.02) - std::numbers::e) / std::abs(solve(0.01) - std::numbers::e);
  ok = ok && ratio >= 12.0 && ratio <= 20.0;
  detail << "; RK4 refinement " << fmt(ratio);
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. Collapse equivalence.

Outcome criterion_collapse() {
  const auto s = harness::default_scenario();
  harness::ControllerAssignment pid, collapsed;
  const double kp[] = {400.0, 250.0, 90.0}, ki[] = {60.0, 40.0, 10.0}, kd[] = {30.0, 15.0, 5.0};
  for (int j = 0; j < 3; ++j) {
    pid.emplace_back(control::PidGains{kp[j], ki[j], kd[j]});
    collapsed.emplace_back(control::NonlinearPidParams{kp[j], kp[j], 7.0, kd[j], 0.0, ki[j]});
  }
  const auto a = harness::rollout(s, pid);
  const auto b = harness::rollout(s, collapsed);
  const bool same = a.n_steps == b.n_steps && a.t == b.t && a.theta == b.theta && a.theta_ref == b.theta_ref &&
                    a.u == b.u && a.kp == b.kp && a.kd == b.kd && a.joint_cost == b.joint_cost;
  return {same, std::to_string(a.n_steps) + " steps x " + std::to_string(a.n_joints) + " joints compared exactly"};
}

// ---------------------------------------------------------------------------
// 7. Ziegler-Nichols on 1/(s(s+1)(s+2)).

Outcome criterion_zn() {
  // Routh-Hurwitz: s^3 + 3 s^2 + 2 s + K is marginal at K = 6, omega = sqrt(2).
  const double ku = 6.0, tu = 2.0 * std::numbers::pi / std::sqrt(2.0);
  control::LinearTestPlant plant({0.0, 2.0, 3.0});
  const auto u = control::find_ultimate_gain(plant);
  const double ek = std::abs(u.gain - ku) / ku, et = std::abs(u.period - tu) / tu;
  return {ek <= 0.05 && et <= 0.05, "K_u = " + fmt(u.gain) + " (" + fmt(100 * ek) + "% off), T_u = " +
                                        fmt(u.period) + " s (" + fmt(100 * et) + "% off)"};
}

// ---------------------------------------------------------------------------
// 9. Gain traces in a tuned step response. Writes the rollout that 8 inspects.

Outcome criterion_gain_shape() {
  const fs::path tuned = tune_dir(42) / "best_params.json";
  if (!fs::exists(tuned)) return {false, "no tuned parameters from criterion 1"};
  const fs::path dir = fs::path(APID_ACCEPTANCE_OUT) / "step_response";
  fs::create_directories(dir);

  const auto base = harness::default_scenario();
  const Vec step = Vec::Constant(3, 0.2);
  io::write_json_file(dir / "scenario.json",
                      io::scenario_to_json(harness::step_response_scenario(base.arm, base.initial_state.q, step, 5.0)));
  const int code = run_cli("sim --scenario " + (dir / "scenario.json").string() + " --controllers " + tuned.string() +
                               " --out " + dir.string(),
                           dir / "log.txt");
  if (code != 0) return {false, "sim exited " + std::to_string(code)};

  const auto params = read_json(tuned)["joints"];
  const auto csv = read_csv(dir / "rollout.csv");
  const std::size_t cj = csv.column("joint"), ckp = csv.column("kp"), ckd = csv.column("kd");
  Outcome o{true, ""};
  std::size_t adaptive = 0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    if (params[j]["type"] != "adaptive") continue;
    ++adaptive;
    const std::vector<double>* first = nullptr;
    const std::vector<double>* last = nullptr;
    for (const auto& row : csv.rows) {
      if (static_cast<std::size_t>(row[cj]) != j + 1) continue;
      if (!first) first = &row;
      last = &row;
    }
    if (!first) return {false, "joint " + std::to_string(j + 1) + " missing from rollout"};
    const bool ok = (*first)[ckd] < (*last)[ckd] && (*first)[ckp] > (*last)[ckp];
    o.pass = o.pass && ok;
    o.detail += "joint " + std::to_string(j + 1) + " Kp " + fmt((*first)[ckp]) + " -> " + fmt((*last)[ckp]) + ", Kd " +
                fmt((*first)[ckd]) + " -> " + fmt((*last)[ckd]) + "; ";
  }
  o.pass = o.pass && adaptive > 0;
  return o;
}

// ---------------------------------------------------------------------------
// 8. Torque limit across every emitted rollout CSV.

Outcome criterion_torque_limit() {
  double peak = 0.0;
  std::size_t files = 0, rows = 0;
  for (const auto& e : fs::recursive_directory_iterator(APID_ACCEPTANCE_OUT)) {
    const auto name = e.path().filename().string();
    if (!e.is_regular_file() || name.rfind("rollout", 0) != 0 || e.path().extension() != ".csv") continue;
    const auto csv = read_csv(e.path());
    const std::size_t cu = csv.column("u");
    if (cu >= csv.header.size()) continue;
    ++files;
    for (const auto& row : csv.rows) {
      peak = std::max(peak, std::abs(row[cu]));
      ++rows;
    }
  }
  return {files > 0 && peak <= 150.0,
          std::to_string(files) + " files, " + std::to_string(rows) + " rows, max |u| = " + fmt(peak) + " N*m"};
}

}  // namespace

int main() {
  fs::remove_all(APID_ACCEPTANCE_OUT);
  fs::create_directories(APID_ACCEPTANCE_OUT);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  // 9 runs before 8 so the step-response CSV is on disk when the limit is checked.
  const std::vector<Criterion> criteria{
      {1, "BO improvement over Ziegler-Nichols", criterion_bo},
      {2, "gain laws", criterion_gain_laws},
      {3, "GP posterior vs dense solve", criterion_gp},
      {4, "expected improvement vs Monte Carlo", criterion_ei},
      {5, "dynamics physics", criterion_physics},
      {6, "collapse equivalence", criterion_collapse},
      {7, "Ziegler-Nichols on 1/(s(s+1)(s+2))", criterion_zn},
      {9, "tuned step-response gain shape", criterion_gain_shape},
      {8, "torque limit in emitted rollouts", criterion_torque_limit},
  };
  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    lines.emplace_back(c.id, std::string(o.pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(c.id) + " (" +
                                 c.name + "): " + o.detail);
    std::cerr << lines.back().second << std::endl;
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, text] : lines) std::cout << text << '\n';
  return all ? 0 : 1;
}
