#include "apid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "apid/errors.hpp"

namespace apid::harness {

using dynamics::Vec;
using dynamics::Vec2;

// ---------------------------------------------------------------------------
// Scenario

std::size_t Scenario::n_steps() const {
  return static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
}

double Scenario::reference(std::size_t joint, double t) const {
  const ReferenceSchedule& s = joint_references.at(joint);
  double value = initial_state.q[static_cast<Eigen::Index>(joint)];
  for (const Setpoint& sp : s) {
    if (sp.time > t) break;
    value = sp.value;
  }
  return value;
}

void Scenario::validate() const {
  arm.validate();
  base.validate();
  const std::size_t n = arm.n_links();
  if (!(duration > 0.0) || !std::isfinite(duration)) throw std::invalid_argument("scenario: duration must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("scenario: dt must be > 0");
  if (joint_references.size() != n) {
    throw DimensionMismatch("scenario joint_references", n, joint_references.size());
  }
  for (std::size_t j = 0; j < n; ++j) {
    double last = 0.0;
    for (const Setpoint& sp : joint_references[j]) {
      if (!(sp.time >= last) || sp.time > duration || !std::isfinite(sp.value)) {
        throw std::invalid_argument("scenario: reference times for joint " + std::to_string(j + 1) +
                                    " must be sorted within [0, duration] with finite values");
      }
      last = sp.time;
    }
  }
  if (static_cast<std::size_t>(initial_state.q.size()) != n) {
    throw DimensionMismatch("scenario initial q", n, static_cast<std::size_t>(initial_state.q.size()));
  }
  if (static_cast<std::size_t>(initial_state.qdot.size()) != n) {
    throw DimensionMismatch("scenario initial qdot", n, static_cast<std::size_t>(initial_state.qdot.size()));
  }
  const double end = static_cast<double>(n_steps()) * dt;
  if (base.horizon() < end - 1e-9 * std::max(1.0, end)) {
    throw std::invalid_argument("scenario: base motion horizon " + std::to_string(base.horizon()) +
                                " s is shorter than the rollout (" + std::to_string(end) + " s)");
  }
}

ControllerAssignment baseline_assignment(const std::vector<control::PidGains>& gains) {
  return ControllerAssignment(gains.begin(), gains.end());
}

// ---------------------------------------------------------------------------
// Rollout

namespace {

bool out_of_bounds(const dynamics::JointState& s, double bound) {
  for (Eigen::Index i = 0; i < s.q.size(); ++i) {
    if (!(std::abs(s.q[i]) <= bound) || !(std::abs(s.qdot[i]) <= bound)) return true;
  }
  return false;
}

}  // namespace

RolloutTrace rollout(const Scenario& scenario, const ControllerAssignment& assignment,
                     const CostWeights& weights) {
  scenario.validate();
  const std::size_t n = scenario.arm.n_links();
  if (assignment.size() != n) throw DimensionMismatch("controller assignment", n, assignment.size());
  for (const JointController& c : assignment) {
    std::visit([](const auto& g) { g.validate(); }, c);
  }

  const std::size_t steps = scenario.n_steps();
  RolloutTrace tr;
  tr.n_joints = n;
  tr.n_steps = steps;
  tr.t.resize(steps);
  tr.theta.resize(steps * n);
  tr.theta_ref.resize(steps * n);
  tr.u.resize(steps * n);
  tr.kp.resize(steps * n);
  tr.kd.resize(steps * n);

  const control::StepOptions opts{scenario.arm.torque_limit, 100.0};
  std::vector<control::ControllerState> ctrl(n);
  dynamics::JointState state = scenario.initial_state;
  state.t = 0.0;
  Vec torques(static_cast<Eigen::Index>(n));

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * scenario.dt;
    tr.t[k] = t;
    for (std::size_t j = 0; j < n; ++j) {
      const double ref = scenario.reference(j, t);
      const double theta = state.q[static_cast<Eigen::Index>(j)];
      const control::StepResult r = std::visit(
          [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, control::PidGains>) {
              return control::pid_control_step(g, ctrl[j], ref, theta, scenario.dt, opts);
            } else {
              return control::control_step(g, ctrl[j], ref, theta, scenario.dt, opts);
            }
          },
          assignment[j]);
      ctrl[j] = r.state;
      const double u = std::clamp(r.u, -scenario.arm.torque_limit, scenario.arm.torque_limit);
      const std::size_t idx = tr.index(k, j);
      tr.theta[idx] = theta;
      tr.theta_ref[idx] = ref;
      tr.u[idx] = u;
      tr.kp[idx] = r.gains.kp;
      tr.kd[idx] = r.gains.kd;
      torques[static_cast<Eigen::Index>(j)] = u;
    }
    state = dynamics::step(scenario.arm, state, torques, scenario.base, scenario.dt);
    state.t = static_cast<double>(k + 1) * scenario.dt;
    if (out_of_bounds(state, scenario.divergence_bound)) throw SimulationDiverged(state.t);
  }

  tr.joint_cost.resize(n);
  for (std::size_t j = 0; j < n; ++j) tr.joint_cost[j] = cost(tr, j, weights);
  return tr;
}

// ---------------------------------------------------------------------------
// Cost

std::vector<std::size_t> scored_steps(std::size_t n_steps, std::size_t decimate_to_n) {
  std::vector<std::size_t> idx;
  if (decimate_to_n == 0 || decimate_to_n >= n_steps) {
    idx.resize(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) idx[k] = k;
    return idx;
  }
  idx.reserve(decimate_to_n);
  for (std::size_t i = 0; i < decimate_to_n; ++i) idx.push_back(i * n_steps / decimate_to_n);
  return idx;
}

CostBreakdown cost_breakdown(const RolloutTrace& trace, std::size_t joint, const CostWeights& weights) {
  if (joint >= trace.n_joints) throw std::out_of_range("cost: joint index out of range");
  CostBreakdown c;
  for (std::size_t k : scored_steps(trace.n_steps, weights.decimate_to_n)) {
    const std::size_t i = trace.index(k, joint);
    const double e = trace.theta[i] - trace.theta_ref[i];
    c.tracking += weights.p * e * e;
    c.effort += weights.q * trace.u[i] * trace.u[i];
  }
  return c;
}

double cost(const RolloutTrace& trace, std::size_t joint, const CostWeights& weights) {
  return cost_breakdown(trace, joint, weights).total();
}

double cost(const RolloutTrace& trace, std::size_t joint, double p, double q) {
  return cost(trace, joint, CostWeights{p, q, 0});
}

// ---------------------------------------------------------------------------
// Parameter space

bayesopt::SearchBox zn_to_searchbox(const control::PidGains& zn) {
  if (!(zn.kp > 0.0) || !(zn.kd > 0.0) || !std::isfinite(zn.kp) || !std::isfinite(zn.kd)) {
    throw std::invalid_argument("zn_to_searchbox: Ziegler-Nichols kp and kd must be > 0");
  }
  bayesopt::SearchBox box;
  box.dims = {
      {"kp_min", 0.2 * zn.kp, 1.0 * zn.kp},
      {"kp_ratio", 1.0, 3.0},
      {"tau_p", 0.5, 20.0},
      {"kd_max", 0.5 * zn.kd, 5.0 * zn.kd},
      {"tau_d", 0.5, 50.0},
  };
  return box;
}

control::NonlinearPidParams params_from_point(const bayesopt::Vec& point, double ki) {
  if (point.size() != 5) throw DimensionMismatch("params_from_point", 5, static_cast<std::size_t>(point.size()));
  control::NonlinearPidParams p;
  p.kp_min = point[0];
  p.kp_max = point[0] * point[1];
  p.tau_p = point[2];
  p.kd_max = point[3];
  p.tau_d = point[4];
  p.ki = ki;
  return p;
}

// ---------------------------------------------------------------------------
// Staged tuning

control::ProbeConfig StagedTuneOptions::default_probe() {
  control::ProbeConfig c;
  c.horizon = 10.0;
  return c;
}

StagedResult staged_tune(const Scenario& scenario, const StagedTuneOptions& opts) {
  scenario.validate();
  if (opts.budget_per_joint < opts.n_init + 1) {
    throw std::invalid_argument("staged_tune: budget_per_joint must exceed n_init");
  }
  const std::size_t n = scenario.arm.n_links();

  control::ProbeConfig probe = opts.probe;
  probe.dt = scenario.dt;

  StagedResult result;
  std::vector<control::ZnResult> zn(n);
  std::vector<control::PidGains> gains(n);
  for (std::size_t j = 0; j < n; ++j) {
    zn[j] = control::ziegler_nichols_tune(scenario.arm, j, scenario.initial_state.q, probe);
    gains[j] = zn[j].gains;
  }
  result.baseline = baseline_assignment(gains);
  const RolloutTrace baseline = rollout(scenario, result.baseline, opts.weights);
  result.baseline_costs = baseline.joint_cost;

  ControllerAssignment current = result.baseline;
  for (std::size_t j = 0; j < n; ++j) {
    JointCampaign c;
    c.joint = j;
    c.zn = zn[j];
    c.box = zn_to_searchbox(gains[j]);
    c.ki = opts.ki_scale * gains[j].ki;
    c.start_cost = rollout(scenario, current, opts.weights).joint_cost[j];

    const bayesopt::Objective objective = [&, j, ki = c.ki](const bayesopt::Vec& x) -> std::optional<double> {
      ControllerAssignment trial = current;
      trial[j] = params_from_point(x, ki);
      try {
        return cost(rollout(scenario, trial, opts.weights), j, opts.weights);
      } catch (const SimulationDiverged&) {
        return std::nullopt;
      }
    };

    bayesopt::OptimizeOptions bo;
    bo.budget = opts.budget_per_joint;
    bo.n_init = opts.n_init;
    bo.seed = opts.seed + 7919ULL * j;
    bo.proposal = opts.proposal;
    bo.proposal.parallel = opts.parallel;
    bo.parallel_init = opts.parallel;
    bo.learn_length_scale = opts.learn_length_scale;
    c.trace = bayesopt::optimize(objective, c.box, bo);
    c.best = params_from_point(c.trace.best().parameters, c.ki);
    current[j] = c.best;
    result.campaigns.push_back(std::move(c));
  }

  result.final_assignment = current;
  result.final_costs = rollout(scenario, current, opts.weights).joint_cost;
  return result;
}

// ---------------------------------------------------------------------------
// Scenarios

Scenario default_scenario() {
  Scenario s;
  // Horizontal-plane arm: gravity acts along the joint axes and produces no joint torque.
  s.arm = dynamics::ArmModel::planar({0.425, 0.392, 0.2}, {8.4, 2.33, 2.0}, 3.5, 0.0, 0.5, 100.0, 150.0);

  using Seg = dynamics::BaseMotionProfile::Segment;
  s.base.segments = {
      Seg{1.0, Vec2(0.0, 0.0), 0.0},     // parked
      Seg{1.5, Vec2(2.5, 0.0), 0.0},     // hard launch to 3.75 m/s
      Seg{2.5, Vec2(0.0, 0.0), 0.0},     // cruise
      Seg{0.5, Vec2(0.0, 0.0), 4.0},     // turn in
      Seg{1.5, Vec2(0.0, 0.0), 0.0},     // sharp turn at 2 rad/s
      Seg{0.5, Vec2(0.0, 0.0), -4.0},    // turn out
      Seg{0.5, Vec2(-7.5, 0.0), 0.0},    // sudden stop
      Seg{2.0, Vec2(0.0, 0.0), 0.0},
      Seg{1.0, Vec2(0.0, 3.0), 0.0},     // sideways launch
      Seg{0.5, Vec2(0.0, 0.0), -6.0},
      Seg{1.0, Vec2(0.0, 0.0), 0.0},     // turning at -3 rad/s
      Seg{0.5, Vec2(0.0, 0.0), 6.0},
      Seg{1.0, Vec2(0.0, -3.0), 0.0},    // stop
      Seg{2.0, Vec2(0.0, 0.0), 0.0},
      Seg{0.5, Vec2(0.0, 0.0), 10.0},    // spin up in place
      Seg{1.0, Vec2(0.0, 0.0), 0.0},
      Seg{0.5, Vec2(0.0, 0.0), -10.0},
      Seg{1.0, Vec2(-4.0, 2.0), 0.0},    // diagonal dash
      Seg{0.5, Vec2(8.0, -4.0), 0.0},    // sudden stop
      Seg{5.5, Vec2(0.0, 0.0), 0.0},
  };

  s.joint_references = {
      {{2.0, 0.8}, {9.0, -0.4}, {16.0, 0.3}, {21.0, 0.0}},
      {{3.0, 0.4}, {10.0, 1.6}, {17.0, 0.9}, {22.0, 1.2}},
      {{4.0, -0.3}, {11.0, 0.8}, {18.0, 0.2}, {23.0, 0.6}},
  };
  s.duration = 25.0;
  s.dt = 1e-3;
  s.initial_state.q = (Vec(3) << 0.0, 1.2, 0.6).finished();
  s.initial_state.qdot = Vec::Zero(3);
  return s;
}

Scenario step_response_scenario(const dynamics::ArmModel& arm, const dynamics::Vec& initial_q,
                                const dynamics::Vec& step, double duration, double dt) {
  Scenario s;
  s.arm = arm;
  s.base = dynamics::BaseMotionProfile::at_rest(duration);
  s.duration = duration;
  s.dt = dt;
  s.initial_state.q = initial_q;
  s.initial_state.qdot = Vec::Zero(initial_q.size());
  s.joint_references.resize(arm.n_links());
  for (std::size_t j = 0; j < arm.n_links(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    s.joint_references[j] = {{0.0, initial_q[i] + step[i]}};
  }
  return s;
}

}  // namespace apid::harness
