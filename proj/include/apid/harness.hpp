#pragma once
// Closed-loop rollouts, the tracking/effort cost, and staged per-joint tuning.

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "apid/bayesopt.hpp"
#include "apid/control.hpp"
#include "apid/dynamics.hpp"
#include "apid/ziegler_nichols.hpp"

namespace apid::harness {

struct Setpoint {
  double time = 0.0;   // s
  double value = 0.0;  // rad
};

/// Piecewise-constant setpoints sorted by time. Before the first entry the
/// joint holds its initial angle.
using ReferenceSchedule = std::vector<Setpoint>;

struct Scenario {
  dynamics::ArmModel arm;
  dynamics::BaseMotionProfile base;
  std::vector<ReferenceSchedule> joint_references;
  double duration = 25.0;  // s
  double dt = 1e-3;        // s
  dynamics::JointState initial_state;
  double divergence_bound = 1e6;

  std::size_t n_steps() const;
  double reference(std::size_t joint, double t) const;
  void validate() const;
};

using JointController = std::variant<control::PidGains, control::NonlinearPidParams>;
using ControllerAssignment = std::vector<JointController>;

ControllerAssignment baseline_assignment(const std::vector<control::PidGains>& gains);

struct CostWeights {
  double p = 1.0;
  double q = 0.5;
  /// 0 scores every step; otherwise that many evenly strided samples.
  std::size_t decimate_to_n = 0;
};

struct RolloutTrace {
  std::size_t n_joints = 0;
  std::size_t n_steps = 0;
  std::vector<double> t;
  // Row-major [step * n_joints + joint].
  std::vector<double> theta;
  std::vector<double> theta_ref;
  std::vector<double> u;  // after saturation
  std::vector<double> kp;
  std::vector<double> kd;
  std::vector<double> joint_cost;  // with the weights passed to rollout()

  std::size_t index(std::size_t step, std::size_t joint) const { return step * n_joints + joint; }
};

/// Simulates the closed loop. Throws SimulationDiverged when |q| or |q'| exceeds
/// the scenario's divergence bound (or turns non-finite).
RolloutTrace rollout(const Scenario& scenario, const ControllerAssignment& assignment,
                     const CostWeights& weights = {});

struct CostBreakdown {
  double tracking = 0.0;  // sum p (theta - theta_ref)^2
  double effort = 0.0;    // sum q u^2
  double total() const { return tracking + effort; }
};

/// Steps scored for a trace of n_steps under the given decimation.
std::vector<std::size_t> scored_steps(std::size_t n_steps, std::size_t decimate_to_n);

CostBreakdown cost_breakdown(const RolloutTrace& trace, std::size_t joint, const CostWeights& weights);
double cost(const RolloutTrace& trace, std::size_t joint, double p = 1.0, double q = 0.5);
double cost(const RolloutTrace& trace, std::size_t joint, const CostWeights& weights);

/// Search box for (kp_min, kp_ratio = kp_max / kp_min, tau_p, kd_max, tau_d)
/// around Ziegler-Nichols gains. Throws std::invalid_argument for kp or kd <= 0.
bayesopt::SearchBox zn_to_searchbox(const control::PidGains& zn);

control::NonlinearPidParams params_from_point(const bayesopt::Vec& point, double ki);

struct StagedTuneOptions {
  std::size_t budget_per_joint = 20;
  std::size_t n_init = 5;
  std::uint64_t seed = 42;
  CostWeights weights;
  double ki_scale = 0.5;
  control::ProbeConfig probe = default_probe();
  bayesopt::ProposalOptions proposal;
  bool learn_length_scale = false;
  bool parallel = true;

  static control::ProbeConfig default_probe();
};

struct JointCampaign {
  std::size_t joint = 0;
  control::ZnResult zn;
  bayesopt::SearchBox box;
  double ki = 0.0;
  double start_cost = 0.0;  // this joint's cost under the assignment the campaign started from
  bayesopt::BoTrace trace;
  control::NonlinearPidParams best;
};

struct StagedResult {
  ControllerAssignment baseline;
  std::vector<double> baseline_costs;  // all joints on Ziegler-Nichols PID
  std::vector<JointCampaign> campaigns;
  ControllerAssignment final_assignment;
  std::vector<double> final_costs;
};

/// Ziegler-Nichols for every joint (probed at the initial configuration), then
/// one BO campaign per joint from base to tip, each freezing its best parameters
/// before the next joint starts. Propagates NoOscillationFound / UnstableProbe.
StagedResult staged_tune(const Scenario& scenario, const StagedTuneOptions& opts = {});

/// Planar 3-link arm in the horizontal plane carrying a 3.5 kg payload, with a
/// 25 s base maneuver (hard accelerations, sharp turns, sudden stops) and
/// concurrent joint setpoint changes.
Scenario default_scenario();

/// Same arm on a static base; every joint steps by `step` rad at t = 0.
Scenario step_response_scenario(const dynamics::ArmModel& arm, const dynamics::Vec& initial_q,
                                const dynamics::Vec& step, double duration = 5.0, double dt = 1e-3);

}  // namespace apid::harness
