#pragma once

namespace apid::control {

struct PidGains {
  double kp = 0.0;  // N m / rad
  double ki = 0.0;  // N m / (rad s)
  double kd = 0.0;  // N m s / rad

  void validate() const;
};

/// Hyperparameters of the error-scheduled PID. K_p(e) sweeps from kp_min at
/// e = 0 to kp_max for large |e| (sech profile, width 1/tau_p); K_d(e) is a
/// Gaussian bump of height kd_max and width 1/sqrt(tau_d). ki is constant.
struct NonlinearPidParams {
  double kp_min = 0.0;  // N m / rad
  double kp_max = 0.0;  // N m / rad
  double tau_p = 0.0;   // 1 / rad
  double kd_max = 0.0;  // N m s / rad
  double tau_d = 0.0;   // 1 / rad^2
  double ki = 0.0;      // N m / (rad s)

  void validate() const;

  /// Parameters whose gain laws reduce to the constant gains of `g`.
  static NonlinearPidParams collapsed(const PidGains& g);
};

struct ControllerState {
  double integral_accumulator = 0.0;          // rad s
  double previous_filtered_error_rate = 0.0;  // rad / s
  double previous_error = 0.0;                // rad
};

/// Discretization settings shared by both controllers.
struct StepOptions {
  double torque_limit = 150.0;        // anti-windup bound on |ki * integral|
  double derivative_cutoff = 100.0;   // rad/s, first-order low-pass on de/dt
};

struct GainsUsed {
  double kp = 0.0;
  double kd = 0.0;
};

struct StepResult {
  double u = 0.0;  // unsaturated command, N m
  ControllerState state;
  GainsUsed gains;
};

double kp_of_error(const NonlinearPidParams& params, double e);
double kd_of_error(const NonlinearPidParams& params, double e);

/// One sample of the error-scheduled PID law
///   u = K_p(e) e + ki * I + K_d(e) * de/dt (filtered),
/// with e = theta_ref - theta, trapezoidal integral clamped so |ki I| <= torque_limit.
StepResult control_step(const NonlinearPidParams& params, const ControllerState& state,
                        double theta_ref, double theta, double dt, const StepOptions& opts = {});

/// Constant-gain PID on the same discretization as control_step.
StepResult pid_control_step(const PidGains& gains, const ControllerState& state, double theta_ref,
                            double theta, double dt, const StepOptions& opts = {});

}  // namespace apid::control
