#include "apid/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apid::control {
namespace {

bool finite_non_negative(double x) { return std::isfinite(x) && x >= 0.0; }

// Shared discretization; both controllers go through here so that collapsed
// nonlinear parameters reproduce the constant-gain PID bit for bit.
StepResult advance(double kp, double ki, double kd, const ControllerState& state, double e, double dt,
                   const StepOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("control step: dt must be > 0");

  ControllerState next;
  next.previous_error = e;

  double integral = state.integral_accumulator + 0.5 * dt * (e + state.previous_error);
  if (ki > 0.0) {
    const double bound = opts.torque_limit / ki;
    integral = std::clamp(integral, -bound, bound);
  }
  next.integral_accumulator = integral;

  const double raw_rate = (e - state.previous_error) / dt;
  const double alpha = 1.0 - std::exp(-opts.derivative_cutoff * dt);
  const double rate =
      state.previous_filtered_error_rate + alpha * (raw_rate - state.previous_filtered_error_rate);
  next.previous_filtered_error_rate = rate;

  StepResult r;
  r.u = kp * e + ki * integral + kd * rate;
  r.state = next;
  r.gains = GainsUsed{kp, kd};
  return r;
}

}  // namespace

void PidGains::validate() const {
  if (!finite_non_negative(kp) || !finite_non_negative(ki) || !finite_non_negative(kd)) {
    throw std::invalid_argument("PID gains must be finite and >= 0");
  }
}

void NonlinearPidParams::validate() const {
  if (!(std::isfinite(kp_min) && kp_min > 0.0)) {
    throw std::invalid_argument("nonlinear PID: kp_min must be > 0");
  }
  if (!(std::isfinite(kp_max) && kp_max >= kp_min)) {
    throw std::invalid_argument("nonlinear PID: kp_max must be >= kp_min");
  }
  if (!finite_non_negative(tau_p) || !finite_non_negative(kd_max) || !finite_non_negative(tau_d) ||
      !finite_non_negative(ki)) {
    throw std::invalid_argument("nonlinear PID: tau_p, kd_max, tau_d, ki must be finite and >= 0");
  }
}

NonlinearPidParams NonlinearPidParams::collapsed(const PidGains& g) {
  return NonlinearPidParams{g.kp, g.kp, 0.0, g.kd, 0.0, g.ki};
}

double kp_of_error(const NonlinearPidParams& params, double e) {
  const double x = params.tau_p * e;
  return params.kp_max - 2.0 * (params.kp_max - params.kp_min) / (std::exp(-x) + std::exp(x));
}

double kd_of_error(const NonlinearPidParams& params, double e) {
  return params.kd_max * std::exp(-params.tau_d * e * e);
}

StepResult control_step(const NonlinearPidParams& params, const ControllerState& state,
                        double theta_ref, double theta, double dt, const StepOptions& opts) {
  const double e = theta_ref - theta;
  return advance(kp_of_error(params, e), params.ki, kd_of_error(params, e), state, e, dt, opts);
}

StepResult pid_control_step(const PidGains& gains, const ControllerState& state, double theta_ref,
                            double theta, double dt, const StepOptions& opts) {
  const double e = theta_ref - theta;
  return advance(gains.kp, gains.ki, gains.kd, state, e, dt, opts);
}

}  // namespace apid::control
