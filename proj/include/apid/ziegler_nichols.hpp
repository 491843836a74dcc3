#pragma once
// Closed-loop ultimate-gain (Ziegler-Nichols) tuning.
//
// A proportional-only loop u = K (r - y) is closed around a probe plant and K is
// raised geometrically until a sustained oscillation appears; the neutral gain
// is then bracketed by bisection on the per-cycle amplitude ratio.

#include <cstddef>
#include <memory>
#include <vector>

#include "apid/control.hpp"
#include "apid/dynamics.hpp"

namespace apid::control {

/// Single-input single-output plant driven by a sampled, zero-order-held input.
class ProbePlant {
 public:
  virtual ~ProbePlant() = default;
  virtual void reset() = 0;
  virtual double output() const = 0;
  virtual void advance(double u, double dt) = 0;
};

/// y = u / (s^n + a[n-1] s^(n-1) + ... + a[0]) in controllable canonical form.
/// {0, 2, 3} is 1/(s(s+1)(s+2)); {1} is 1/(s+1).
class LinearTestPlant final : public ProbePlant {
 public:
  explicit LinearTestPlant(std::vector<double> denominator_low_to_high);
  void reset() override;
  double output() const override { return x_[0]; }
  void advance(double u, double dt) override;

 private:
  std::vector<double> a_;
  Eigen::VectorXd x_;
};

/// One joint of the arm with every other joint locked at `configuration` and a
/// static base. The joint sees its locked-chain inertia M_ii, viscous friction,
/// gravity, and the torque limit.
class LockedJointPlant final : public ProbePlant {
 public:
  LockedJointPlant(const dynamics::ArmModel& model, std::size_t joint_index,
                   const dynamics::Vec& configuration);
  void reset() override;
  double output() const override { return angle_; }
  void advance(double u, double dt) override;

  double inertia() const noexcept { return inertia_; }

 private:
  double gravity_torque(double angle) const;

  double inertia_ = 0.0;
  double friction_ = 0.0;
  double torque_limit_ = 0.0;
  double gravity_ = 0.0;
  double initial_angle_ = 0.0;
  Eigen::Vector2d mass_moment_ = Eigen::Vector2d::Zero();  // sum m * (p - pivot) at initial angle
  double angle_ = 0.0;
  double rate_ = 0.0;
};

struct ProbeConfig {
  double dt = 1e-3;
  double horizon = 60.0;           // s simulated per probe gain
  double step_amplitude = 0.01;    // reference offset applied at t = 0
  double initial_gain = 1.0;
  double gain_growth = 1.2;
  double gain_cap = 1e5;
  std::size_t min_half_periods = 6;
  double max_period_spread = 0.10;     // (max - min) / mean of half-periods
  double max_amplitude_decay = 0.05;   // per full cycle
  std::size_t min_samples_per_half_period = 10;
  double transient_fraction = 0.25;    // leading part of the record ignored
  double relative_gain_tolerance = 1e-4;
  std::size_t max_bisections = 60;
  double divergence_bound = 1e6;
};

struct OscillationStats {
  bool diverged = false;
  std::size_t half_periods = 0;
  double mean_period = 0.0;        // s, full period
  double period_spread = 0.0;
  double amplitude_ratio = 0.0;    // per full cycle, > 1 means growing
  double mean_samples_per_half_period = 0.0;

  /// Enough regular half-periods to call this an oscillation at all.
  bool regular(const ProbeConfig& cfg) const;
  /// Regular and decaying by less than max_amplitude_decay per cycle.
  bool sustained(const ProbeConfig& cfg) const;
};

struct UltimateGain {
  double gain = 0.0;    // K_u
  double period = 0.0;  // T_u, s
};

struct ZnResult {
  UltimateGain ultimate;
  PidGains gains;
};

/// Closed-loop P-only response of `plant` at gain K, analyzed for oscillation.
OscillationStats probe_oscillation(ProbePlant& plant, double gain, const ProbeConfig& cfg);

/// Locates K_u / T_u. Throws NoOscillationFound or UnstableProbe.
UltimateGain find_ultimate_gain(ProbePlant& plant, const ProbeConfig& cfg = {});

/// Classic table: kp = 0.6 K_u, ki = 1.2 K_u / T_u, kd = 0.075 K_u T_u.
PidGains ziegler_nichols_gains(const UltimateGain& u);

ZnResult ziegler_nichols_tune(ProbePlant& plant, const ProbeConfig& cfg = {});
ZnResult ziegler_nichols_tune(const dynamics::ArmModel& model, std::size_t joint_index,
                              const dynamics::Vec& probe_configuration, const ProbeConfig& cfg = {});

}  // namespace apid::control
