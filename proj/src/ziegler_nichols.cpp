#include "apid/ziegler_nichols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "apid/errors.hpp"
#include "apid/integrator.hpp"

namespace apid::control {

// ---------------------------------------------------------------------------
// Plants

LinearTestPlant::LinearTestPlant(std::vector<double> denominator_low_to_high)
    : a_(std::move(denominator_low_to_high)) {
  if (a_.empty()) throw std::invalid_argument("LinearTestPlant: denominator order must be >= 1");
  x_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a_.size()));
}

void LinearTestPlant::reset() { x_.setZero(); }

void LinearTestPlant::advance(double u, double dt) {
  const auto n = x_.size();
  auto rhs = [&](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) d[i] = x[i + 1];
    double top = u;
    for (Eigen::Index i = 0; i < n; ++i) top -= a_[static_cast<std::size_t>(i)] * x[i];
    d[n - 1] = top;
    return d;
  };
  x_ = rk4_step(rhs, 0.0, x_, dt);
}

LockedJointPlant::LockedJointPlant(const dynamics::ArmModel& model, std::size_t joint_index,
                                   const dynamics::Vec& configuration) {
  model.validate();
  const std::size_t n = model.n_links();
  if (joint_index >= n) throw std::out_of_range("LockedJointPlant: joint index out of range");
  if (static_cast<std::size_t>(configuration.size()) != n) {
    throw DimensionMismatch("probe configuration", n, static_cast<std::size_t>(configuration.size()));
  }
  const auto i = static_cast<Eigen::Index>(joint_index);
  inertia_ = dynamics::mass_matrix(model, configuration)(i, i);
  if (!(inertia_ > 0.0)) throw std::domain_error("LockedJointPlant: joint carries no distal mass");
  friction_ = model.joint_viscous_friction[joint_index];
  torque_limit_ = model.torque_limit;
  gravity_ = model.gravity;
  initial_angle_ = configuration[i];

  const auto pivots = dynamics::joint_positions(model, configuration);
  const Eigen::Vector2d pivot = pivots[joint_index];
  for (std::size_t k = joint_index; k < n; ++k) {
    const Eigen::Vector2d mid = 0.5 * (pivots[k] + pivots[k + 1]);
    mass_moment_ += model.link_masses[k] * (mid - pivot);
  }
  mass_moment_ += model.payload_mass * (pivots[n] - pivot);
  reset();
}

void LockedJointPlant::reset() {
  angle_ = initial_angle_;
  rate_ = 0.0;
}

double LockedJointPlant::gravity_torque(double angle) const {
  if (gravity_ == 0.0) return 0.0;
  const double d = angle - initial_angle_;
  return gravity_ * (std::cos(d) * mass_moment_.x() - std::sin(d) * mass_moment_.y());
}

void LockedJointPlant::advance(double u, double dt) {
  const double torque = std::clamp(u, -torque_limit_, torque_limit_);
  auto rhs = [&](double, const Eigen::Vector2d& s) -> Eigen::Vector2d {
    return {s[1], (torque - friction_ * s[1] - gravity_torque(s[0])) / inertia_};
  };
  const Eigen::Vector2d next = rk4_step(rhs, 0.0, Eigen::Vector2d(angle_, rate_), dt);
  angle_ = next[0];
  rate_ = next[1];
}

// ---------------------------------------------------------------------------
// Oscillation analysis

bool OscillationStats::regular(const ProbeConfig& cfg) const {
  return !diverged && half_periods >= cfg.min_half_periods &&
         period_spread < cfg.max_period_spread &&
         mean_samples_per_half_period >= static_cast<double>(cfg.min_samples_per_half_period);
}

bool OscillationStats::sustained(const ProbeConfig& cfg) const {
  return regular(cfg) && amplitude_ratio > 1.0 - cfg.max_amplitude_decay;
}

namespace {

OscillationStats analyze(const std::vector<double>& y, const ProbeConfig& cfg) {
  OscillationStats s;
  const std::size_t begin =
      static_cast<std::size_t>(std::floor(cfg.transient_fraction * static_cast<double>(y.size())));
  if (y.size() < begin + 3) return s;

  double center = 0.0;
  for (std::size_t k = begin; k < y.size(); ++k) center += y[k];
  center /= static_cast<double>(y.size() - begin);

  // Zero crossings of y - center (linear interpolation) and the peak |y - center|
  // between consecutive crossings.
  std::vector<double> crossings;
  std::vector<double> peaks;
  double running_peak = 0.0;
  for (std::size_t k = begin; k + 1 < y.size(); ++k) {
    const double d0 = y[k] - center;
    const double d1 = y[k + 1] - center;
    running_peak = std::max(running_peak, std::abs(d0));
    if ((d0 < 0.0) != (d1 < 0.0)) {
      const double frac = d0 / (d0 - d1);
      if (!crossings.empty()) peaks.push_back(running_peak);
      crossings.push_back((static_cast<double>(k) + frac) * cfg.dt);
      running_peak = 0.0;
    }
  }
  if (crossings.size() < 2) return s;

  std::vector<double> half(crossings.size() - 1);
  for (std::size_t k = 0; k + 1 < crossings.size(); ++k) half[k] = crossings[k + 1] - crossings[k];
  s.half_periods = half.size();

  double mean = 0.0;
  for (double h : half) mean += h;
  mean /= static_cast<double>(half.size());
  const auto [lo, hi] = std::minmax_element(half.begin(), half.end());
  s.mean_period = 2.0 * mean;
  s.period_spread = (*hi - *lo) / mean;
  s.mean_samples_per_half_period = mean / cfg.dt;

  const double noise_floor = 1e-9 * std::abs(cfg.step_amplitude);
  if (peaks.size() >= 2 && peaks.front() > noise_floor && peaks.back() > noise_floor) {
    const double half_cycles = static_cast<double>(peaks.size() - 1);
    s.amplitude_ratio = std::pow(peaks.back() / peaks.front(), 2.0 / half_cycles);
  } else {
    // Not measurable: treat as fully decayed.
    s.half_periods = 0;
  }
  return s;
}

}  // namespace

OscillationStats probe_oscillation(ProbePlant& plant, double gain, const ProbeConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) {
    throw std::invalid_argument("probe: dt and horizon must be > 0");
  }
  plant.reset();
  const double reference = plant.output() + cfg.step_amplitude;
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  std::vector<double> y;
  y.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    plant.advance(gain * (reference - plant.output()), cfg.dt);
    const double out = plant.output();
    if (!std::isfinite(out) || std::abs(out) > cfg.divergence_bound) {
      OscillationStats s;
      s.diverged = true;
      s.amplitude_ratio = INFINITY;
      return s;
    }
    y.push_back(out);
  }
  return analyze(y, cfg);
}

UltimateGain find_ultimate_gain(ProbePlant& plant, const ProbeConfig& cfg) {
  if (!(cfg.initial_gain > 0.0) || !(cfg.gain_growth > 1.0) || !(cfg.gain_cap >= cfg.initial_gain)) {
    throw std::invalid_argument("probe: need initial_gain > 0, gain_growth > 1, gain_cap >= initial_gain");
  }

  // Phase 1: geometric sweep until the loop oscillates without decaying.
  double lo = 0.0;
  double gain = cfg.initial_gain;
  bool found = false;
  bool first = true;
  OscillationStats stats;
  for (; gain <= cfg.gain_cap; gain *= cfg.gain_growth) {
    stats = probe_oscillation(plant, gain, cfg);
    if (stats.diverged) {
      if (first) {
        throw UnstableProbe("probe diverged at the initial gain " + std::to_string(gain));
      }
      if (!found) {
        throw NoOscillationFound("loop went unstable at gain " + std::to_string(gain) +
                                     " without a sustained oscillation",
                                 gain);
      }
    }
    first = false;
    if (stats.diverged || (stats.sustained(cfg) && stats.amplitude_ratio >= 1.0)) break;
    if (stats.sustained(cfg)) found = true;
    lo = gain;
  }
  if (gain > cfg.gain_cap) {
    throw NoOscillationFound("no sustained oscillation up to gain cap " + std::to_string(cfg.gain_cap),
                             cfg.gain_cap);
  }

  // Phase 2: bisect on "amplitude grows" between the last non-growing gain and `gain`.
  double hi = gain;
  auto grows = [&](double k) {
    const OscillationStats s = probe_oscillation(plant, k, cfg);
    return s.diverged || (s.regular(cfg) && s.amplitude_ratio >= 1.0);
  };
  for (std::size_t it = 0; it < cfg.max_bisections && (hi - lo) > cfg.relative_gain_tolerance * hi;
       ++it) {
    const double mid = 0.5 * (lo + hi);
    (grows(mid) ? hi : lo) = mid;
  }

  UltimateGain u;
  u.gain = 0.5 * (lo + hi);
  OscillationStats at_u = probe_oscillation(plant, u.gain, cfg);
  if (!at_u.regular(cfg)) at_u = probe_oscillation(plant, hi, cfg);
  if (!at_u.regular(cfg)) {
    throw NoOscillationFound("oscillation lost while refining the ultimate gain", u.gain);
  }
  u.period = at_u.mean_period;
  return u;
}

PidGains ziegler_nichols_gains(const UltimateGain& u) {
  return PidGains{0.6 * u.gain, 1.2 * u.gain / u.period, 0.075 * u.gain * u.period};
}

ZnResult ziegler_nichols_tune(ProbePlant& plant, const ProbeConfig& cfg) {
  ZnResult r;
  r.ultimate = find_ultimate_gain(plant, cfg);
  r.gains = ziegler_nichols_gains(r.ultimate);
  return r;
}

ZnResult ziegler_nichols_tune(const dynamics::ArmModel& model, std::size_t joint_index,
                              const dynamics::Vec& probe_configuration, const ProbeConfig& cfg) {
  LockedJointPlant plant(model, joint_index, probe_configuration);
  return ziegler_nichols_tune(plant, cfg);
}

}  // namespace apid::control
