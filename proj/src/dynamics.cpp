#include "apid/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "apid/errors.hpp"
#include "apid/integrator.hpp"

namespace apid::dynamics {
namespace {

// 2-D cross product u x v (z component).
inline double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

// Rotation by +90 degrees: z-hat x u.
inline Vec2 perp(const Vec2& u) { return Vec2(-u.y(), u.x()); }

// A lumped mass and the vectors from each proximal joint pivot to it.
struct LumpedPoint {
  double mass = 0.0;
  std::size_t link = 0;    // index of the link carrying the point
  Vec2 position;           // base frame
  std::vector<Vec2> lever; // lever[j] = position - pivot_j, valid for j <= link
};

void check_dim(const char* what, std::size_t expected, Eigen::Index got) {
  if (static_cast<std::size_t>(got) != expected) {
    throw DimensionMismatch(what, expected, static_cast<std::size_t>(got));
  }
}

std::vector<LumpedPoint> lumped_points(const ArmModel& model, const Vec& q) {
  const std::size_t n = model.n_links();
  check_dim("joint angles", n, q.size());
  const std::vector<Vec2> pivots = joint_positions(model, q);

  std::vector<LumpedPoint> points;
  points.reserve(n + 1);
  double heading = 0.0;
  auto add = [&](double mass, std::size_t link, const Vec2& pos) {
    if (mass <= 0.0) return;
    LumpedPoint p;
    p.mass = mass;
    p.link = link;
    p.position = pos;
    p.lever.resize(link + 1);
    for (std::size_t j = 0; j <= link; ++j) p.lever[j] = pos - pivots[j];
    points.push_back(std::move(p));
  };
  for (std::size_t i = 0; i < n; ++i) {
    heading += q[static_cast<Eigen::Index>(i)];
    const Vec2 dir(std::cos(heading), std::sin(heading));
    add(model.link_masses[i], i, pivots[i] + 0.5 * model.link_lengths[i] * dir);
  }
  if (n > 0) add(model.payload_mass, n - 1, pivots[n]);
  return points;
}

// Positional Jacobian column j of a lumped point, i.e. z-hat x lever_j.
inline Vec2 point_jacobian_column(const LumpedPoint& p, std::size_t j) {
  return j <= p.link ? perp(p.lever[j]) : Vec2::Zero();
}

// dM/dq_a for all a, using d(lever_j)/dq_a = perp(lever_max(a, j)).
std::vector<Mat> mass_matrix_derivatives(std::size_t n, const std::vector<LumpedPoint>& points) {
  std::vector<Mat> dm(n, Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  for (const LumpedPoint& p : points) {
    for (std::size_t a = 0; a <= p.link; ++a) {
      for (std::size_t j = 0; j <= p.link; ++j) {
        for (std::size_t k = j; k <= p.link; ++k) {
          const double v = p.mass * (cross(p.lever[std::max(a, j)], p.lever[k]) +
                                     cross(p.lever[std::max(a, k)], p.lever[j]));
          const auto jj = static_cast<Eigen::Index>(j);
          const auto kk = static_cast<Eigen::Index>(k);
          dm[a](jj, kk) += v;
          if (k != j) dm[a](kk, jj) += v;
        }
      }
    }
  }
  return dm;
}

Mat mass_matrix_from_points(std::size_t n, const std::vector<LumpedPoint>& points) {
  const auto nn = static_cast<Eigen::Index>(n);
  Mat m = Mat::Zero(nn, nn);
  for (const LumpedPoint& p : points) {
    for (std::size_t j = 0; j <= p.link; ++j) {
      for (std::size_t k = j; k <= p.link; ++k) {
        const double v = p.mass * p.lever[j].dot(p.lever[k]);
        m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += v;
        if (k != j) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += v;
      }
    }
  }
  return m;
}

Mat coriolis_from_derivatives(const std::vector<Mat>& dm, const Vec& qdot) {
  const auto n = qdot.size();
  Mat c = Mat::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index a = 0; a < n; ++a) {
        s += 0.5 * (dm[a](k, j) + dm[j](k, a) - dm[k](j, a)) * qdot[a];
      }
      c(k, j) = s;
    }
  }
  return c;
}

Vec gravity_from_points(std::size_t n, const std::vector<LumpedPoint>& points, double g) {
  Vec grav = Vec::Zero(static_cast<Eigen::Index>(n));
  if (g == 0.0) return grav;
  for (const LumpedPoint& p : points) {
    for (std::size_t j = 0; j <= p.link; ++j) {
      grav[static_cast<Eigen::Index>(j)] += p.mass * g * p.lever[j].x();
    }
  }
  return grav;
}

Vec base_torques_from_points(std::size_t n, const std::vector<LumpedPoint>& points,
                             const Vec& qdot, const BaseMotionProfile::Kinematics& kin) {
  Vec tau = Vec::Zero(static_cast<Eigen::Index>(n));
  const double c = std::cos(kin.yaw);
  const double s = std::sin(kin.yaw);
  // World-frame acceleration expressed in the rotating base frame.
  const Vec2 accel_base(c * kin.linear_accel_world.x() + s * kin.linear_accel_world.y(),
                        -s * kin.linear_accel_world.x() + c * kin.linear_accel_world.y());
  const double w = kin.yaw_rate;
  const double wdot = kin.yaw_accel;
  if (accel_base.isZero(0.0) && w == 0.0 && wdot == 0.0) return tau;

  for (const LumpedPoint& p : points) {
    Vec2 v_rel = Vec2::Zero();
    for (std::size_t j = 0; j <= p.link; ++j) {
      v_rel += point_jacobian_column(p, j) * qdot[static_cast<Eigen::Index>(j)];
    }
    const Vec2 force = p.mass * (-accel_base                 // translational
                                 + w * w * p.position        // centrifugal
                                 - 2.0 * w * perp(v_rel)     // Coriolis
                                 - wdot * perp(p.position)); // Euler
    for (std::size_t j = 0; j <= p.link; ++j) {
      tau[static_cast<Eigen::Index>(j)] += point_jacobian_column(p, j).dot(force);
    }
  }
  return tau;
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// ArmModel

void ArmModel::validate() const {
  const std::size_t n = n_links();
  if (n == 0) throw std::invalid_argument("arm: n_links must be >= 1");
  auto same_size = [n](const std::vector<double>& v, const char* name) {
    if (v.size() != n) {
      throw std::invalid_argument(std::string("arm: ") + name + " has " + std::to_string(v.size()) +
                                  " entries, expected " + std::to_string(n));
    }
  };
  same_size(link_masses, "link_masses");
  same_size(joint_viscous_friction, "joint_viscous_friction");
  same_size(joint_stiffness, "joint_stiffness");
  auto non_negative = [](const std::vector<double>& v, const char* name) {
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument(std::string("arm: ") + name + " entries must be finite and >= 0");
      }
    }
  };
  non_negative(link_lengths, "link_lengths");
  non_negative(link_masses, "link_masses");
  non_negative(joint_viscous_friction, "joint_viscous_friction");
  non_negative(joint_stiffness, "joint_stiffness");
  if (!(payload_mass >= 0.0) || !std::isfinite(payload_mass)) {
    throw std::invalid_argument("arm: payload_mass must be finite and >= 0");
  }
  if (!(gravity >= 0.0) || !std::isfinite(gravity)) {
    throw std::invalid_argument("arm: gravity must be finite and >= 0");
  }
  if (!(torque_limit > 0.0) || !std::isfinite(torque_limit)) {
    throw std::invalid_argument("arm: torque_limit must be finite and > 0");
  }
}

ArmModel ArmModel::planar(std::vector<double> lengths, std::vector<double> masses, double payload,
                          double gravity, double friction, double stiffness, double torque_limit) {
  ArmModel m;
  const std::size_t n = lengths.size();
  m.link_lengths = std::move(lengths);
  m.link_masses = std::move(masses);
  m.payload_mass = payload;
  m.joint_viscous_friction.assign(n, friction);
  m.joint_stiffness.assign(n, stiffness);
  m.gravity = gravity;
  m.torque_limit = torque_limit;
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// BaseMotionProfile

BaseMotionProfile BaseMotionProfile::at_rest(double duration) {
  BaseMotionProfile b;
  b.segments.push_back(Segment{duration, Vec2::Zero(), 0.0});
  return b;
}

double BaseMotionProfile::horizon() const noexcept {
  double h = 0.0;
  for (const Segment& s : segments) h += s.duration;
  return h;
}

void BaseMotionProfile::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
      throw std::invalid_argument("base: segment " + std::to_string(i) + " duration must be > 0");
    }
    if (!s.linear_accel.allFinite() || !std::isfinite(s.yaw_accel)) {
      throw std::invalid_argument("base: segment " + std::to_string(i) + " has non-finite values");
    }
  }
  if (!initial_velocity.allFinite() || !std::isfinite(initial_yaw_rate)) {
    throw std::invalid_argument("base: initial velocity / yaw rate must be finite");
  }
}

BaseMotionProfile::Kinematics BaseMotionProfile::at(double t) const {
  const double h = horizon();
  const double slack = 1e-9 * std::max(1.0, h);
  if (!(t >= -slack) || t > h + slack) {
    throw OutsideHorizon("base motion queried at t = " + std::to_string(t) +
                         " s outside horizon [0, " + std::to_string(h) + "]");
  }
  Kinematics k;
  k.yaw_rate = initial_yaw_rate;
  double start = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    const bool last = i + 1 == segments.size();
    if (t < start + s.duration || last) {
      const double tau = std::clamp(t - start, 0.0, s.duration);
      k.linear_accel_world = s.linear_accel;
      k.yaw_accel = s.yaw_accel;
      k.yaw += k.yaw_rate * tau + 0.5 * s.yaw_accel * tau * tau;
      k.yaw_rate += s.yaw_accel * tau;
      return k;
    }
    k.yaw += k.yaw_rate * s.duration + 0.5 * s.yaw_accel * s.duration * s.duration;
    k.yaw_rate += s.yaw_accel * s.duration;
    start += s.duration;
  }
  return k;  // no segments: base at rest at t = 0
}

Vec2 BaseMotionProfile::linear_velocity(double t) const {
  (void)at(t);  // horizon check
  Vec2 v = initial_velocity;
  double start = 0.0;
  for (const Segment& s : segments) {
    const double tau = std::clamp(t - start, 0.0, s.duration);
    v += s.linear_accel * tau;
    start += s.duration;
    if (t <= start) break;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Kinematics

std::vector<Vec2> joint_positions(const ArmModel& model, const Vec& q) {
  const std::size_t n = model.n_links();
  check_dim("joint angles", n, q.size());
  std::vector<Vec2> p(n + 1, Vec2::Zero());
  double heading = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    heading += q[static_cast<Eigen::Index>(i)];
    p[i + 1] = p[i] + model.link_lengths[i] * Vec2(std::cos(heading), std::sin(heading));
  }
  return p;
}

Vec2 end_effector_position(const ArmModel& model, const Vec& q) {
  return joint_positions(model, q).back();
}

Mat jacobian(const ArmModel& model, const Vec& q) {
  const std::size_t n = model.n_links();
  const std::vector<Vec2> p = joint_positions(model, q);
  Mat j(2, static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) j.col(static_cast<Eigen::Index>(k)) = perp(p[n] - p[k]);
  return j;
}

// ---------------------------------------------------------------------------
// Dynamics terms

Mat mass_matrix(const ArmModel& model, const Vec& q) {
  return mass_matrix_from_points(model.n_links(), lumped_points(model, q));
}

Mat coriolis_matrix(const ArmModel& model, const Vec& q, const Vec& qdot) {
  const std::size_t n = model.n_links();
  check_dim("joint velocities", n, qdot.size());
  const auto points = lumped_points(model, q);
  return coriolis_from_derivatives(mass_matrix_derivatives(n, points), qdot);
}

Vec coriolis_torques(const ArmModel& model, const Vec& q, const Vec& qdot) {
  return coriolis_matrix(model, q, qdot) * qdot;
}

Vec gravity_vector(const ArmModel& model, const Vec& q) {
  return gravity_from_points(model.n_links(), lumped_points(model, q), model.gravity);
}

double potential_energy(const ArmModel& model, const Vec& q) {
  double v = 0.0;
  for (const LumpedPoint& p : lumped_points(model, q)) v += p.mass * model.gravity * p.position.y();
  return v;
}

double kinetic_energy(const ArmModel& model, const Vec& q, const Vec& qdot) {
  check_dim("joint velocities", model.n_links(), qdot.size());
  return 0.5 * qdot.dot(mass_matrix(model, q) * qdot);
}

Vec base_disturbance_torques(const ArmModel& model, const Vec& q, const Vec& qdot,
                             const BaseMotionProfile& base, double t) {
  check_dim("joint velocities", model.n_links(), qdot.size());
  return base_torques_from_points(model.n_links(), lumped_points(model, q), qdot, base.at(t));
}

Vec saturate(const ArmModel& model, const Vec& torques) {
  return torques.cwiseMax(-model.torque_limit).cwiseMin(model.torque_limit);
}

Vec forward_dynamics(const ArmModel& model, const Vec& q, const Vec& qdot, const Vec& torques,
                     const BaseMotionProfile& base, double t) {
  const std::size_t n = model.n_links();
  check_dim("joint velocities", n, qdot.size());
  check_dim("joint torques", n, torques.size());
  const auto points = lumped_points(model, q);
  const Mat m = mass_matrix_from_points(n, points);
  const Mat c = coriolis_from_derivatives(mass_matrix_derivatives(n, points), qdot);
  const Vec friction = Eigen::Map<const Vec>(model.joint_viscous_friction.data(),
                                             static_cast<Eigen::Index>(n));
  const Vec rhs = torques + base_torques_from_points(n, points, qdot, base.at(t)) - c * qdot -
                  gravity_from_points(n, points, model.gravity) - friction.cwiseProduct(qdot);
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("mass matrix is not positive definite; every joint needs distal mass");
  }
  return llt.solve(rhs);
}

JointState step(const ArmModel& model, const JointState& state, const Vec& applied_torques,
                const BaseMotionProfile& base, double dt) {
  const std::size_t n = model.n_links();
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  check_dim("joint angles", n, state.q.size());
  check_dim("joint velocities", n, state.qdot.size());
  check_dim("joint torques", n, applied_torques.size());

  const Vec torques = saturate(model, applied_torques);
  const auto nn = static_cast<Eigen::Index>(n);
  Vec x(2 * nn);
  x << state.q, state.qdot;
  auto rhs = [&](double t, const Vec& s) -> Vec {
    Vec d(2 * nn);
    d.head(nn) = s.tail(nn);
    d.tail(nn) = forward_dynamics(model, s.head(nn), s.tail(nn), torques, base, t);
    return d;
  };
  const Vec next = rk4_step(rhs, state.t, x, dt);
  JointState out{next.head(nn), next.tail(nn), state.t + dt};
  if (!all_finite(next)) throw SimulationDiverged(out.t);
  return out;
}

// ---------------------------------------------------------------------------
// Compliance

ComplianceEllipsoid compliance_ellipsoid(const ArmModel& model, const Vec& q) {
  const Mat j = jacobian(model, q);
  const Vec k = Eigen::Map<const Vec>(model.joint_stiffness.data(),
                                      static_cast<Eigen::Index>(model.n_links()));
  const Mat2 jkjt = j * k.asDiagonal() * j.transpose();
  if (std::abs(jkjt.determinant()) < kComplianceSingularityTolerance) {
    throw SingularConfiguration("J K J^T is singular (|det| < 1e-9) at this configuration");
  }
  const Mat2 compliance = jkjt.inverse();
  Eigen::SelfAdjointEigenSolver<Mat2> eig(compliance);

  ComplianceEllipsoid e;
  e.q = q;
  // Eigen sorts ascending; report the most compliant direction first.
  for (int k2 = 0; k2 < 2; ++k2) {
    e.semi_axes[k2] = eig.eigenvalues()[1 - k2];
    Vec2 dir = eig.eigenvectors().col(1 - k2).normalized();
    const int lead = std::abs(dir.x()) > 1e-12 ? 0 : 1;
    if (dir[lead] < 0.0) dir = -dir;
    e.directions.col(k2) = dir;
  }
  return e;
}

namespace {
ComplianceSample compliance_sample(const ArmModel& model, const Vec& q) {
  ComplianceSample s;
  try {
    s.ellipsoid = compliance_ellipsoid(model, q);
  } catch (const SingularConfiguration&) {
    s.singular = true;
    s.ellipsoid.q = q;
    s.ellipsoid.semi_axes.setZero();
    s.ellipsoid.directions.setZero();
  }
  return s;
}

void check_configurations(const ArmModel& model, const std::vector<Vec>& configurations) {
  for (const Vec& q : configurations) check_dim("joint angles", model.n_links(), q.size());
}
}  // namespace

std::vector<ComplianceSample> compliance_sweep_serial(const ArmModel& model,
                                                      const std::vector<Vec>& configurations) {
  check_configurations(model, configurations);
  std::vector<ComplianceSample> out;
  out.reserve(configurations.size());
  for (const Vec& q : configurations) out.push_back(compliance_sample(model, q));
  return out;
}

std::vector<ComplianceSample> compliance_sweep_parallel(const ArmModel& model,
                                                        const std::vector<Vec>& configurations) {
  check_configurations(model, configurations);
  std::vector<ComplianceSample> out(configurations.size());
  const auto count = static_cast<std::ptrdiff_t>(configurations.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = compliance_sample(model, configurations[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace apid::dynamics
