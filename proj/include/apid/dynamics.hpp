#pragma once
// Planar n-link serial arm on a moving base.
//
// Joint angles are relative (q_i is the angle of link i w.r.t. link i-1), the
// arm lives in the x-y plane of the base frame and gravity, when non-zero,
// points along -y of that frame. Each link's mass is lumped at its midpoint and
// the payload is a point mass at the end-effector.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace apid::dynamics {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct ArmModel {
  std::vector<double> link_lengths;            // m
  std::vector<double> link_masses;             // kg, lumped at link midpoint
  double payload_mass = 0.0;                   // kg, lumped at end-effector
  std::vector<double> joint_viscous_friction;  // N m s / rad
  std::vector<double> joint_stiffness;         // N m / rad, diagonal of K
  double gravity = 9.81;                       // m/s^2 along -y of the arm plane
  double torque_limit = 150.0;                 // N m, shared by all joints

  std::size_t n_links() const noexcept { return link_lengths.size(); }

  /// Throws std::invalid_argument when a field is inconsistent or out of range.
  void validate() const;

  /// Convenience constructor with uniform friction/stiffness.
  static ArmModel planar(std::vector<double> lengths, std::vector<double> masses, double payload,
                         double gravity = 9.81, double friction = 0.5, double stiffness = 100.0,
                         double torque_limit = 150.0);
};

struct JointState {
  Vec q;
  Vec qdot;
  double t = 0.0;
};

/// Prescribed planar rigid motion of the arm's mount: piecewise-constant linear
/// acceleration (world frame) and yaw acceleration. Base yaw starts at 0.
struct BaseMotionProfile {
  struct Segment {
    double duration = 0.0;               // s
    Vec2 linear_accel = Vec2::Zero();    // m/s^2, world frame
    double yaw_accel = 0.0;              // rad/s^2
  };

  struct Kinematics {
    Vec2 linear_accel_world = Vec2::Zero();
    double yaw = 0.0;
    double yaw_rate = 0.0;
    double yaw_accel = 0.0;
  };

  std::vector<Segment> segments;
  Vec2 initial_velocity = Vec2::Zero();
  double initial_yaw_rate = 0.0;

  static BaseMotionProfile at_rest(double duration);

  double horizon() const noexcept;
  void validate() const;

  /// Base state at time t; throws OutsideHorizon when t is not in [0, horizon].
  Kinematics at(double t) const;
  /// Base linear velocity (world frame) at time t.
  Vec2 linear_velocity(double t) const;
};

struct ComplianceEllipsoid {
  Vec q;
  Vec2 semi_axes;  // m/N, descending
  Mat2 directions; // column k is the unit direction of semi_axes[k]
};

/// Ellipsoid or a singular flag, one per configuration of a sweep.
struct ComplianceSample {
  bool singular = false;
  ComplianceEllipsoid ellipsoid;
};

inline constexpr double kComplianceSingularityTolerance = 1e-9;

// Kinematics

/// Positions of joints 1..n+1 (index 0 is the base pivot, index n the end-effector).
std::vector<Vec2> joint_positions(const ArmModel& model, const Vec& q);
Vec2 end_effector_position(const ArmModel& model, const Vec& q);
/// 2 x n positional Jacobian of the end-effector.
Mat jacobian(const ArmModel& model, const Vec& q);

// Dynamics terms of M(q) q'' + C(q, q') q' + G(q) = tau + tau_dist

Mat mass_matrix(const ArmModel& model, const Vec& q);
/// Christoffel-symbol construction; M' - 2C is skew-symmetric.
Mat coriolis_matrix(const ArmModel& model, const Vec& q, const Vec& qdot);
/// C(q, q') q' without forming the matrix.
Vec coriolis_torques(const ArmModel& model, const Vec& q, const Vec& qdot);
Vec gravity_vector(const ArmModel& model, const Vec& q);
double potential_energy(const ArmModel& model, const Vec& q);
double kinetic_energy(const ArmModel& model, const Vec& q, const Vec& qdot);

/// Joint torques from the inertial pseudo-forces (translational, centrifugal,
/// Coriolis, Euler) that the moving base exerts on every lumped mass.
Vec base_disturbance_torques(const ArmModel& model, const Vec& q, const Vec& qdot,
                             const BaseMotionProfile& base, double t);

/// Joint accelerations for the given (already saturated) actuator torques.
Vec forward_dynamics(const ArmModel& model, const Vec& q, const Vec& qdot, const Vec& torques,
                     const BaseMotionProfile& base, double t);

Vec saturate(const ArmModel& model, const Vec& torques);

/// One RK4 step with torques clamped to +-torque_limit and held over dt.
/// Throws SimulationDiverged if the new state is not finite.
JointState step(const ArmModel& model, const JointState& state, const Vec& applied_torques,
                const BaseMotionProfile& base, double dt);

// Compliance

/// Eigen-structure of (J K J^T)^-1. Throws SingularConfiguration when
/// |det(J K J^T)| < kComplianceSingularityTolerance.
ComplianceEllipsoid compliance_ellipsoid(const ArmModel& model, const Vec& q);

std::vector<ComplianceSample> compliance_sweep_serial(const ArmModel& model,
                                                      const std::vector<Vec>& configurations);
std::vector<ComplianceSample> compliance_sweep_parallel(const ArmModel& model,
                                                        const std::vector<Vec>& configurations);

}  // namespace apid::dynamics
