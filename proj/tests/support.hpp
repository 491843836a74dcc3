#pragma once
// Independent reference implementations used as test oracles. Nothing here
// calls into the library's dynamics or GP code.

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "apid/dynamics.hpp"

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
  }
  Vec vec(std::size_t n, double a, double b) {
    Vec v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = uniform(a, b);
    return v;
  }
};

inline apid::dynamics::ArmModel random_arm(Rng& rng, std::size_t n, double gravity = 9.81) {
  std::vector<double> l, m;
  for (std::size_t i = 0; i < n; ++i) {
    l.push_back(rng.uniform(0.2, 1.0));
    m.push_back(rng.uniform(0.5, 5.0));
  }
  return apid::dynamics::ArmModel::planar(l, m, rng.uniform(0.0, 3.0), gravity);
}

struct PointMass {
  double m;
  Eigen::Vector2d p;
};

// Absolute link angles summed by hand; masses at link midpoints plus payload.
inline std::vector<PointMass> point_masses(const apid::dynamics::ArmModel& arm, const Vec& q) {
  std::vector<PointMass> out;
  double phi = 0.0;
  Eigen::Vector2d base(0.0, 0.0);
  for (std::size_t i = 0; i < arm.link_lengths.size(); ++i) {
    phi += q[static_cast<Eigen::Index>(i)];
    const Eigen::Vector2d dir(std::cos(phi), std::sin(phi));
    out.push_back({arm.link_masses[i], base + 0.5 * arm.link_lengths[i] * dir});
    base += arm.link_lengths[i] * dir;
  }
  out.push_back({arm.payload_mass, base});
  return out;
}

inline Eigen::Vector2d tip(const apid::dynamics::ArmModel& arm, const Vec& q) {
  return point_masses(arm, q).back().p;
}

inline double kinetic_energy(const apid::dynamics::ArmModel& arm, const Vec& q, const Vec& qdot) {
  const double h = 1e-6;
  const auto a = point_masses(arm, q + h * qdot);
  const auto b = point_masses(arm, q - h * qdot);
  double t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) t += 0.5 * a[i].m * ((a[i].p - b[i].p) / (2.0 * h)).squaredNorm();
  return t;
}

inline double potential_energy(const apid::dynamics::ArmModel& arm, const Vec& q) {
  double v = 0.0;
  for (const auto& pm : point_masses(arm, q)) v += pm.m * arm.gravity * pm.p.y();
  return v;
}

// M = sum_i m_i J_i^T J_i with every point Jacobian taken by central differences.
inline Mat mass_matrix(const apid::dynamics::ArmModel& arm, const Vec& q) {
  const auto n = q.size();
  const double h = 1e-6;
  const auto pts = point_masses(arm, q);
  std::vector<Mat> jac(pts.size(), Mat::Zero(2, n));
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec dq = Vec::Zero(n);
    dq[k] = h;
    const auto a = point_masses(arm, q + dq);
    const auto b = point_masses(arm, q - dq);
    for (std::size_t i = 0; i < pts.size(); ++i) jac[i].col(k) = (a[i].p - b[i].p) / (2.0 * h);
  }
  Mat m = Mat::Zero(n, n);
  for (std::size_t i = 0; i < pts.size(); ++i) m += pts[i].m * jac[i].transpose() * jac[i];
  return m;
}

// Lagrange's equations with every derivative taken numerically:
//   M q'' = tau - b q' - (M' q' - 1/2 d/dq (q'^T M q')) - dV/dq.
inline Vec accelerations(const apid::dynamics::ArmModel& arm, const Vec& q, const Vec& qdot, const Vec& tau) {
  const auto n = q.size();
  const double h = 1e-5;
  const Mat m = oracle::mass_matrix(arm, q);
  const Mat mdot = (oracle::mass_matrix(arm, q + h * qdot) - oracle::mass_matrix(arm, q - h * qdot)) / (2.0 * h);
  Vec grad_t(n), grad_v(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec dq = Vec::Zero(n);
    dq[k] = h;
    const double tp = qdot.dot(oracle::mass_matrix(arm, q + dq) * qdot);
    const double tm = qdot.dot(oracle::mass_matrix(arm, q - dq) * qdot);
    grad_t[k] = 0.5 * (tp - tm) / (2.0 * h);
    grad_v[k] = (oracle::potential_energy(arm, q + dq) - oracle::potential_energy(arm, q - dq)) / (2.0 * h);
  }
  Vec friction(n);
  for (Eigen::Index k = 0; k < n; ++k) friction[k] = arm.joint_viscous_friction[static_cast<std::size_t>(k)] * qdot[k];
  const Vec rhs = tau - friction - (mdot * qdot - grad_t) - grad_v;
  return m.ldlt().solve(rhs);
}

// Gaussian elimination with partial pivoting; deliberately naive.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0) throw std::runtime_error("gauss_solve: singular");
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

inline double log_det(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  double ld = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[piv], a[c]);
    ld += std::log(std::abs(a[c][c]));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return ld;
}

struct GpOracle {
  double mean;
  double variance;
};

// Posterior of a zero-mean SE-kernel GP by a direct dense solve.
inline GpOracle gp_posterior(const std::vector<Vec>& xs, const std::vector<double>& ys, const Vec& xq,
                             double sigma_se, double ell, double sigma_eps) {
  auto k = [&](const Vec& a, const Vec& b) {
    double r2 = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) r2 += (a[i] - b[i]) * (a[i] - b[i]);
    return sigma_se * sigma_se * std::exp(-0.5 * r2 / (ell * ell));
  };
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> g(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[i][j] = k(xs[i], xs[j]) + (i == j ? sigma_eps * sigma_eps : 0.0);
  }
  std::vector<double> ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = k(xs[i], xq);
  const auto alpha = gauss_solve(g, ys);
  const auto beta = gauss_solve(g, ks);
  double mean = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += ks[i] * alpha[i];
    quad += ks[i] * beta[i];
  }
  return {mean, k(xq, xq) - quad};
}

}  // namespace oracle
