#pragma once
// Zero-mean Gaussian-process regression with a squared-exponential kernel.
//
//   mean(x*) = k(X, x*)^T S Y,   var(x*) = k(x*, x*) - k(X, x*)^T S k(X, x*),
//   S = (k(X, X) + sigma_eps^2 I)^-1
//
// Any input normalization or target standardization is the caller's business
// (see bayesopt); this module implements the plain posterior.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace apid::gp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct KernelParams {
  double sigma_se = 1.0;
  /// One entry (isotropic) or one per input dimension.
  std::vector<double> length_scale{0.2};
  double sigma_eps = 0.05;

  void validate() const;
  /// Length scale for dimension i (broadcasts a scalar).
  double length(std::size_t i) const { return length_scale.size() == 1 ? length_scale[0] : length_scale[i]; }
};

double se_kernel(const KernelParams& kernel, std::span<const double> x, std::span<const double> xp);

/// Posterior variances at or below this fraction of sigma_se^2 are reported as 0.
inline constexpr double kVarianceFloor = 1e-12;

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

class GpModel {
 public:
  /// Empty model of the given input dimension (posterior = prior).
  GpModel(std::size_t dim, KernelParams kernel);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ys_.size(); }
  const KernelParams& kernel() const noexcept { return kernel_; }
  const std::vector<Vec>& inputs() const noexcept { return xs_; }
  const std::vector<double>& targets() const noexcept { return ys_; }
  /// Diagonal jitter the factorization needed (0 when none).
  double jitter() const noexcept { return jitter_; }

  Posterior posterior(std::span<const double> x) const;
  Posterior posterior(const Vec& x) const { return posterior(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); }

  /// log p(Y | X) under the current kernel.
  double log_marginal_likelihood() const;

  friend GpModel fit(const std::vector<Vec>& xs, const std::vector<double>& ys, const KernelParams& kernel,
                     std::size_t dim);

 private:
  void factorize();

  std::size_t dim_;
  KernelParams kernel_;
  std::vector<Vec> xs_;
  std::vector<double> ys_;
  Mat chol_lower_;    // L with L L^T = k(X, X) + (sigma_eps^2 + jitter) I
  Vec alpha_;         // S Y
  double jitter_ = 0.0;
};

/// Builds a model with a fresh factorization. Throws NotPositiveDefinite for
/// repeated inputs with sigma_eps = 0 or when the jitter schedule is exhausted.
GpModel fit(const std::vector<Vec>& xs, const std::vector<double>& ys, const KernelParams& kernel,
            std::size_t dim);
inline GpModel fit(const std::vector<Vec>& xs, const std::vector<double>& ys, const KernelParams& kernel) {
  if (xs.empty()) throw std::invalid_argument("gp::fit: cannot infer dimension from an empty dataset");
  return fit(xs, ys, kernel, static_cast<std::size_t>(xs.front().size()));
}

/// New model with (x, y) appended; the original is left untouched.
GpModel add_sample(const GpModel& model, const Vec& x, double y);

}  // namespace apid::gp
