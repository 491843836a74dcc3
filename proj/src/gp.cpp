#include "apid/gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "apid/errors.hpp"

namespace apid::gp {

void KernelParams::validate() const {
  if (!(sigma_se > 0.0) || !std::isfinite(sigma_se)) throw std::invalid_argument("kernel: sigma_se must be > 0");
  if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps)) throw std::invalid_argument("kernel: sigma_eps must be >= 0");
  if (length_scale.empty()) throw std::invalid_argument("kernel: length_scale is empty");
  for (double l : length_scale) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("kernel: length scales must be > 0");
  }
}

double se_kernel(const KernelParams& kernel, std::span<const double> x, std::span<const double> xp) {
  if (x.size() != xp.size()) throw DimensionMismatch("se_kernel", x.size(), xp.size());
  if (kernel.length_scale.size() != 1 && kernel.length_scale.size() != x.size()) {
    throw DimensionMismatch("se_kernel length_scale", x.size(), kernel.length_scale.size());
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = (x[i] - xp[i]) / kernel.length(i);
    r2 += d * d;
  }
  return kernel.sigma_se * kernel.sigma_se * std::exp(-0.5 * r2);
}

namespace {
std::span<const double> as_span(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
}  // namespace

GpModel::GpModel(std::size_t dim, KernelParams kernel) : dim_(dim), kernel_(std::move(kernel)) {
  kernel_.validate();
  if (dim_ == 0) throw std::invalid_argument("GpModel: input dimension must be >= 1");
  if (kernel_.length_scale.size() != 1 && kernel_.length_scale.size() != dim_) {
    throw DimensionMismatch("GpModel length_scale", dim_, kernel_.length_scale.size());
  }
}

void GpModel::factorize() {
  const std::size_t n = ys_.size();
  const auto nn = static_cast<Eigen::Index>(n);
  jitter_ = 0.0;
  if (n == 0) {
    chol_lower_.resize(0, 0);
    alpha_.resize(0);
    return;
  }
  if (kernel_.sigma_eps == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (xs_[i] == xs_[j]) {
          throw NotPositiveDefinite("repeated input at rows " + std::to_string(i) + " and " +
                                    std::to_string(j) + " with sigma_eps = 0");
        }
      }
    }
  }

  Mat gram(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) = se_kernel(kernel_, as_span(xs_[static_cast<std::size_t>(i)]),
                                          as_span(xs_[static_cast<std::size_t>(j)]));
    }
  }
  gram.diagonal().array() += kernel_.sigma_eps * kernel_.sigma_eps;

  const double base_jitter = 1e-10 * kernel_.sigma_se * kernel_.sigma_se;
  Eigen::LLT<Mat> llt(gram);
  for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
    if (attempt > 10) {
      throw NotPositiveDefinite("gram matrix not positive definite after jitter " + std::to_string(jitter_));
    }
    const double next = base_jitter * std::ldexp(1.0, attempt);
    gram.diagonal().array() += next - jitter_;
    jitter_ = next;
    llt.compute(gram);
  }
  chol_lower_ = llt.matrixL();
  const Vec y = Eigen::Map<const Vec>(ys_.data(), nn);
  alpha_ = llt.solve(y);
}

Posterior GpModel::posterior(std::span<const double> x) const {
  if (x.size() != dim_) throw DimensionMismatch("GpModel::posterior", dim_, x.size());
  const double prior = kernel_.sigma_se * kernel_.sigma_se;
  if (ys_.empty()) return {0.0, prior};

  const auto nn = static_cast<Eigen::Index>(ys_.size());
  Vec k(nn);
  for (Eigen::Index i = 0; i < nn; ++i) k[i] = se_kernel(kernel_, as_span(xs_[static_cast<std::size_t>(i)]), x);
  Posterior p;
  p.mean = k.dot(alpha_);
  const Vec v = chol_lower_.triangularView<Eigen::Lower>().solve(k);
  // At training inputs the difference is pure rounding (either sign); treat
  // anything at that level as an exact zero.
  const double var = prior - v.squaredNorm();
  p.variance = var > kVarianceFloor * prior ? var : 0.0;
  return p;
}

double GpModel::log_marginal_likelihood() const {
  const auto n = static_cast<double>(ys_.size());
  if (ys_.empty()) return 0.0;
  const Vec y = Eigen::Map<const Vec>(ys_.data(), static_cast<Eigen::Index>(ys_.size()));
  return -0.5 * y.dot(alpha_) - chol_lower_.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpModel fit(const std::vector<Vec>& xs, const std::vector<double>& ys, const KernelParams& kernel,
            std::size_t dim) {
  if (xs.size() != ys.size()) throw DimensionMismatch("gp::fit targets", xs.size(), ys.size());
  GpModel m(dim, kernel);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (static_cast<std::size_t>(xs[i].size()) != dim) {
      throw DimensionMismatch("gp::fit input " + std::to_string(i), dim, static_cast<std::size_t>(xs[i].size()));
    }
    if (!xs[i].allFinite() || !std::isfinite(ys[i])) {
      throw std::invalid_argument("gp::fit: non-finite training data at row " + std::to_string(i));
    }
  }
  m.xs_ = xs;
  m.ys_ = ys;
  m.factorize();
  return m;
}

GpModel add_sample(const GpModel& model, const Vec& x, double y) {
  std::vector<Vec> xs = model.inputs();
  std::vector<double> ys = model.targets();
  xs.push_back(x);
  ys.push_back(y);
  return fit(xs, ys, model.kernel(), model.dim());
}

}  // namespace apid::gp
