#pragma once
// Sequential Bayesian optimization with an Expected-Improvement acquisition.
//
// Costs are minimized. Internally the surrogate models f = -cost (standardized),
// so EI is used in its maximization form:
//   EI(x) = (mean(x) - y_best) Phi(a) + sqrt(V(x)) phi(a),  a = (mean(x) - y_best) / sqrt(V(x)).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "apid/gp.hpp"

namespace apid::bayesopt {

using Vec = Eigen::VectorXd;

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

struct SearchBox {
  std::vector<Dimension> dims;

  std::size_t dim() const noexcept { return dims.size(); }
  void validate() const;
  bool contains(const Vec& x) const;
  /// Affine maps between the box and the unit cube.
  Vec to_unit(const Vec& x) const;
  Vec from_unit(const Vec& u) const;
};

struct BoRecord {
  std::size_t iteration = 0;  // 1-based
  Vec parameters;             // box coordinates
  double cost = 0.0;
  double best_so_far = 0.0;
  bool penalized = false;     // objective failed; cost is the substitute penalty
};

struct BoTrace {
  std::uint64_t seed = 0;
  std::vector<BoRecord> records;

  /// Record with the lowest cost (first one on ties).
  const BoRecord& best() const;
};

/// Returns std::nullopt (or a non-finite value) when the evaluation failed.
using Objective = std::function<std::optional<double>(const Vec& parameters)>;

double expected_improvement(double mean, double variance, double y_best);
double expected_improvement(const gp::GpModel& model, const Vec& x, double y_best);

/// EI of every candidate; the parallel kernel is bit-identical to the serial one.
std::vector<double> score_candidates_serial(const gp::GpModel& model, const std::vector<Vec>& candidates,
                                            double y_best);
std::vector<double> score_candidates_parallel(const gp::GpModel& model,
                                              const std::vector<Vec>& candidates, double y_best);

/// Objective values for a batch of points, in order. The parallel kernel calls
/// the objective concurrently, so it must be safe to do so.
std::vector<std::optional<double>> evaluate_batch_serial(const Objective& objective,
                                                         const std::vector<Vec>& points);
std::vector<std::optional<double>> evaluate_batch_parallel(const Objective& objective,
                                                           const std::vector<Vec>& points);

/// n stratified points in [0, 1]^d, one per row-stratum in every dimension.
std::vector<Vec> latin_hypercube(std::size_t n, std::size_t d, std::mt19937_64& rng);

struct ProposalOptions {
  std::size_t n_candidates = 1024;
  std::size_t n_refine_starts = 4;
  std::size_t refine_passes = 20;
  double initial_step = 0.1;  // unit-cube units, halved every pass
  bool parallel = true;
};

/// Approximate argmax of EI over the box. `model` must be trained on unit-cube
/// inputs (SearchBox::to_unit). Returns box coordinates.
Vec propose_next(const gp::GpModel& model, const SearchBox& box, double y_best, std::mt19937_64& rng,
                 const ProposalOptions& opts = {});

struct OptimizeOptions {
  std::size_t budget = 20;
  std::size_t n_init = 5;
  std::uint64_t seed = 42;
  gp::KernelParams kernel{1.0, {0.2}, 0.05};
  /// Pick the length scale from {0.1, 0.2, 0.4} by marginal likelihood each iteration.
  bool learn_length_scale = false;
  ProposalOptions proposal;
  bool parallel_init = true;
  double first_failure_penalty = 1e6;
};

/// Latin-hypercube initialization followed by EI-selected evaluations. Never
/// throws for objective failures: they are recorded with a penalty cost of twice
/// the worst finite cost seen so far (first_failure_penalty if none).
BoTrace optimize(const Objective& objective, const SearchBox& box, const OptimizeOptions& opts = {});

}  // namespace apid::bayesopt
