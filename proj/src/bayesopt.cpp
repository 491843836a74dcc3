#include "apid/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "apid/errors.hpp"

namespace apid::bayesopt {

// ---------------------------------------------------------------------------
// SearchBox / trace

void SearchBox::validate() const {
  if (dims.empty()) throw std::invalid_argument("search box has no dimensions");
  for (const Dimension& d : dims) {
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
      throw std::invalid_argument("search box dimension '" + d.name + "' needs finite lower < upper");
    }
  }
}

bool SearchBox::contains(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double v = x[static_cast<Eigen::Index>(i)];
    if (!(v >= dims[i].lower && v <= dims[i].upper)) return false;
  }
  return true;
}

Vec SearchBox::to_unit(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw DimensionMismatch("SearchBox::to_unit", dim(), static_cast<std::size_t>(x.size()));
  Vec u(x.size());
  for (std::size_t i = 0; i < dim(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    u[k] = (x[k] - dims[i].lower) / (dims[i].upper - dims[i].lower);
  }
  return u;
}

Vec SearchBox::from_unit(const Vec& u) const {
  if (static_cast<std::size_t>(u.size()) != dim()) throw DimensionMismatch("SearchBox::from_unit", dim(), static_cast<std::size_t>(u.size()));
  Vec x(u.size());
  for (std::size_t i = 0; i < dim(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double t = std::clamp(u[k], 0.0, 1.0);
    // Endpoints map exactly onto the bounds.
    x[k] = t == 1.0 ? dims[i].upper : dims[i].lower + t * (dims[i].upper - dims[i].lower);
  }
  return x;
}

const BoRecord& BoTrace::best() const {
  if (records.empty()) throw std::logic_error("BoTrace::best on an empty trace");
  return *std::min_element(records.begin(), records.end(),
                           [](const BoRecord& a, const BoRecord& b) { return a.cost < b.cost; });
}

// ---------------------------------------------------------------------------
// Acquisition

double expected_improvement(double mean, double variance, double y_best) {
  if (!(variance > 0.0)) return 0.0;
  const double sd = std::sqrt(variance);
  const double gap = mean - y_best;
  const double a = gap / sd;
  const double cdf = 0.5 * std::erfc(-a / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gap * cdf + sd * pdf);
}

double expected_improvement(const gp::GpModel& model, const Vec& x, double y_best) {
  const gp::Posterior p = model.posterior(x);
  return expected_improvement(p.mean, p.variance, y_best);
}

std::vector<double> score_candidates_serial(const gp::GpModel& model, const std::vector<Vec>& candidates,
                                            double y_best) {
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = expected_improvement(model, candidates[i], y_best);
  }
  return scores;
}

std::vector<double> score_candidates_parallel(const gp::GpModel& model,
                                              const std::vector<Vec>& candidates, double y_best) {
  for (const Vec& c : candidates) {
    if (static_cast<std::size_t>(c.size()) != model.dim()) {
      throw DimensionMismatch("score_candidates", model.dim(), static_cast<std::size_t>(c.size()));
    }
  }
  std::vector<double> scores(candidates.size());
  const auto count = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    scores[k] = expected_improvement(model, candidates[k], y_best);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Batch evaluation

namespace {
std::optional<double> guarded(const Objective& objective, const Vec& x) {
  try {
    std::optional<double> v = objective(x);
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}
}  // namespace

std::vector<std::optional<double>> evaluate_batch_serial(const Objective& objective,
                                                         const std::vector<Vec>& points) {
  std::vector<std::optional<double>> out;
  out.reserve(points.size());
  for (const Vec& p : points) out.push_back(guarded(objective, p));
  return out;
}

std::vector<std::optional<double>> evaluate_batch_parallel(const Objective& objective,
                                                           const std::vector<Vec>& points) {
  std::vector<std::optional<double>> out(points.size());
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = guarded(objective, points[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling and proposal

std::vector<Vec> latin_hypercube(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> pts(n, Vec(static_cast<Eigen::Index>(d)));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Fisher-Yates with explicit draws so the result does not depend on std::shuffle's algorithm.
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(rng)]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      pts[i][static_cast<Eigen::Index>(j)] =
          (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
    }
  }
  return pts;
}

Vec propose_next(const gp::GpModel& model, const SearchBox& box, double y_best, std::mt19937_64& rng,
                 const ProposalOptions& opts) {
  box.validate();
  if (model.dim() != box.dim()) throw DimensionMismatch("propose_next", box.dim(), model.dim());
  if (opts.n_candidates == 0) throw std::invalid_argument("propose_next: n_candidates must be >= 1");
  const auto d = static_cast<Eigen::Index>(box.dim());

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> candidates(opts.n_candidates, Vec(d));
  for (Vec& c : candidates) {
    for (Eigen::Index k = 0; k < d; ++k) c[k] = unif(rng);
  }
  const std::vector<double> scores = opts.parallel ? score_candidates_parallel(model, candidates, y_best)
                                                   : score_candidates_serial(model, candidates, y_best);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  Vec best = candidates[order.front()];
  double best_score = scores[order.front()];
  const std::size_t starts = std::min(opts.n_refine_starts, order.size());
  for (std::size_t s = 0; s < starts; ++s) {
    Vec x = candidates[order[s]];
    double fx = scores[order[s]];
    double step = opts.initial_step;
    for (std::size_t pass = 0; pass < opts.refine_passes; ++pass, step *= 0.5) {
      for (Eigen::Index k = 0; k < d; ++k) {
        for (double sign : {1.0, -1.0}) {
          Vec trial = x;
          trial[k] = std::clamp(x[k] + sign * step, 0.0, 1.0);
          if (trial[k] == x[k]) continue;
          const double ft = expected_improvement(model, trial, y_best);
          if (ft > fx) {
            x = std::move(trial);
            fx = ft;
            break;
          }
        }
      }
    }
    if (fx > best_score) {
      best = x;
      best_score = fx;
    }
  }
  return box.from_unit(best);
}

// ---------------------------------------------------------------------------
// Loop

namespace {

struct Standardized {
  std::vector<double> values;
  double best = 0.0;
};

// f = -cost, centred and scaled to unit (population) standard deviation.
Standardized standardize_negated(const std::vector<BoRecord>& records) {
  const auto n = static_cast<double>(records.size());
  double mean = 0.0;
  for (const BoRecord& r : records) mean += -r.cost;
  mean /= n;
  double var = 0.0;
  for (const BoRecord& r : records) var += (-r.cost - mean) * (-r.cost - mean);
  var /= n;
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  Standardized s;
  s.values.reserve(records.size());
  s.best = -INFINITY;
  for (const BoRecord& r : records) {
    s.values.push_back((-r.cost - mean) / sd);
    s.best = std::max(s.best, s.values.back());
  }
  return s;
}

gp::GpModel surrogate(const std::vector<Vec>& unit_inputs, const std::vector<double>& targets,
                      const OptimizeOptions& opts, std::size_t dim) {
  if (!opts.learn_length_scale) return gp::fit(unit_inputs, targets, opts.kernel, dim);
  std::optional<gp::GpModel> chosen;
  double best_lml = -INFINITY;
  for (double ell : {0.1, 0.2, 0.4}) {
    gp::KernelParams k = opts.kernel;
    k.length_scale = {ell};
    gp::GpModel m = gp::fit(unit_inputs, targets, k, dim);
    const double lml = m.log_marginal_likelihood();
    if (!chosen || lml > best_lml) {
      best_lml = lml;
      chosen = std::move(m);
    }
  }
  return *chosen;
}

class TraceBuilder {
 public:
  TraceBuilder(BoTrace& trace, double first_penalty) : trace_(trace), first_penalty_(first_penalty) {}

  void record(const Vec& params, const std::optional<double>& value) {
    BoRecord r;
    r.iteration = trace_.records.size() + 1;
    r.parameters = params;
    if (value) {
      r.cost = *value;
      worst_ = worst_ ? std::max(*worst_, *value) : *value;
    } else {
      r.penalized = true;
      r.cost = worst_ ? 2.0 * std::abs(*worst_) : first_penalty_;
    }
    r.best_so_far = trace_.records.empty() ? r.cost : std::min(trace_.records.back().best_so_far, r.cost);
    trace_.records.push_back(std::move(r));
  }

 private:
  BoTrace& trace_;
  double first_penalty_;
  std::optional<double> worst_;
};

}  // namespace

BoTrace optimize(const Objective& objective, const SearchBox& box, const OptimizeOptions& opts) {
  box.validate();
  if (opts.n_init < 1 || opts.budget < opts.n_init) {
    throw std::invalid_argument("optimize: need budget >= n_init >= 1");
  }
  BoTrace trace;
  trace.seed = opts.seed;
  TraceBuilder builder(trace, opts.first_failure_penalty);
  std::mt19937_64 rng(opts.seed);

  std::vector<Vec> unit_inputs = latin_hypercube(opts.n_init, box.dim(), rng);
  std::vector<Vec> init_points;
  init_points.reserve(unit_inputs.size());
  for (Vec& u : unit_inputs) {
    init_points.push_back(box.from_unit(u));
    u = box.to_unit(init_points.back());
  }
  const auto init_values = opts.parallel_init ? evaluate_batch_parallel(objective, init_points)
                                              : evaluate_batch_serial(objective, init_points);
  for (std::size_t i = 0; i < init_points.size(); ++i) builder.record(init_points[i], init_values[i]);

  while (trace.records.size() < opts.budget) {
    const Standardized y = standardize_negated(trace.records);
    const gp::GpModel model = surrogate(unit_inputs, y.values, opts, box.dim());
    const Vec next = propose_next(model, box, y.best, rng, opts.proposal);
    builder.record(next, evaluate_batch_serial(objective, {next}).front());
    unit_inputs.push_back(box.to_unit(next));
  }
  return trace;
}

}  // namespace apid::bayesopt
