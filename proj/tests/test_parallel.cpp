#include <doctest.h>

#include <omp.h>

#include <cmath>

#include "apid/bayesopt.hpp"
#include "apid/dynamics.hpp"
#include "support.hpp"

using oracle::Rng;

TEST_CASE("compliance sweep: parallel equals serial") {
  omp_set_num_threads(4);
  Rng rng(211);
  const auto arm = oracle::random_arm(rng, 3);
  std::vector<apid::dynamics::Vec> qs;
  for (int i = 0; i < 500; ++i) qs.push_back(rng.vec(3, -3, 3));
  qs.push_back(apid::dynamics::Vec::Zero(3));
  const auto a = apid::dynamics::compliance_sweep_serial(arm, qs);
  const auto b = apid::dynamics::compliance_sweep_parallel(arm, qs);
  REQUIRE(a.size() == b.size());
  CHECK(a.back().singular);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].singular == b[i].singular);
    if (a[i].singular) continue;
    CHECK(a[i].ellipsoid.semi_axes == b[i].ellipsoid.semi_axes);
    CHECK(a[i].ellipsoid.directions == b[i].ellipsoid.directions);
  }
}

TEST_CASE("candidate scoring: parallel equals serial") {
  omp_set_num_threads(4);
  Rng rng(223);
  std::vector<apid::gp::Vec> xs, cand;
  std::vector<double> ys;
  for (int i = 0; i < 12; ++i) {
    xs.push_back(rng.vec(5, 0, 1));
    ys.push_back(rng.normal());
  }
  for (int i = 0; i < 2048; ++i) cand.push_back(rng.vec(5, 0, 1));
  const auto model = apid::gp::fit(xs, ys, apid::gp::KernelParams{}, 5);
  CHECK(apid::bayesopt::score_candidates_serial(model, cand, 0.7) ==
        apid::bayesopt::score_candidates_parallel(model, cand, 0.7));
}

TEST_CASE("batch evaluation: parallel equals serial, failures isolated") {
  omp_set_num_threads(4);
  Rng rng(227);
  std::vector<apid::gp::Vec> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(rng.vec(2, -1, 1));
  apid::bayesopt::Objective f = [](const apid::gp::Vec& x) -> std::optional<double> {
    if (x[0] > 0.8) throw std::runtime_error("fail");
    if (x[1] > 0.8) return std::nan("");
    double s = 0;
    for (int k = 0; k < 2000; ++k) s += std::sin(x[0] * k) * std::cos(x[1] + k);
    return s;
  };
  const auto a = apid::bayesopt::evaluate_batch_serial(f, pts);
  const auto b = apid::bayesopt::evaluate_batch_parallel(f, pts);
  REQUIRE(a.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(a[i].has_value() == b[i].has_value());
    CHECK(a[i].has_value() == (pts[i][0] <= 0.8 && pts[i][1] <= 0.8));
    if (a[i]) CHECK(*a[i] == *b[i]);
  }
}
