// Serial reference vs OpenMP kernel, side by side for each parallel hot spot.
// Thread count follows OMP_NUM_THREADS (or APID_THREADS via omp_set_num_threads).

#include <benchmark/benchmark.h>

#include <omp.h>

#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "apid/bayesopt.hpp"
#include "apid/dynamics.hpp"
#include "apid/gp.hpp"
#include "apid/harness.hpp"

using namespace apid;

namespace {

std::vector<dynamics::Vec> random_configurations(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<dynamics::Vec> out(n, dynamics::Vec(static_cast<Eigen::Index>(dim)));
  for (auto& v : out) {
    for (auto& x : v) x = u(gen);
  }
  return out;
}

const dynamics::ArmModel& arm() {
  static const auto a = harness::default_scenario().arm;
  return a;
}

void BM_ComplianceSerial(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::compliance_sweep_serial(arm(), qs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ComplianceParallel(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::compliance_sweep_parallel(arm(), qs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct ScoringFixture {
  gp::GpModel model;
  std::vector<gp::Vec> candidates;
};

const ScoringFixture& scoring_fixture() {
  static const ScoringFixture f = [] {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<gp::Vec> xs(20, gp::Vec(5)), cand(1024, gp::Vec(5));
    std::vector<double> ys;
    for (auto& x : xs) {
      for (auto& v : x) v = u(gen);
      ys.push_back(u(gen));
    }
    for (auto& x : cand) {
      for (auto& v : x) v = u(gen);
    }
    return ScoringFixture{gp::fit(xs, ys, gp::KernelParams{1.0, {0.2}, 0.01}, 5), cand};
  }();
  return f;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto& f = scoring_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(bayesopt::score_candidates_serial(f.model, f.candidates, 0.5));
}

void BM_ScoreParallel(benchmark::State& state) {
  const auto& f = scoring_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(bayesopt::score_candidates_parallel(f.model, f.candidates, 0.5));
}

// The batch kernel in its real setting: one short closed-loop rollout per point.
bayesopt::Objective rollout_objective() {
  const auto base = harness::default_scenario();
  const auto scenario =
      harness::step_response_scenario(base.arm, base.initial_state.q, dynamics::Vec::Constant(3, 0.1), 1.0);
  return [scenario](const bayesopt::Vec& x) -> std::optional<double> {
    harness::ControllerAssignment a(3, control::PidGains{x[0], 10.0, x[1]});
    return harness::cost(harness::rollout(scenario, a), 0);
  };
}

std::vector<bayesopt::Vec> batch_points() {
  std::vector<bayesopt::Vec> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(bayesopt::Vec{{100.0 + 20.0 * i, 5.0 + i}});
  return pts;
}

void BM_BatchSerial(benchmark::State& state) {
  const auto f = rollout_objective();
  const auto pts = batch_points();
  for (auto _ : state) benchmark::DoNotOptimize(bayesopt::evaluate_batch_serial(f, pts));
}

void BM_BatchParallel(benchmark::State& state) {
  const auto f = rollout_objective();
  const auto pts = batch_points();
  for (auto _ : state) benchmark::DoNotOptimize(bayesopt::evaluate_batch_parallel(f, pts));
}

}  // namespace

BENCHMARK(BM_ComplianceSerial)->Arg(4096)->Arg(65536);
BENCHMARK(BM_ComplianceParallel)->Arg(4096)->Arg(65536)->UseRealTime();
BENCHMARK(BM_ScoreSerial);
BENCHMARK(BM_ScoreParallel)->UseRealTime();
BENCHMARK(BM_BatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
  if (const char* t = std::getenv("APID_THREADS")) omp_set_num_threads(std::stoi(t));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
