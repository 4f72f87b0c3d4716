// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "ueval/aso.hpp"
#include "ueval/calibration.hpp"
#include "ueval/density.hpp"
#include "ueval/metrics.hpp"
#include "ueval/parallel.hpp"
#include "ueval/random.hpp"
#include "ueval/synth.hpp"

using namespace ueval;

namespace {

const Dataset& multi_sample_data() {
  static const Dataset ds = [] {
    SynthSpec s;
    s.n_id = 4000;
    s.samples = 8;
    s.steps = 16;
    s.classes = 20;
    s.intra_sample_noise = 0.3;
    return gen_multisample(s);
  }();
  return ds;
}

std::pair<std::vector<double>, std::vector<double>> score_pair() {
  Rng rng(3);
  std::vector<double> a(500), b(500);
  for (auto& x : a) x = rng.uniform();
  for (auto& x : b) x = rng.uniform() + 0.05;
  return {a, b};
}

void BM_ComputeSeries(benchmark::State& state) {
  parallel::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_series(multi_sample_data(), MetricName::mutual_information, Aggregation::mean));
}

void BM_ComputeSeriesSerial(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::compute_series(multi_sample_data(), MetricName::mutual_information, Aggregation::mean));
}

void BM_PoolPredictions(benchmark::State& state) {
  parallel::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pool_predictions(multi_sample_data()));
}

void BM_PoolPredictionsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::pool_predictions(multi_sample_data()));
}

void BM_Bootstrap(benchmark::State& state) {
  parallel::set_threads(static_cast<int>(state.range(0)));
  const auto [a, b] = score_pair();
  AsoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_violation_ratios(a, b, cfg));
}

void BM_BootstrapSerial(benchmark::State& state) {
  const auto [a, b] = score_pair();
  AsoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(serial::bootstrap_violation_ratios(a, b, cfg));
}

const DensityModel& density_model() {
  static const DensityModel m = [] {
    SynthSpec s;
    s.n_id = 1;
    s.n_ood = 0;
    s.n_train = 20000;
    s.feature_dim = 32;
    return fit_density(gen_id_ood(s).train);
  }();
  return m;
}

const Eigen::MatrixXd& density_rows() {
  static const Eigen::MatrixXd x = Eigen::MatrixXd::Random(50000, 32);
  return x;
}

void BM_ScoreRows(benchmark::State& state) {
  parallel::set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(density_model().score_rows(density_rows()));
}

void BM_ScoreRowsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::score_rows(density_model(), density_rows()));
}

}  // namespace

BENCHMARK(BM_ComputeSeriesSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ComputeSeries)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PoolPredictionsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PoolPredictions)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BootstrapSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Bootstrap)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreRowsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreRows)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
