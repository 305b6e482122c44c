// Serial reference kernels against their OpenMP counterparts.
#include "ctmle/kde.hpp"
#include "ctmle/monte_carlo.hpp"
#include "ctmle/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

ctmle::McConfig mc_config() {
    ctmle::McConfig cfg;
    cfg.dgp = ctmle::Dgp::sim1;
    cfg.n = 200;
    cfg.gamma = 3.0;
    cfg.reps = 16;
    cfg.seed = 7;
    cfg.estimators = ctmle::default_mc_estimators(cfg.dgp);
    for (auto& e : cfg.estimators) e.spec.cfg.compute_variance = false;
    return cfg;
}

std::vector<double> kde_samples(std::size_t n) {
    auto rng = ctmle::make_rng(3, 0);
    std::normal_distribution<double> d;
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

void BM_MonteCarloSerial(benchmark::State& state) {
    const auto cfg = mc_config();
    for (auto _ : state) benchmark::DoNotOptimize(ctmle::run_mc_serial(cfg));
}

void BM_MonteCarloParallel(benchmark::State& state) {
    auto cfg = mc_config();
    cfg.threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(ctmle::run_mc(cfg));
}

void BM_KdeSerial(benchmark::State& state) {
    const auto x = kde_samples(static_cast<std::size_t>(state.range(0)));
    const auto grid = ctmle::default_kde_grid(x, 512);
    for (auto _ : state) benchmark::DoNotOptimize(ctmle::kde_serial(x, grid));
}

void BM_KdeParallel(benchmark::State& state) {
    const auto x = kde_samples(static_cast<std::size_t>(state.range(0)));
    const auto grid = ctmle::default_kde_grid(x, 512);
    for (auto _ : state) benchmark::DoNotOptimize(ctmle::kde(x, grid));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
