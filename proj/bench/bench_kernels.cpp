// Serial reference kernels against their OpenMP counterparts.
//   ./bench_kernels --benchmark_counters_tabular=true

#include <benchmark/benchmark.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "koopcert/certify.hpp"
#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/edmd.hpp"
#include "koopcert/experiments.hpp"

using namespace koopcert;

namespace {

const StateDomain kDomain{symmetric_box(2, 2.0), {}};

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

void BM_BuildMatricesSerial(benchmark::State& state) {
    const auto dict = monomial_dictionary(2, 5);
    const auto samples = sample_iid(kDomain, static_cast<int>(state.range(0)), 1);
    const Vec u = Vec::Ones(1);
    for (auto _ : state) benchmark::DoNotOptimize(build_matrices_serial(dict, duffing(), u, samples));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BuildMatrices(benchmark::State& state) {
    set_threads(static_cast<int>(state.range(1)));
    const auto dict = monomial_dictionary(2, 5);
    const auto samples = sample_iid(kDomain, static_cast<int>(state.range(0)), 1);
    const Vec u = Vec::Ones(1);
    for (auto _ : state) benchmark::DoNotOptimize(build_matrices(dict, duffing(), u, samples));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GeneratorSweep(benchmark::State& state) {
    set_threads(static_cast<int>(state.range(0)));
    const SweepSpec spec{Scenario{duffing(), kDomain, monomial_dictionary(2, 3), Vec::Ones(2), 1.0, 1e-2, 40, false},
                         {100, 1000},
                         16,
                         0,
                         {1.0}};
    for (auto _ : state) benchmark::DoNotOptimize(run_generator_sweep(spec));
}

void BM_SoundnessTrials(benchmark::State& state) {
    set_threads(static_cast<int>(state.range(0)));
    ScalarObservable h{"x1-2", [](const Vec& x) { return x[0] - 2.0; },
                       [](const Vec&) { return Vec::Unit(2, 0).eval(); }};
    const CertificationScenario scenario{duffing(), kDomain, monomial_dictionary(2, 5), ConstraintSet({h}),
                                         Vec::Ones(2), ControlSignal::constant(Vec::Ones(1), symmetric_box(1, 1.0)),
                                         100, false, 40};
    CertificationConfig cfg;
    cfg.horizon = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(soundness_trial(scenario, 16, cfg, 0));
}

}  // namespace

BENCHMARK(BM_BuildMatricesSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildMatrices)->ArgsProduct({{1000, 10000}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GeneratorSweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SoundnessTrials)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
