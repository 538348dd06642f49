#include <benchmark/benchmark.h>

#include "skylens/noise.hpp"
#include "skylens/sky.hpp"

using namespace skylens;

static void BM_ValueNoise(benchmark::State& state) {
    double x = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(value_noise(42, x, x * 1.7));
        x += 0.37;
    }
}
BENCHMARK(BM_ValueNoise);

static void BM_FractalNoise4(benchmark::State& state) {
    double x = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fractal_noise(42, x, x * 1.7, 4, 0.5, 2.0));
        x += 0.37;
    }
}
BENCHMARK(BM_FractalNoise4);

static void BM_SampleOpacity(benchmark::State& state) {
    sim::CloudField field;
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::sample_opacity(field, x, -x, 300.0));
        x += 11.0;
    }
}
BENCHMARK(BM_SampleOpacity);
