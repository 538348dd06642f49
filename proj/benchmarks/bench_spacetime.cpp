#include <benchmark/benchmark.h>

#include <cmath>

#include "skylens/spacetime.hpp"

using namespace skylens;

namespace {

st::SpaceTimeImage make_stack(int half_length, int frames) {
    st::SpaceTimeImage s;
    s.half_length = half_length;
    s.band_width = 1;
    s.period_s = 30.0;
    for (int i = 0; i < frames; ++i) s.timestamps.push_back(30.0 * i);
    const std::size_t cells = static_cast<std::size_t>(s.rows()) * frames;
    s.rgb.assign(cells * 3, 0.4f);
    s.valid.assign(cells, 1);
    for (std::size_t i = 0; i < cells; ++i) s.rgb[i * 3 + 2] = 0.6f;
    return s;
}

}  // namespace

static void BM_Shear(benchmark::State& state) {
    const st::SpaceTimeImage stack = make_stack(120, 400);
    for (auto _ : state) {
        auto w = st::shear(stack, 70.0, 200, 47, 60);
        benchmark::DoNotOptimize(w.rgb.data());
    }
}
BENCHMARK(BM_Shear);

static void BM_OptimalTheta(benchmark::State& state) {
    const st::SpaceTimeImage stack = make_stack(120, 400);
    for (auto _ : state) {
        benchmark::DoNotOptimize(st::optimal_theta(stack, 200, 47, 60));
    }
}
BENCHMARK(BM_OptimalTheta);
