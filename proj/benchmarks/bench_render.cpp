#include <benchmark/benchmark.h>

#include "skylens/dataset.hpp"
#include "skylens/mirror.hpp"
#include "skylens/render.hpp"

using namespace skylens;

namespace {

const mirror::OpticalConfig& optics() {
    static mirror::OpticalConfig cfg;
    return cfg;
}

const sim::RadialCamera& camera() {
    static mirror::MirrorProfile profile = mirror::solve_profile(optics());
    static sim::RadialCamera cam(profile, optics());
    return cam;
}

}  // namespace

static void BM_RenderCloudFrame(benchmark::State& state) {
    const int res = static_cast<int>(state.range(0));
    const sim::DayScene scene = sim::randomize_day_scene(7, 0);
    double t = 10000.0;
    for (auto _ : state) {
        auto frame = sim::render_frame(camera(), {scene.clouds, scene.sun}, t, res, 1,
                                       mirror::MirrorKind::Designed);
        benchmark::DoNotOptimize(frame.hdr.data.data());
        t += 30.0;
    }
    state.SetItemsProcessed(state.iterations() * res * res);
}
BENCHMARK(BM_RenderCloudFrame)->Arg(128)->Arg(256);

static void BM_SolveProfile(benchmark::State& state) {
    for (auto _ : state) {
        auto profile = mirror::solve_profile(optics());
        benchmark::DoNotOptimize(profile.samples.data());
    }
}
BENCHMARK(BM_SolveProfile);
