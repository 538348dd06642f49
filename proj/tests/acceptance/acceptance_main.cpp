// Acceptance suite: one pass/fail line per criterion. Criteria 10 and 11
// read tables produced by the `prepare-headline` step (a ctest fixture).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "skylens/dataset.hpp"
#include "skylens/experiment.hpp"
#include "skylens/metrics.hpp"
#include "skylens/mirror.hpp"
#include "skylens/models.hpp"
#include "skylens/pipeline.hpp"
#include "skylens/render.hpp"
#include "skylens/run_manifest.hpp"
#include "skylens/spacetime.hpp"
#include "../support/oracles.hpp"

namespace fs = std::filesystem;
using namespace skylens;

namespace {

struct Check {
    bool ok = true;
    std::string detail;
    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

int report(int id, const std::string& title, const Check& check) {
    if (check.ok) {
        std::printf("[PASS] criterion %d: %s\n", id, title.c_str());
        return 0;
    }
    std::printf("[FAIL] criterion %d: %s (%s)\n", id, title.c_str(), check.detail.c_str());
    return 1;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

mirror::OpticalConfig rig_optics() { return mirror::OpticalConfig{}; }

// ---- criteria 1..9 -----------------------------------------------------------

int criterion_1() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    const mirror::OpticalConfig cfg = rig_optics();
    const auto profile = mirror::solve_profile(cfg);
    const auto mapping = mirror::forward_trace_mapping(profile, cfg, 1024);
    const double target_tan = std::tan(deg_to_rad(85.0));
    double max_rel = 0.0;
    int valid = 0;
    double end_tan = 0.0;
    for (const auto& s : mapping.samples) {
        if (!s.sky_tangent) continue;
        ++valid;
        end_tan = *s.sky_tangent;
        max_rel = std::max(max_rel,
                           std::abs(*s.sky_tangent - s.sensor_radius_norm * target_tan) / target_tan);
    }
    const double elapsed = seconds_since(t0);
    c.expect(valid >= 1000, "fewer than 1000 valid rays");
    c.expect(max_rel < 1e-3, "max relative residual " + std::to_string(max_rel));
    c.expect(std::abs(end_tan - target_tan) / target_tan < 1e-3,
             "endpoint tangent " + std::to_string(end_tan));
    c.expect(std::abs(target_tan - 11.43) < 0.01, "tan 85 deg sanity");
    c.expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + " s");
    return report(1, "designed mapping linear in tangent (<1e-3), endpoint tan 85", c);
}

int criterion_2() {
    Check c;
    mirror::OpticalConfig cfg = rig_optics();
    cfg.target_half_fov_deg = cfg.camera_half_fov_deg();  // s = 1
    const auto profile = mirror::solve_profile(cfg);
    for (const auto& s : profile.samples) {
        c.expect(std::abs(s.slope) < 1e-12, "slope " + std::to_string(s.slope));
        c.expect(std::abs(s.z + cfg.camera_height_m) < 1e-12, "z deviates from -c");
        if (!c.ok) break;
    }
    return report(2, "degenerate s=1 design is the plane z = -c", c);
}

int criterion_3() {
    Check c;
    const mirror::OpticalConfig cfg = rig_optics();
    const auto designed = mirror::solve_profile(cfg);
    const auto hemi = mirror::hemisphere_profile(mirror::matched_hemisphere_radius(cfg),
                                                 cfg.camera_height_m);
    const auto md = mirror::forward_trace_mapping(designed, cfg, 2048);
    const auto mh = mirror::forward_trace_mapping(hemi, cfg, 2048);
    const auto ud = md.radius_at_tangent(1.0);
    const auto uh = mh.radius_at_tangent(1.0);
    c.expect(ud.has_value() && uh.has_value(), "45-degree cone not reached");
    if (ud && uh) {
        c.expect(*uh > 0.5, "hemisphere fraction " + std::to_string(*uh));
        c.expect(*ud < 0.15, "designed fraction " + std::to_string(*ud));
    }
    return report(3, "hemisphere 45-deg cone > 50% of radius; designed < 15%", c);
}

int criterion_4() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    const mirror::OpticalConfig cfg = rig_optics();
    const auto designed = mirror::solve_profile(cfg);
    const auto hemi = mirror::hemisphere_profile(mirror::matched_hemisphere_radius(cfg),
                                                 cfg.camera_height_m);
    const sim::CheckerboardScene board;
    const sim::SkyFrame fd = sim::render_frame(designed, cfg, board, 0.0, 256, 4);
    const sim::SkyFrame fh = sim::render_frame(hemi, cfg, board, 0.0, 256, 4);

    const auto widths = oracles::scanline_cell_widths(fd);
    c.expect(widths.size() >= 20, "too few cells resolved");
    const double cov = oracles::coefficient_of_variation(widths);
    c.expect(cov < 0.10, "designed cell-size CoV " + std::to_string(cov));

    const auto [zenith, edge] = oracles::zenith_and_edge_cell_areas(fh);
    c.expect(zenith > 0.0 && edge > 0.0, "hemisphere cells not resolved");
    if (zenith > 0.0 && edge > 0.0)
        c.expect(zenith >= 5.0 * edge, "zenith/edge ratio " + std::to_string(zenith / edge));

    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 30.0, "runtime " + std::to_string(elapsed) + " s");
    return report(4, "checkerboard uniform on designed mirror, compressed on hemisphere", c);
}

int criterion_5() {
    Check c;
    for (int theta = 61; theta <= 84 && c.ok; ++theta) {
        for (int seed = 0; seed < 10; ++seed) {
            st::SpaceTimeImage stack = oracles::blank_sky_stack(100, 120);
            Rng rng(static_cast<std::uint64_t>(1000 * theta + seed));
            for (int k = 0; k < 6; ++k)
                oracles::paint_streak(stack, theta, 30 + static_cast<int>(rng.below(80)),
                                      1.0 + 2.0 * rng.uniform());
            const double got = st::optimal_theta(stack, 80, 60, 30);
            if (std::abs(got - theta) > 1.0) {
                c.expect(false, "theta " + std::to_string(theta) + " seed " + std::to_string(seed) +
                                    " -> " + std::to_string(got));
                break;
            }
        }
    }
    return report(5, "theta sweep recovers streak angles 61..84 within 1 degree", c);
}

int criterion_6() {
    Check c;
    Rng rng(77);
    int tested = 0;
    double worst = 0.0;
    while (tested < 1000) {
        std::vector<double> scores(12);
        std::vector<std::uint8_t> labels(12);
        bool pos = false, neg = false;
        for (int i = 0; i < 12; ++i) {
            scores[static_cast<std::size_t>(i)] = std::floor(rng.uniform() * 8.0) / 8.0;
            labels[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
            (labels[static_cast<std::size_t>(i)] ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        ++tested;
        const double trap = harness::roc_auc(scores, labels).auc;
        const double brute = oracles::pair_count_auc(scores, labels);
        worst = std::max(worst, std::abs(trap - brute));
    }
    c.expect(worst < 1e-12, "max |trapezoid - pair count| = " + std::to_string(worst));
    return report(6, "trapezoid AUC equals brute-force pair counting on 1000 instances", c);
}

int criterion_7() {
    Check c;
    Rng rng(313);
    using oracles::max_grad_rel_error;
    using oracles::project_to_scalar;

    c.expect(max_grad_rel_error({{2, 5, 6}, {3, 2, 3, 3}, {3}},
                                [](std::vector<nn::Tensor>& in) {
                                    return project_to_scalar(nn::conv2d(in[0], in[1], in[2]), 1);
                                },
                                rng) < 1e-4,
             "conv2d");
    c.expect(max_grad_rel_error({{3, 6}, {6}, {6}},
                                [](std::vector<nn::Tensor>& in) {
                                    return project_to_scalar(nn::layer_norm(in[0], in[1], in[2]), 2);
                                },
                                rng) < 1e-4,
             "layer_norm");
    c.expect(max_grad_rel_error({{4, 5}},
                                [](std::vector<nn::Tensor>& in) {
                                    return project_to_scalar(nn::relu(in[0]), 3);
                                },
                                rng, 0.1, 1.2) < 1e-4,
             "relu");
    c.expect(max_grad_rel_error({{3, 7}},
                                [](std::vector<nn::Tensor>& in) {
                                    return project_to_scalar(nn::sigmoid(in[0]), 4);
                                },
                                rng, -2.0, 2.0) < 1e-4,
             "sigmoid");
    c.expect(max_grad_rel_error({{2, 4}, {4, 3}, {3}},
                                [](std::vector<nn::Tensor>& in) {
                                    return project_to_scalar(nn::linear(in[0], in[1], in[2]), 5);
                                },
                                rng) < 1e-4,
             "linear");
    c.expect(max_grad_rel_error({{4, 6}},
                                [](std::vector<nn::Tensor>& in) {
                                    Rng mask_rng(4242);
                                    return project_to_scalar(nn::dropout(in[0], 0.35, mask_rng, true), 6);
                                },
                                rng) < 1e-4,
             "dropout");
    c.expect(max_grad_rel_error(
                 {{4, 6}, {6, 3}, {6, 3}, {6, 3}, {6, 3}, {6, 3}, {6, 3}, {6, 6}},
                 [](std::vector<nn::Tensor>& in) {
                     const std::vector<nn::Tensor> wq{in[1], in[2]};
                     const std::vector<nn::Tensor> wk{in[3], in[4]};
                     const std::vector<nn::Tensor> wv{in[5], in[6]};
                     return project_to_scalar(
                         nn::multi_head_self_attention(in[0], wq, wk, wv, in[7]), 7);
                 },
                 rng) < 1e-4,
             "attention");
    const std::vector<double> bce_targets{1.0, 0.0, 1.0, 0.0, 1.0};
    c.expect(max_grad_rel_error({{5}},
                                [&](std::vector<nn::Tensor>& in) {
                                    return nn::bce_loss(nn::sigmoid(in[0]), bce_targets);
                                },
                                rng, -2.0, 2.0) < 1e-4,
             "bce");
    const std::vector<double> mse_targets{0.2, -0.4, 0.9, 0.0};
    c.expect(max_grad_rel_error({{4}},
                                [&](std::vector<nn::Tensor>& in) {
                                    return nn::mse_loss(in[0], mse_targets);
                                },
                                rng) < 1e-4,
             "mse");
    // maxpool on well-separated values.
    {
        Rng prng(5);
        std::vector<double> data(static_cast<std::size_t>(2) * 6 * 6);
        for (std::size_t i = 0; i < data.size(); ++i)
            data[i] = static_cast<double>((i * 13) % 29) * 0.2 + prng.uniform(0.0, 0.01);
        nn::Tensor input = nn::Tensor::from({2, 6, 6}, data, true);
        nn::Tensor loss = project_to_scalar(nn::maxpool2x2(input), 8);
        loss.backward();
        double worst = 0.0;
        constexpr double kEps = 1e-5;
        for (std::size_t i = 0; i < input.numel(); ++i) {
            const double saved = input.value()[i];
            input.value()[i] = saved + kEps;
            const double up = project_to_scalar(nn::maxpool2x2(input), 8).value()[0];
            input.value()[i] = saved - kEps;
            const double dn = project_to_scalar(nn::maxpool2x2(input), 8).value()[0];
            input.value()[i] = saved;
            const double numeric = (up - dn) / (2.0 * kEps);
            const double denom = std::max({1.0, std::abs(numeric), std::abs(input.grad()[i])});
            worst = std::max(worst, std::abs(numeric - input.grad()[i]) / denom);
        }
        c.expect(worst < 1e-4, "maxpool");
    }

    // Composite model 1: CNN-MLP occlusion.
    {
        nn::OcclusionModelConfig mc;
        mc.window_rows = 16;
        mc.window_cols = 20;
        mc.horizon = 4;
        mc.conv_channels = {4, 4, 2};
        mc.mlp_hidden = 8;
        mc.seed = 31;
        nn::CnnMlpOcclusion model(mc);
        nn::ForecastSample s;
        Rng srng(9);
        s.image.resize(static_cast<std::size_t>(3) * 16 * 20);
        for (auto& v : s.image) v = static_cast<float>(srng.uniform());
        s.targets = {1.0, 0.0, 1.0, 0.0};
        model.loss_backward(s);
        double worst = 0.0;
        constexpr double kEps = 1e-5;
        for (auto& [name, t] : model.named_parameters()) {
            const std::size_t stride = std::max<std::size_t>(1, t.numel() / 6);
            for (std::size_t i = 0; i < t.numel(); i += stride) {
                const double saved = t.value()[i];
                t.value()[i] = saved + kEps;
                const double up = model.loss_eval(s);
                t.value()[i] = saved - kEps;
                const double dn = model.loss_eval(s);
                t.value()[i] = saved;
                const double numeric = (up - dn) / (2.0 * kEps);
                const double denom = std::max({1.0, std::abs(numeric), std::abs(t.grad()[i])});
                worst = std::max(worst, std::abs(numeric - t.grad()[i]) / denom);
            }
        }
        c.expect(worst < 1e-4, "cnn-mlp composite (worst " + std::to_string(worst) + ")");
    }

    // Composite model 2: transformer reconstruction path.
    {
        nn::GhiModelConfig mc;
        mc.history = 20;
        mc.horizon = 6;
        mc.patch = 5;
        mc.image_rows = 17;
        mc.image_cols = 12;
        mc.conv_channels = {4, 4, 2};
        mc.model_dim = 16;
        mc.depth = 1;
        mc.heads = 2;
        mc.seed = 37;
        nn::GhiForecaster model(mc);
        nn::ForecastSample s;
        Rng srng(11);
        s.image.resize(static_cast<std::size_t>(3) * 17 * 12);
        for (auto& v : s.image) v = static_cast<float>(srng.uniform());
        s.ghi_history.resize(20);
        for (auto& v : s.ghi_history) v = srng.uniform(0.1, 0.9);
        const std::vector<int> masked{0, 2};
        model.reconstruction_loss_backward(s, masked);
        double worst = 0.0;
        constexpr double kEps = 1e-5;
        for (auto& [name, t] : model.named_parameters()) {
            if (name.rfind("fc_head", 0) == 0) continue;
            const std::size_t stride = std::max<std::size_t>(1, t.numel() / 4);
            for (std::size_t i = 0; i < t.numel(); i += stride) {
                const double saved = t.value()[i];
                t.value()[i] = saved + kEps;
                const double up = model.reconstruction_loss_eval(s, masked);
                t.value()[i] = saved - kEps;
                const double dn = model.reconstruction_loss_eval(s, masked);
                t.value()[i] = saved;
                const double numeric = (up - dn) / (2.0 * kEps);
                const double denom = std::max({1.0, std::abs(numeric), std::abs(t.grad()[i])});
                worst = std::max(worst, std::abs(numeric - t.grad()[i]) / denom);
            }
        }
        c.expect(worst < 1e-4, "transformer composite (worst " + std::to_string(worst) + ")");
    }
    return report(7, "all autodiff kernels and both composite models pass gradient checks", c);
}

int criterion_8() {
    Check c;
    nn::GhiModelConfig mc;
    mc.history = 20;
    mc.horizon = 6;
    mc.patch = 5;
    mc.image_rows = 17;
    mc.image_cols = 12;
    mc.conv_channels = {4, 4, 2};
    mc.model_dim = 16;
    mc.depth = 1;
    mc.heads = 2;
    mc.seed = 41;
    nn::GhiForecaster model(mc);
    Rng rng(13);
    std::vector<nn::ForecastSample> data;
    for (int i = 0; i < 6; ++i) {
        nn::ForecastSample s;
        s.image.resize(static_cast<std::size_t>(3) * 17 * 12);
        for (auto& v : s.image) v = static_cast<float>(rng.uniform());
        s.ghi_history.resize(20);
        for (auto& v : s.ghi_history) v = rng.uniform(0.1, 0.9);
        s.targets.resize(6);
        for (auto& v : s.targets) v = rng.uniform(0.1, 0.9);
        data.push_back(std::move(s));
    }
    model.pretrain(data, 2);
    std::vector<std::vector<double>> snapshot;
    for (auto& [name, t] : model.named_parameters()) snapshot.push_back(t.value());
    model.finetune(data, 3);
    std::size_t idx = 0;
    bool head_changed = false;
    for (auto& [name, t] : model.named_parameters()) {
        if (name.rfind("fc_head", 0) == 0) {
            if (t.value() != snapshot[idx]) head_changed = true;
        } else if (t.value() != snapshot[idx]) {
            c.expect(false, "non-head parameter changed: " + name);
        }
        ++idx;
    }
    c.expect(head_changed, "head parameters did not train");
    return report(8, "finetuning leaves every non-head parameter bit-identical", c);
}

int criterion_9() {
    Check c;
    const double got = harness::nrmse({110.0, 190.0}, {100.0, 200.0});
    c.expect(std::abs(got - 0.06325) < 1e-5, "nrmse " + std::to_string(got));
    return report(9, "nRMSE worked example 0.06325 within 1e-5", c);
}

// ---- headline preparation and criteria 10..11 ---------------------------------

struct HeadlineConfig {
    int days = 28;
    int resolution = 256;
    std::vector<std::uint64_t> seeds{101, 202, 303};
    int slice_half_length = 120;
    int slice_band = 3;
    harness::SimExperimentConfig sim;
    harness::GhiExperimentConfig ghi;

    HeadlineConfig() {
        sim.past_window = 39;
        sim.horizon = 60;
        sim.anchor_stride = 12;
        sim.cnn_epochs = 8;
        ghi.history = 60;
        ghi.horizon = 60;
        ghi.image_half_rows = 40;
        ghi.anchor_stride = 12;
        ghi.pretrain_epochs = 10;
        ghi.finetune_epochs = 10;
    }
};

std::vector<harness::SimDay> generate_seed_days(const HeadlineConfig& hc, std::uint64_t seed,
                                                const std::string& mirror_name,
                                                const mirror::MirrorProfile& profile,
                                                const mirror::OpticalConfig& optics) {
    std::vector<harness::SimDay> days;
    const sim::RadialCamera camera(profile, optics);
    for (int d = 0; d < hc.days; ++d) {
        const sim::DayScene scene = sim::randomize_day_scene(seed, d);
        const sim::CloudScene cloud_scene{scene.clouds, scene.sun};
        const double theta_img =
            harness::upwind_image_angle_deg(scene.clouds.wind_x_mps, scene.clouds.wind_y_mps);

        harness::SimDay day;
        day.clear_sky_peak_wm2 = scene.sun.clear_sky_peak_wm2;
        day.ghi.period_s = 30.0;
        std::vector<st::FrameSliceInput> inputs;
        std::vector<sim::SkyFrame> frames;
        const int n_frames = 1081;
        frames.reserve(static_cast<std::size_t>(n_frames));
        for (int i = 0; i < n_frames; ++i) {
            const double t = 30.0 * i;
            frames.push_back(sim::render_frame(camera, cloud_scene, t, hc.resolution, 1,
                                               profile.kind));
            const sim::SkyFrame& f = frames.back();
            day.occluded.push_back(f.occluded ? 1 : 0);
            day.ghi.timestamps_s.push_back(t);
            day.ghi.values_wm2.push_back(f.ghi_wm2);
        }
        harness::SliceOptions so;
        so.half_length = hc.slice_half_length;
        so.band_width = hc.slice_band;
        day.slices = harness::build_day_slices(frames, theta_img, so, 30.0);
        days.push_back(std::move(day));
        std::fprintf(stderr, "  seed %llu %s day %d/%d\n",
                     static_cast<unsigned long long>(seed), mirror_name.c_str(), d + 1, hc.days);
    }
    return days;
}

int prepare_headline(const std::string& cache, int days_override, int seeds_override) {
    HeadlineConfig hc;
    if (days_override > 0) hc.days = days_override;
    if (seeds_override > 0)
        hc.seeds.resize(static_cast<std::size_t>(std::min<std::size_t>(
            static_cast<std::size_t>(seeds_override), hc.seeds.size())));
    fs::create_directories(cache);

    const mirror::OpticalConfig optics = rig_optics();
    const auto designed = mirror::solve_profile(optics);
    const auto hemi = mirror::hemisphere_profile(mirror::matched_hemisphere_radius(optics),
                                                 optics.camera_height_m);

    std::vector<harness::HorizonTable> seed_tables;
    for (std::size_t si = 0; si < hc.seeds.size(); ++si) {
        const std::uint64_t seed = hc.seeds[si];
        harness::HorizonTable merged;
        for (const std::string name : {"designed", "hemisphere"}) {
            const auto& profile = name == "designed" ? designed : hemi;
            auto days = generate_seed_days(hc, seed, name, profile, optics);
            harness::SimExperimentConfig sc = hc.sim;
            sc.seed = seed;
            const auto result = harness::run_sim_experiment(days, name, sc);
            merged.period_s = result.table.period_s;
            merged.horizon = result.table.horizon;
            for (const auto& row : result.table.rows) merged.rows.push_back(row);

            if (si == 0 && name == "designed") {
                harness::GhiExperimentConfig gc = hc.ghi;
                gc.seed = seed;
                gc.model.seed = seed;
                const auto ghi = harness::run_ghi_experiment(days, name, gc);
                harness::save_horizon_table(ghi.table, (fs::path(cache) / "ghi_nrmse.csv").string());
                harness::write_horizon_chart_svg(ghi.table,
                                                 (fs::path(cache) / "ghi_nrmse.svg").string(),
                                                 "nRMSE");
            }
        }
        char name[64];
        std::snprintf(name, sizeof(name), "auc_seed%llu.csv", static_cast<unsigned long long>(seed));
        harness::save_horizon_table(merged, (fs::path(cache) / name).string());
        seed_tables.push_back(std::move(merged));
    }

    // Mean AUC across seeds: a cell survives only if present in every seed.
    harness::HorizonTable mean = seed_tables.front();
    for (auto& row : mean.rows) {
        for (std::size_t k = 0; k < row.cells.size(); ++k) {
            double acc = 0.0;
            long count = 0;
            bool all = true;
            for (const auto& table : seed_tables) {
                const harness::HorizonRow* r = table.find(row.method, row.mirror);
                if (!r || !r->cells[k]) {
                    all = false;
                    break;
                }
                acc += r->cells[k]->value;
                count += r->cells[k]->count;
            }
            if (all)
                row.cells[k] = harness::HorizonCell{acc / static_cast<double>(seed_tables.size()),
                                                    count};
            else
                row.cells[k].reset();
        }
    }
    harness::save_horizon_table(mean, (fs::path(cache) / "headline_auc_mean.csv").string());
    harness::write_horizon_chart_svg(mean, (fs::path(cache) / "headline_auc_mean.svg").string(),
                                     "AUC");
    std::printf("[DONE] headline tables written to %s\n", cache.c_str());
    return 0;
}

// Longest horizon prefix holding AUC >= 0.9 (a "confident window" in frames).
int confident_window(const harness::HorizonRow& row) {
    int k = 0;
    for (const auto& cell : row.cells) {
        if (!cell || cell->value < 0.9) break;
        ++k;
    }
    return k;
}

int criterion_10(const std::string& cache) {
    Check c;
    const auto table =
        harness::load_horizon_table((fs::path(cache) / "headline_auc_mean.csv").string());
    const auto* back_d = table.find("backprojection", "designed");
    const auto* back_h = table.find("backprojection", "hemisphere");
    const auto* cnn_d = table.find("cnn-mlp", "designed");
    const auto* cnn_h = table.find("cnn-mlp", "hemisphere");
    c.expect(back_d && back_h && cnn_d && cnn_h, "missing table rows");
    if (!c.ok) return report(10, "headline synthetic ordering", c);

    const int wb_d = confident_window(*back_d);
    const int wb_h = confident_window(*back_h);
    const int wc_d = confident_window(*cnn_d);
    const int wc_h = confident_window(*cnn_h);
    std::printf("  confident windows (frames): backprojection %d vs %d, cnn %d vs %d\n", wb_d, wb_h,
                wc_d, wc_h);
    c.expect(wb_h > 0 && wc_h > 0, "hemisphere never confident; ratio undefined");
    if (wb_h > 0) c.expect(wb_d >= 3 * wb_h, "backprojection window ratio < 3");
    if (wc_h > 0) c.expect(wc_d >= 3 * wc_h, "cnn window ratio < 3");

    // Learned >= back-projection at every horizon beyond 5 minutes on the
    // designed mirror (mean over seeds).
    const int k5 = static_cast<int>(std::ceil(300.0 / table.period_s)) - 1;
    for (std::size_t k = static_cast<std::size_t>(k5); k < cnn_d->cells.size(); ++k) {
        if (!cnn_d->cells[k] || !back_d->cells[k]) continue;
        if (cnn_d->cells[k]->value + 1e-9 < back_d->cells[k]->value) {
            c.expect(false, "cnn below backprojection at horizon " +
                                std::to_string(table.horizon_seconds(static_cast<int>(k))) + " s");
            break;
        }
    }
    return report(10, "designed confident window >= 3x hemisphere; learned >= backprojection", c);
}

int criterion_11(const std::string& cache) {
    Check c;
    const auto table = harness::load_horizon_table((fs::path(cache) / "ghi_nrmse.csv").string());
    const auto* persistence = table.find("persistence", "designed");
    const auto* transformer = table.find("transformer", "designed");
    c.expect(persistence && transformer, "missing table rows");
    if (!c.ok) return report(11, "GHI ordering", c);

    const int k5 = static_cast<int>(std::ceil(300.0 / table.period_s)) - 1;
    for (std::size_t k = static_cast<std::size_t>(k5); k < transformer->cells.size(); ++k) {
        if (!transformer->cells[k] || !persistence->cells[k]) continue;
        if (transformer->cells[k]->value >= persistence->cells[k]->value) {
            c.expect(false, "transformer not below persistence at horizon " +
                                std::to_string(table.horizon_seconds(static_cast<int>(k))) + " s");
            break;
        }
    }

    std::vector<double> horizons, values;
    for (std::size_t k = 0; k < persistence->cells.size(); ++k) {
        if (!persistence->cells[k]) continue;
        horizons.push_back(static_cast<double>(k));
        values.push_back(persistence->cells[k]->value);
    }
    const double rho = oracles::spearman_rho(horizons, values);
    std::printf("  persistence nRMSE Spearman rho over horizons: %.4f\n", rho);
    c.expect(rho > 0.9, "Spearman rho " + std::to_string(rho));
    return report(11, "transformer beats persistence beyond 5 min; persistence rises monotonically",
                  c);
}

int criterion_12(const std::string& tool) {
    Check c;
    c.expect(!tool.empty() && fs::exists(tool), "CLI tool path missing");
    if (!c.ok) return report(12, "CLI determinism", c);

    const fs::path tmp = fs::temp_directory_path() / "skylens_accept12";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    auto run = [&](const std::string& args) {
        const std::string cmd = tool + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    auto hash_of = [](const fs::path& manifest) {
        std::ifstream f(manifest);
        nlohmann::json j;
        f >> j;
        return j.value("content_hash", std::string());
    };

    const std::string p1 = (tmp / "p1.csv").string();
    const std::string p2 = (tmp / "p2.csv").string();
    c.expect(run("design-mirror --out " + p1 + " --seed 5") == 0, "design run 1 failed");
    c.expect(run("design-mirror --out " + p2 + " --seed 5") == 0, "design run 2 failed");
    if (c.ok) {
        const auto h1 = hash_of(p1 + ".run.json");
        const auto h2 = hash_of(p2 + ".run.json");
        c.expect(!h1.empty() && h1 == h2, "design-mirror hashes differ");
    }

    const std::string dsa = (tmp / "dsA").string();
    const std::string dsb = (tmp / "dsB").string();
    const std::string render_args =
        "render-dataset --days 1 --mirror designed --resolution 64 --day-hours 1 "
        "--slice-half-length 24 --seed 9 --out ";
    c.expect(run(render_args + dsa) == 0, "render run 1 failed");
    c.expect(run(render_args + dsb) == 0, "render run 2 failed");
    if (c.ok) {
        const auto h1 = hash_of(fs::path(dsa) / "run.json");
        const auto h2 = hash_of(fs::path(dsb) / "run.json");
        c.expect(!h1.empty() && h1 == h2, "render-dataset hashes differ");
    }
    fs::remove_all(tmp);
    return report(12, "repeated CLI runs with one seed reproduce identical output hashes", c);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr,
                     "usage: skylens_acceptance <1..12|all|prepare-headline> [--cache DIR] "
                     "[--tool PATH] [--days N] [--seeds N]\n");
        return 2;
    }
    std::string mode = argv[1];
    std::string cache = "acceptance_cache";
    std::string tool;
    int days = 0, seeds = 0;
    for (int i = 2; i + 1 < argc; i += 2) {
        const std::string key = argv[i];
        const std::string value = argv[i + 1];
        if (key == "--cache") cache = value;
        else if (key == "--tool") tool = value;
        else if (key == "--days") days = std::stoi(value);
        else if (key == "--seeds") seeds = std::stoi(value);
    }

    try {
        if (mode == "prepare-headline") return prepare_headline(cache, days, seeds);
        if (mode == "1") return criterion_1();
        if (mode == "2") return criterion_2();
        if (mode == "3") return criterion_3();
        if (mode == "4") return criterion_4();
        if (mode == "5") return criterion_5();
        if (mode == "6") return criterion_6();
        if (mode == "7") return criterion_7();
        if (mode == "8") return criterion_8();
        if (mode == "9") return criterion_9();
        if (mode == "10") return criterion_10(cache);
        if (mode == "11") return criterion_11(cache);
        if (mode == "12") return criterion_12(tool);
        if (mode == "all") {
            int rc = 0;
            rc |= criterion_1();
            rc |= criterion_2();
            rc |= criterion_3();
            rc |= criterion_4();
            rc |= criterion_5();
            rc |= criterion_6();
            rc |= criterion_7();
            rc |= criterion_8();
            rc |= criterion_9();
            rc |= criterion_10(cache);
            rc |= criterion_11(cache);
            rc |= criterion_12(tool);
            return rc;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "unknown mode: %s\n", mode.c_str());
    return 2;
}
