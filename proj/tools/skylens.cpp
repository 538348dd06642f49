#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skylens/csv.hpp"
#include "skylens/dataset.hpp"
#include "skylens/errors.hpp"
#include "skylens/experiment.hpp"
#include "skylens/metrics.hpp"
#include "skylens/mirror.hpp"
#include "skylens/models.hpp"
#include "skylens/pipeline.hpp"
#include "skylens/preprocess.hpp"
#include "skylens/render.hpp"
#include "skylens/run_manifest.hpp"
#include "skylens/spacetime.hpp"

namespace fs = std::filesystem;
using namespace skylens;

namespace {

std::string default_data_dir() {
    const char* env = std::getenv("SKYLENS_DATA_DIR");
    return env ? env : "data";
}

// key = value lines, '#' comments.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::map<std::string, std::string> out;
    if (path.empty()) return out;
    std::ifstream f(path);
    if (!f) throw IoError("open for read: " + path);
    std::string line;
    while (std::getline(f, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) out[key] = value;
    }
    return out;
}

double cfg_get(const std::map<std::string, std::string>& cfg, const std::string& key,
               double fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : std::stod(it->second);
}

mirror::OpticalConfig make_optics(double camera_fov_deg, double target_fov_deg, double height_m,
                                  double focal_mm) {
    mirror::OpticalConfig cfg;
    cfg.focal_length_mm = focal_mm;
    cfg.sensor_half_width_mm = focal_mm * std::tan(deg_to_rad(0.5 * camera_fov_deg));
    cfg.camera_height_m = height_m;
    cfg.target_half_fov_deg = 0.5 * target_fov_deg;
    return cfg;
}

struct MirrorSet {
    mirror::MirrorProfile designed;
    mirror::MirrorProfile hemisphere;
};

MirrorSet build_mirrors(const mirror::OpticalConfig& optics) {
    MirrorSet set;
    set.designed = mirror::solve_profile(optics);
    set.hemisphere =
        mirror::hemisphere_profile(mirror::matched_hemisphere_radius(optics), optics.camera_height_m);
    return set;
}

std::vector<std::string> mirror_names(const std::string& flag) {
    if (flag == "both") return {"designed", "hemisphere"};
    if (flag == "designed" || flag == "hemisphere") return {flag};
    throw std::invalid_argument("unknown mirror selection: " + flag);
}

// ---- subcommand: design-mirror ---------------------------------------------

struct DesignArgs {
    double target_fov = 170.0;
    double camera_fov = 3.58;
    double height = 1.0;
    double focal = 200.0;
    double step = 1e-4;
    std::string kind = "designed";
    std::string out = "profile.csv";
    std::uint64_t seed = 1;
};

int run_design(const DesignArgs& a) {
    const mirror::OpticalConfig optics = make_optics(a.camera_fov, a.target_fov, a.height, a.focal);
    mirror::MirrorProfile profile;
    if (a.kind == "designed") {
        profile = mirror::solve_profile(optics, a.step);
    } else if (a.kind == "hemisphere") {
        profile = mirror::hemisphere_profile(mirror::matched_hemisphere_radius(optics),
                                             optics.camera_height_m);
    } else {
        throw std::invalid_argument("unknown mirror kind: " + a.kind);
    }
    const mirror::ConicFit fit = mirror::fit_conic_and_export(profile, a.out);
    std::cout << "profile: kind=" << mirror::to_string(profile.kind)
              << " samples=" << profile.samples.size() << " rim_radius_m=" << profile.rim_radius_m
              << "\n";
    if (fit.degenerate)
        std::cout << "conic fit: degenerate (planar), rms_residual_m=" << fit.rms_residual_m << "\n";
    else
        std::cout << "conic fit: eccentricity=" << fit.eccentricity
                  << " rms_residual_m=" << fit.rms_residual_m << "\n";

    harness::RunManifest manifest;
    manifest.command = "design-mirror";
    manifest.seed = a.seed;
    manifest.config = {{"target_fov", std::to_string(a.target_fov)},
                       {"camera_fov", std::to_string(a.camera_fov)},
                       {"height", std::to_string(a.height)},
                       {"focal", std::to_string(a.focal)},
                       {"step", std::to_string(a.step)},
                       {"kind", a.kind}};
    manifest.outputs = {a.out};
    harness::write_run_manifest(manifest, a.out + ".run.json");
    return 0;
}

// ---- subcommand: render-dataset ---------------------------------------------

struct RenderArgs {
    int days = 28;
    std::string mirror_flag = "both";
    std::uint64_t seed = 7;
    std::string out = default_data_dir();
    int resolution = 256;
    int supersample = 1;
    double period_s = 30.0;
    double day_hours = 9.0;
    std::string store = "none";  // none|frames|previews|both
    bool slices = true;
    int slice_half_length = 120;
    int slice_band = 3;
    double camera_fov = 3.58, target_fov = 170.0, height = 1.0, focal = 200.0;
};

int run_render(const RenderArgs& a) {
    if (a.days < 1) throw std::invalid_argument("need at least one day");
    const mirror::OpticalConfig optics = make_optics(a.camera_fov, a.target_fov, a.height, a.focal);
    const MirrorSet mirrors = build_mirrors(optics);
    const auto names = mirror_names(a.mirror_flag);

    fs::create_directories(a.out);
    std::vector<std::string> hashed_outputs;

    for (int d = 0; d < a.days; ++d) {
        char tag[16];
        std::snprintf(tag, sizeof(tag), "day%02d", d + 1);
        const sim::DayScene scene = sim::randomize_day_scene(a.seed, d);

        sim::SimOptions opt;
        opt.resolution = a.resolution;
        opt.supersample = a.supersample;
        opt.period_s = a.period_s;
        opt.day_length_s = a.day_hours * 3600.0;
        opt.store_frames = a.store == "frames" || a.store == "both";
        opt.store_previews = a.store == "previews" || a.store == "both";
        opt.out_dir = a.out;
        opt.day_tag = tag;

        const fs::path day_dir = fs::path(a.out) / tag;
        fs::create_directories(day_dir);

        std::vector<const mirror::MirrorProfile*> profiles;
        for (const auto& n : names)
            profiles.push_back(n == "designed" ? &mirrors.designed : &mirrors.hemisphere);

        // Slice stacks are built frame-by-frame through the callback, so
        // rasters never need to be stored for the experiment path.
        const double theta_img =
            harness::upwind_image_angle_deg(scene.clouds.wind_x_mps, scene.clouds.wind_y_mps);
        std::map<mirror::MirrorKind, std::vector<st::FrameSliceInput>> slice_inputs;
        std::map<mirror::MirrorKind, std::vector<sim::SkyFrame>> kept_frames;
        sim::FrameCallback callback;
        if (a.slices) {
            callback = [&](mirror::MirrorKind kind, int, const sim::SkyFrame& frame) {
                kept_frames[kind].push_back(frame);  // frames are small at desk scale
            };
        }
        const auto manifests = sim::simulate_day(profiles, optics, scene, opt, callback);

        for (std::size_t m = 0; m < manifests.size(); ++m) {
            const std::string csv = (day_dir / (names[m] + ".csv")).string();
            sim::save_manifest(manifests[m], csv);
            hashed_outputs.push_back(csv);
            if (a.slices) {
                const auto kind = manifests[m].mirror_kind;
                harness::SliceOptions so;
                so.half_length = a.slice_half_length;
                so.band_width = a.slice_band;
                const st::SpaceTimeImage stack =
                    harness::build_day_slices(kept_frames[kind], theta_img, so, a.period_s);
                const std::string base = (day_dir / (names[m] + ".slices")).string();
                st::save_spacetime(stack, base);
                hashed_outputs.push_back(base + ".pfm");
                kept_frames[kind].clear();
            }
        }
        std::cout << tag << ": rendered " << manifests[0].frames.size() << " frames x "
                  << names.size() << " mirror(s)\n";
    }

    harness::RunManifest manifest;
    manifest.command = "render-dataset";
    manifest.seed = a.seed;
    manifest.config = {{"days", std::to_string(a.days)},
                       {"mirror", a.mirror_flag},
                       {"resolution", std::to_string(a.resolution)},
                       {"supersample", std::to_string(a.supersample)},
                       {"period_s", std::to_string(a.period_s)},
                       {"day_hours", std::to_string(a.day_hours)},
                       {"store", a.store},
                       {"slices", a.slices ? "1" : "0"},
                       {"slice_half_length", std::to_string(a.slice_half_length)},
                       {"slice_band", std::to_string(a.slice_band)}};
    manifest.outputs = hashed_outputs;
    harness::write_run_manifest(manifest, (fs::path(a.out) / "run.json").string());
    return 0;
}

// ---- subcommand: preprocess --------------------------------------------------

struct PreprocessArgs {
    std::string manifest;
    std::string out;
    int degree = 4;
    double saturation = 0.98;
    double exposure_ev = -4.0;
    int min_blob_px = 1;
    int flow_pairs = 12;
    double smoothness = 50.0;
    int median_window = 21;
    std::string mask_path;  // optional user-supplied static mask (PGM)
    std::uint64_t seed = 1;
};

int run_preprocess(const PreprocessArgs& a) {
    const sim::DatasetManifest manifest = sim::load_manifest(a.manifest);
    manifest.validate();
    if (manifest.frames.empty()) throw std::invalid_argument("manifest has no frames");
    for (const auto& f : manifest.frames)
        if (f.path.empty())
            throw std::invalid_argument(
                "preprocess needs stored frames; re-render with --store frames");

    fs::create_directories(a.out);

    // Sun detections from the short exposure of each frame.
    std::vector<prep::SunDetection> detections;
    CsvTable det_csv;
    det_csv.header = {"timestamp_s", "x", "y"};
    std::optional<std::vector<std::uint8_t>> static_mask;
    if (!a.mask_path.empty()) {
        int mw = 0, mh = 0;
        static_mask = read_pgm_mask(a.mask_path, mw, mh);
    }

    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        const Image hdr = read_pfm(manifest.frame_path(i));
        if (!static_mask) static_mask = harness::derive_static_mask(hdr);
        const sim::ExposureStack stack = sim::bracket_exposures(hdr, {a.exposure_ev});
        const auto det = prep::detect_sun(stack.ldr[0], a.saturation, a.min_blob_px);
        if (det) {
            detections.push_back({manifest.frames[i].timestamp_s, det->x, det->y});
            det_csv.rows.push_back({format_double(manifest.frames[i].timestamp_s, 10),
                                    format_double(det->x, 8), format_double(det->y, 8)});
        }
    }
    write_csv(det_csv, (fs::path(a.out) / "detections.csv").string());
    if (detections.size() < static_cast<std::size_t>(a.degree + 1))
        throw EstimationError("too few sun detections to fit a track");

    prep::RansacParams ransac;
    ransac.seed = a.seed;
    const prep::SunTrack track = prep::fit_sun_track(detections, a.degree, ransac);
    prep::save_sun_track_csv(track, (fs::path(a.out) / "sun_track.csv").string());

    // Optical flow on evenly spaced consecutive pairs.
    std::vector<prep::FlowField> flows;
    const std::size_t stride =
        std::max<std::size_t>(1, manifest.frames.size() / static_cast<std::size_t>(a.flow_pairs + 1));
    prep::FlowParams fp;
    fp.smoothness = a.smoothness;
    for (std::size_t i = 0; i + 1 < manifest.frames.size() && flows.size() < static_cast<std::size_t>(a.flow_pairs);
         i += stride) {
        const Image fa = read_pfm(manifest.frame_path(i));
        const Image fb = read_pfm(manifest.frame_path(i + 1));
        flows.push_back(prep::estimate_flow(fa, fb, &*static_mask, fp));
    }
    const prep::WindEstimate wind = prep::estimate_wind(flows, &*static_mask, a.median_window);
    prep::save_wind_csv(wind, (fs::path(a.out) / "wind.csv").string());

    std::cout << "sun detections: " << detections.size() << "/" << manifest.frames.size()
              << " frames, inlier fraction " << track.inlier_fraction << "\n";
    std::cout << "wind: direction " << wind.direction_deg << " deg, speed "
              << wind.speed_px_per_frame << " px/frame, confidence " << wind.confidence << "\n";

    harness::RunManifest rm;
    rm.command = "preprocess";
    rm.seed = a.seed;
    rm.config = {{"degree", std::to_string(a.degree)},
                 {"saturation", std::to_string(a.saturation)},
                 {"exposure_ev", std::to_string(a.exposure_ev)},
                 {"flow_pairs", std::to_string(a.flow_pairs)},
                 {"smoothness", std::to_string(a.smoothness)},
                 {"median_window", std::to_string(a.median_window)}};
    rm.inputs = {a.manifest};
    rm.outputs = {(fs::path(a.out) / "detections.csv").string(),
                  (fs::path(a.out) / "sun_track.csv").string(),
                  (fs::path(a.out) / "wind.csv").string()};
    harness::write_run_manifest(rm, (fs::path(a.out) / "run.json").string());
    return 0;
}

// ---- subcommand: slice --------------------------------------------------------

struct SliceArgs {
    std::string manifest;
    std::string out;  // base path for the spacetime files
    std::string theta_sweep = "60:85:1";
    std::string track_csv;  // sun track; falls back to manifest ground truth
    std::string wind_csv;   // wind estimate; falls back to manifest wind
    double theta_image = -1.0;
    int half_length = 120;
    int band = 3;
    int anchor = -1;    // default: middle of the day
    int past_window = 47;
    int horizon = 60;
    double threshold = 0.2;
    bool predict = false;
    std::uint64_t seed = 1;
};

std::tuple<double, double, double> parse_sweep(const std::string& s) {
    const auto c1 = s.find(':');
    const auto c2 = s.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw std::invalid_argument("theta sweep must look like start:stop:step");
    return {std::stod(s.substr(0, c1)), std::stod(s.substr(c1 + 1, c2 - c1 - 1)),
            std::stod(s.substr(c2 + 1))};
}

int run_slice(const SliceArgs& a) {
    const sim::DatasetManifest manifest = sim::load_manifest(a.manifest);
    manifest.validate();
    for (const auto& f : manifest.frames)
        if (f.path.empty())
            throw std::invalid_argument("slice needs stored frames; re-render with --store frames");

    double theta_img;
    if (a.theta_image >= 0.0) {
        theta_img = a.theta_image;
    } else if (!a.wind_csv.empty()) {
        const prep::WindEstimate wind = prep::load_wind_csv(a.wind_csv);
        if (!wind.estimable) throw EstimationError("wind estimate is not usable");
        theta_img = wrap_degrees(wind.direction_deg + 180.0);  // slice points upwind
    } else {
        theta_img = harness::upwind_image_angle_deg(manifest.wind_x_mps, manifest.wind_y_mps);
    }

    std::optional<prep::SunTrack> track;
    if (!a.track_csv.empty()) track = prep::load_sun_track_csv(a.track_csv);

    std::vector<Image> images(manifest.frames.size());
    std::vector<st::FrameSliceInput> inputs(manifest.frames.size());
    std::vector<std::vector<std::uint8_t>> masks(manifest.frames.size());
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        images[i] = read_pfm(manifest.frame_path(i));
        masks[i] = harness::derive_static_mask(images[i]);
        for (auto& m : masks[i]) m = m ? 0 : 1;  // invert: slice wants sky validity
        inputs[i].image = &images[i];
        inputs[i].sky_mask = &masks[i];
        inputs[i].timestamp_s = manifest.frames[i].timestamp_s;
        if (track) {
            const Vec2 p = track->eval(manifest.frames[i].timestamp_s);
            if (images[i].in_bounds(p.x - 0.5, p.y - 0.5)) inputs[i].sun_pixel = p;
        } else {
            inputs[i].sun_pixel = manifest.frames[i].sun_pixel;
        }
    }
    const st::SpaceTimeImage stack =
        st::build_spacetime(inputs, theta_img, a.half_length, a.band, manifest.period_s);
    st::save_spacetime(stack, a.out);
    std::cout << "spacetime: " << stack.rows() << " x " << stack.cols() << ", theta_image "
              << theta_img << " deg\n";

    std::vector<std::string> outputs = {a.out + ".pfm", a.out + ".mask.pgm", a.out + ".csv"};

    if (a.predict) {
        const auto [t0, t1, dt] = parse_sweep(a.theta_sweep);
        st::ThetaSweepParams sweep;
        sweep.start_deg = t0;
        sweep.stop_deg = t1;
        sweep.step_deg = dt;
        const int anchor = a.anchor >= 0 ? a.anchor : stack.cols() / 2;
        const st::BackprojectionResult result =
            st::backproject_predict(stack, anchor, a.past_window, a.horizon, a.threshold, sweep);
        CsvTable t;
        t.header = {"horizon_s", "trace", "occluded"};
        for (int k = 1; k <= a.horizon; ++k) {
            t.rows.push_back({std::to_string(static_cast<int>(manifest.period_s) * k),
                              format_double(result.horizon_score[static_cast<std::size_t>(k - 1)], 8),
                              result.occluded[static_cast<std::size_t>(k - 1)] ? "1" : "0"});
        }
        const std::string pred_path = a.out + ".predictions.csv";
        write_csv(t, pred_path);
        outputs.push_back(pred_path);
        std::cout << "backprojection at anchor " << anchor << ": theta " << result.theta_deg
                  << " deg\n";
    }

    harness::RunManifest rm;
    rm.command = "slice";
    rm.seed = a.seed;
    rm.config = {{"theta_sweep", a.theta_sweep},
                 {"half_length", std::to_string(a.half_length)},
                 {"band", std::to_string(a.band)},
                 {"theta_image", format_double(theta_img, 8)},
                 {"threshold", format_double(a.threshold, 8)}};
    rm.inputs = {a.manifest};
    rm.outputs = outputs;
    harness::write_run_manifest(rm, a.out + ".run.json");
    return 0;
}

// ---- subcommand: train ---------------------------------------------------------

struct TrainArgs {
    std::string task;  // occlusion | ghi
    std::string config_path;
    std::string data = default_data_dir();
    std::string mirror = "designed";
    std::string out = "model";
    std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a) {
    const auto cfg = parse_config_file(a.config_path);
    const auto days = harness::load_sim_days(a.data, a.mirror);
    const harness::DaySplit split = harness::split_days(
        static_cast<int>(days.size()), cfg_get(cfg, "train_fraction", 0.75), a.seed);
    fs::create_directories(fs::path(a.out).parent_path().empty() ? "." : fs::path(a.out).parent_path());

    CsvTable log;
    log.header = {"epoch", "loss"};
    std::vector<std::string> outputs;

    if (a.task == "occlusion") {
        const int past = static_cast<int>(cfg_get(cfg, "past_window", 39));
        const int horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        const int stride = static_cast<int>(cfg_get(cfg, "anchor_stride", 12));
        st::ThetaSweepParams sweep;

        std::vector<nn::ForecastSample> samples;
        for (const int di : split.train) {
            const harness::SimDay& day = days[static_cast<std::size_t>(di)];
            for (int anchor = past; anchor + horizon < day.slices.cols(); anchor += stride) {
                double theta;
                try {
                    theta = st::optimal_theta(day.slices, anchor, past, horizon, sweep);
                } catch (const EstimationError&) {
                    continue;
                }
                auto s = harness::make_occlusion_sample(day, anchor, past, horizon, theta);
                if (s) samples.push_back(std::move(*s));
            }
        }
        if (samples.empty()) throw EstimationError("no usable training anchors");

        nn::OcclusionModelConfig mc;
        mc.window_rows = past + 1;
        mc.window_cols = past + horizon + 1;
        mc.horizon = horizon;
        mc.epochs = static_cast<int>(cfg_get(cfg, "epochs", 8));
        mc.learning_rate = cfg_get(cfg, "learning_rate", 1e-3);
        mc.batch_size = static_cast<int>(cfg_get(cfg, "batch", 16));
        mc.seed = a.seed;
        nn::CnnMlpOcclusion model(mc);
        const auto report = model.train(samples);
        if (report.single_class_warning)
            std::cerr << "warning: single-class training labels; the model degenerates to the prior\n";
        model.save(a.out);
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
            log.rows.push_back({std::to_string(e), format_double(report.epoch_loss[e], 8)});
        outputs = {a.out + ".bin", a.out + ".index.csv"};
        std::cout << "trained occlusion model on " << samples.size() << " samples; final loss "
                  << report.epoch_loss.back() << "\n";
    } else if (a.task == "ghi") {
        const int history = static_cast<int>(cfg_get(cfg, "history", 60));
        const int horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        const int half_rows = static_cast<int>(cfg_get(cfg, "image_half_rows", 40));
        const int stride = static_cast<int>(cfg_get(cfg, "anchor_stride", 12));

        std::vector<nn::ForecastSample> samples;
        for (const int di : split.train) {
            const harness::SimDay& day = days[static_cast<std::size_t>(di)];
            for (int anchor = history - 1; anchor + horizon < day.slices.cols(); anchor += stride) {
                auto s = harness::make_ghi_sample(day, anchor, history, horizon, half_rows);
                if (s) samples.push_back(std::move(*s));
            }
        }
        if (samples.empty()) throw EstimationError("no usable training anchors");

        nn::GhiModelConfig mc;
        mc.history = history;
        mc.horizon = horizon;
        mc.image_rows = 2 * half_rows + 1;
        mc.image_cols = history;
        mc.model_dim = static_cast<int>(cfg_get(cfg, "model_dim", 64));
        mc.depth = static_cast<int>(cfg_get(cfg, "depth", 2));
        mc.heads = static_cast<int>(cfg_get(cfg, "heads", 4));
        mc.patch = static_cast<int>(cfg_get(cfg, "patch", 5));
        mc.dropout = cfg_get(cfg, "dropout", 0.1);
        mc.mask_ratio = cfg_get(cfg, "mask_ratio", 0.25);
        mc.lr_pretrain = cfg_get(cfg, "lr_pretrain", 1e-3);
        mc.lr_finetune = cfg_get(cfg, "lr_finetune", 1e-3);
        mc.batch_size = static_cast<int>(cfg_get(cfg, "batch", 16));
        mc.seed = a.seed;
        nn::GhiForecaster model(mc);
        const auto pre = model.pretrain(samples, static_cast<int>(cfg_get(cfg, "pretrain_epochs", 10)));
        const auto fin = model.finetune(samples, static_cast<int>(cfg_get(cfg, "finetune_epochs", 10)));
        model.save(a.out);
        for (std::size_t e = 0; e < pre.size(); ++e)
            log.rows.push_back({"pre" + std::to_string(e), format_double(pre[e], 8)});
        for (std::size_t e = 0; e < fin.size(); ++e)
            log.rows.push_back({"fit" + std::to_string(e), format_double(fin[e], 8)});
        outputs = {a.out + ".bin", a.out + ".index.csv"};
        std::cout << "trained GHI forecaster on " << samples.size() << " samples; final losses "
                  << pre.back() << " / " << fin.back() << "\n";
    } else {
        throw std::invalid_argument("unknown task: " + a.task);
    }

    const std::string log_path = a.out + ".train_log.csv";
    write_csv(log, log_path);
    outputs.push_back(log_path);

    harness::RunManifest rm;
    rm.command = "train";
    rm.seed = a.seed;
    rm.config = cfg;
    rm.config["task"] = a.task;
    rm.config["mirror"] = a.mirror;
    rm.inputs = {a.data};
    rm.outputs = outputs;
    harness::write_run_manifest(rm, a.out + ".run.json");
    return 0;
}

// ---- subcommand: evaluate -------------------------------------------------------

struct EvaluateArgs {
    std::string task = "occlusion";
    std::string data = default_data_dir();
    std::string mirror_flag = "both";
    std::string out = "results";
    std::string config_path;
    std::uint64_t seed = 1;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto cfg = parse_config_file(a.config_path);
    fs::create_directories(a.out);
    harness::HorizonTable merged;
    std::vector<std::string> outputs;

    if (a.task == "occlusion") {
        harness::SimExperimentConfig ec;
        ec.past_window = static_cast<int>(cfg_get(cfg, "past_window", 39));
        ec.horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        ec.anchor_stride = static_cast<int>(cfg_get(cfg, "anchor_stride", 12));
        ec.train_fraction = cfg_get(cfg, "train_fraction", 0.75);
        ec.cnn_epochs = static_cast<int>(cfg_get(cfg, "epochs", 8));
        ec.cnn_learning_rate = cfg_get(cfg, "learning_rate", 1e-3);
        ec.cnn_batch = static_cast<int>(cfg_get(cfg, "batch", 16));
        ec.seed = a.seed;
        for (const auto& name : mirror_names(a.mirror_flag)) {
            const auto days = harness::load_sim_days(a.data, name);
            const auto result = harness::run_sim_experiment(days, name, ec);
            merged.period_s = result.table.period_s;
            merged.horizon = result.table.horizon;
            for (const auto& row : result.table.rows) merged.rows.push_back(row);
            std::cout << name << ": threshold " << result.threshold << ", "
                      << result.split.train.size() << " train / " << result.split.test.size()
                      << " test days\n";
        }
        const std::string csv = (fs::path(a.out) / "occlusion_auc.csv").string();
        const std::string svg = (fs::path(a.out) / "occlusion_auc.svg").string();
        harness::save_horizon_table(merged, csv);
        harness::write_horizon_chart_svg(merged, svg, "AUC");
        outputs = {csv, svg};
    } else if (a.task == "ghi") {
        harness::GhiExperimentConfig gc;
        gc.history = static_cast<int>(cfg_get(cfg, "history", 60));
        gc.horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        gc.image_half_rows = static_cast<int>(cfg_get(cfg, "image_half_rows", 40));
        gc.anchor_stride = static_cast<int>(cfg_get(cfg, "anchor_stride", 12));
        gc.train_fraction = cfg_get(cfg, "train_fraction", 0.75);
        gc.pretrain_epochs = static_cast<int>(cfg_get(cfg, "pretrain_epochs", 10));
        gc.finetune_epochs = static_cast<int>(cfg_get(cfg, "finetune_epochs", 10));
        gc.seed = a.seed;
        gc.model.model_dim = static_cast<int>(cfg_get(cfg, "model_dim", 64));
        gc.model.depth = static_cast<int>(cfg_get(cfg, "depth", 2));
        gc.model.heads = static_cast<int>(cfg_get(cfg, "heads", 4));
        gc.model.patch = static_cast<int>(cfg_get(cfg, "patch", 5));
        gc.model.dropout = cfg_get(cfg, "dropout", 0.1);
        gc.model.mask_ratio = cfg_get(cfg, "mask_ratio", 0.25);
        gc.model.seed = a.seed;
        for (const auto& name : mirror_names(a.mirror_flag)) {
            const auto days = harness::load_sim_days(a.data, name);
            const auto result = harness::run_ghi_experiment(days, name, gc);
            merged.period_s = result.table.period_s;
            merged.horizon = result.table.horizon;
            for (const auto& row : result.table.rows) merged.rows.push_back(row);
        }
        const std::string csv = (fs::path(a.out) / "ghi_nrmse.csv").string();
        const std::string svg = (fs::path(a.out) / "ghi_nrmse.svg").string();
        harness::save_horizon_table(merged, csv);
        harness::write_horizon_chart_svg(merged, svg, "nRMSE");
        outputs = {csv, svg};
    } else {
        throw std::invalid_argument("unknown task: " + a.task);
    }

    harness::RunManifest rm;
    rm.command = "evaluate";
    rm.seed = a.seed;
    rm.config = cfg;
    rm.config["task"] = a.task;
    rm.config["mirrors"] = a.mirror_flag;
    rm.inputs = {a.data};
    rm.outputs = outputs;
    harness::write_run_manifest(rm, (fs::path(a.out) / ("run_" + a.task + ".json")).string());
    return 0;
}

// ---- subcommand: forecast --------------------------------------------------------

struct ForecastArgs {
    std::string task = "occlusion";
    std::string model;
    std::string data = default_data_dir();
    std::string mirror = "designed";
    std::string config_path;
    int day = 1;
    int anchor = -1;
    std::string out = "forecast.csv";
    std::uint64_t seed = 1;
};

int run_forecast(const ForecastArgs& a) {
    const auto cfg = parse_config_file(a.config_path);
    const auto day_dirs = harness::list_day_directories(a.data);
    if (a.day < 1 || a.day > static_cast<int>(day_dirs.size()))
        throw std::invalid_argument("day index out of range");
    const harness::SimDay day =
        harness::load_sim_day(day_dirs[static_cast<std::size_t>(a.day - 1)], a.mirror);

    CsvTable t;
    t.header = {"horizon_s", "prediction", "truth"};

    if (a.task == "occlusion") {
        const int past = static_cast<int>(cfg_get(cfg, "past_window", 39));
        const int horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        const int anchor = a.anchor >= 0 ? a.anchor : day.slices.cols() / 2;
        const double theta = st::optimal_theta(day.slices, anchor, past, horizon, {});
        const auto sample = harness::make_occlusion_sample(day, anchor, past, horizon, theta);
        if (!sample) throw EstimationError("anchor window is not usable");

        nn::OcclusionModelConfig mc;
        mc.window_rows = past + 1;
        mc.window_cols = past + horizon + 1;
        mc.horizon = horizon;
        mc.seed = a.seed;
        nn::CnnMlpOcclusion model(mc);
        model.load(a.model);
        const auto probs = model.predict(*sample);
        for (int k = 1; k <= horizon; ++k)
            t.rows.push_back({std::to_string(static_cast<int>(day.ghi.period_s) * k),
                              format_double(probs[static_cast<std::size_t>(k - 1)], 6),
                              day.occluded[static_cast<std::size_t>(anchor + k)] ? "1" : "0"});
    } else if (a.task == "ghi") {
        const int history = static_cast<int>(cfg_get(cfg, "history", 60));
        const int horizon = static_cast<int>(cfg_get(cfg, "horizon", 60));
        const int half_rows = static_cast<int>(cfg_get(cfg, "image_half_rows", 40));
        const int anchor = a.anchor >= 0 ? a.anchor : day.slices.cols() / 2;
        const auto sample = harness::make_ghi_sample(day, anchor, history, horizon, half_rows);
        if (!sample) throw EstimationError("anchor window is not usable");

        nn::GhiModelConfig mc;
        mc.history = history;
        mc.horizon = horizon;
        mc.image_rows = 2 * half_rows + 1;
        mc.image_cols = history;
        mc.model_dim = static_cast<int>(cfg_get(cfg, "model_dim", 64));
        mc.depth = static_cast<int>(cfg_get(cfg, "depth", 2));
        mc.heads = static_cast<int>(cfg_get(cfg, "heads", 4));
        mc.patch = static_cast<int>(cfg_get(cfg, "patch", 5));
        mc.seed = a.seed;
        nn::GhiForecaster model(mc);
        model.load(a.model);
        const auto pred = model.predict(*sample);
        const double g0 = day.clear_sky_peak_wm2;
        for (int k = 1; k <= horizon; ++k)
            t.rows.push_back({std::to_string(static_cast<int>(day.ghi.period_s) * k),
                              format_double(pred[static_cast<std::size_t>(k - 1)] * g0, 6),
                              format_double(day.ghi.values_wm2[static_cast<std::size_t>(anchor + k)], 6)});
    } else {
        throw std::invalid_argument("unknown task: " + a.task);
    }

    write_csv(t, a.out);
    std::cout << "wrote " << t.rows.size() << " horizon predictions to " << a.out << "\n";

    harness::RunManifest rm;
    rm.command = "forecast";
    rm.seed = a.seed;
    rm.config = cfg;
    rm.config["task"] = a.task;
    rm.config["mirror"] = a.mirror;
    rm.config["day"] = std::to_string(a.day);
    rm.inputs = {a.data, a.model + ".bin"};
    rm.outputs = {a.out};
    harness::write_run_manifest(rm, a.out + ".run.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skylens: uniform-resolution catadioptric sky imaging and solar forecasting"};
    app.require_subcommand(1);

    DesignArgs da;
    CLI::App* design = app.add_subcommand("design-mirror", "Solve and export a mirror profile");
    design->add_option("--target-fov", da.target_fov, "Target full field of view, degrees");
    design->add_option("--camera-fov", da.camera_fov, "Camera full field of view, degrees");
    design->add_option("--height", da.height, "Camera height above the mirror vertex, m");
    design->add_option("--focal", da.focal, "Focal length, mm");
    design->add_option("--step", da.step, "Integration step, m");
    design->add_option("--kind", da.kind, "designed | hemisphere");
    design->add_option("--out", da.out, "Output CSV path");
    design->add_option("--seed", da.seed, "Random seed");

    RenderArgs ra;
    CLI::App* render = app.add_subcommand("render-dataset", "Simulate sky image datasets");
    render->add_option("--days", ra.days, "Number of days");
    render->add_option("--mirror", ra.mirror_flag, "designed | hemisphere | both");
    render->add_option("--seed", ra.seed, "Master seed");
    render->add_option("--out", ra.out, "Output directory");
    render->add_option("--resolution", ra.resolution, "Square frame resolution");
    render->add_option("--supersample", ra.supersample, "Sub-pixel samples per axis");
    render->add_option("--t0", ra.period_s, "Sampling period, s");
    render->add_option("--day-hours", ra.day_hours, "Day window length, hours");
    render->add_option("--store", ra.store, "none | frames | previews | both");
    render->add_flag("--slices,!--no-slices", ra.slices, "Write per-day slice stacks");
    render->add_option("--slice-half-length", ra.slice_half_length, "Slice half length, px");
    render->add_option("--slice-band", ra.slice_band, "Perpendicular averaging width, px");

    PreprocessArgs pa;
    CLI::App* prep_cmd = app.add_subcommand("preprocess", "Recover sun track and wind from frames");
    prep_cmd->add_option("--manifest", pa.manifest, "Dataset manifest CSV")->required();
    prep_cmd->add_option("--out", pa.out, "Output directory")->required();
    prep_cmd->add_option("--degree", pa.degree, "Sun track polynomial degree");
    prep_cmd->add_option("--saturation", pa.saturation, "Saturation level in the short exposure");
    prep_cmd->add_option("--ev", pa.exposure_ev, "Short exposure EV");
    prep_cmd->add_option("--min-blob", pa.min_blob_px, "Minimum saturated blob, px");
    prep_cmd->add_option("--flow-pairs", pa.flow_pairs, "Frame pairs used for optical flow");
    prep_cmd->add_option("--lambda", pa.smoothness, "Flow smoothness weight");
    prep_cmd->add_option("--median-window", pa.median_window, "Temporal median window, frames");
    prep_cmd->add_option("--mask", pa.mask_path, "Static mask PGM (auto-derived when omitted)");
    prep_cmd->add_option("--seed", pa.seed, "Random seed");

    SliceArgs sa;
    CLI::App* slice_cmd = app.add_subcommand("slice", "Build a space-time slice stack");
    slice_cmd->add_option("--manifest", sa.manifest, "Dataset manifest CSV")->required();
    slice_cmd->add_option("--out", sa.out, "Output base path")->required();
    slice_cmd->add_option("--theta-sweep", sa.theta_sweep, "Streak-angle sweep start:stop:step");
    slice_cmd->add_option("--track", sa.track_csv, "Sun track CSV (default: manifest ground truth)");
    slice_cmd->add_option("--wind", sa.wind_csv, "Wind CSV (default: manifest wind)");
    slice_cmd->add_option("--theta-image", sa.theta_image, "Explicit upwind image angle, deg");
    slice_cmd->add_option("--half-length", sa.half_length, "Slice half length, px");
    slice_cmd->add_option("--band", sa.band, "Perpendicular averaging width, px");
    slice_cmd->add_flag("--predict", sa.predict, "Emit back-projection predictions");
    slice_cmd->add_option("--anchor", sa.anchor, "Anchor frame (default: middle of the day)");
    slice_cmd->add_option("--past", sa.past_window, "Past window, frames");
    slice_cmd->add_option("--horizon", sa.horizon, "Forecast horizon, frames");
    slice_cmd->add_option("--threshold", sa.threshold, "Occlusion threshold on the ratio trace");
    slice_cmd->add_option("--seed", sa.seed, "Random seed");

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a learned predictor");
    train_cmd->add_option("--task", ta.task, "occlusion | ghi")->required();
    train_cmd->add_option("--config", ta.config_path, "Model config file (key = value)");
    train_cmd->add_option("--data", ta.data, "Dataset root (default $SKYLENS_DATA_DIR)");
    train_cmd->add_option("--mirror", ta.mirror, "designed | hemisphere");
    train_cmd->add_option("--out", ta.out, "Output base path for weights");
    train_cmd->add_option("--seed", ta.seed, "Random seed");

    EvaluateArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Run the horizon experiments");
    eval_cmd->add_option("--task", ea.task, "occlusion | ghi");
    eval_cmd->add_option("--data", ea.data, "Dataset root (default $SKYLENS_DATA_DIR)");
    eval_cmd->add_option("--mirrors", ea.mirror_flag, "designed | hemisphere | both");
    eval_cmd->add_option("--out", ea.out, "Results directory");
    eval_cmd->add_option("--config", ea.config_path, "Experiment config file");
    eval_cmd->add_option("--seed", ea.seed, "Random seed");

    ForecastArgs fa;
    CLI::App* fc_cmd = app.add_subcommand("forecast", "Predict from a trained model");
    fc_cmd->add_option("--task", fa.task, "occlusion | ghi");
    fc_cmd->add_option("--model", fa.model, "Weights base path")->required();
    fc_cmd->add_option("--data", fa.data, "Dataset root");
    fc_cmd->add_option("--mirror", fa.mirror, "designed | hemisphere");
    fc_cmd->add_option("--config", fa.config_path, "Model config file");
    fc_cmd->add_option("--day", fa.day, "Day index (1-based)");
    fc_cmd->add_option("--anchor", fa.anchor, "Anchor frame");
    fc_cmd->add_option("--out", fa.out, "Predictions CSV");
    fc_cmd->add_option("--seed", fa.seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 2;
    }

    try {
        if (design->parsed()) return run_design(da);
        if (render->parsed()) return run_render(ra);
        if (prep_cmd->parsed()) return run_preprocess(pa);
        if (slice_cmd->parsed()) return run_slice(sa);
        if (train_cmd->parsed()) return run_train(ta);
        if (eval_cmd->parsed()) return run_evaluate(ea);
        if (fc_cmd->parsed()) return run_forecast(fa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
