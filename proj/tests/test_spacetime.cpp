#include "skylens/spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "skylens/errors.hpp"
#include "skylens/mirror.hpp"
#include "skylens/render.hpp"
#include "skylens/rng.hpp"

using namespace skylens;
using namespace skylens::st;

namespace {

constexpr float kSkyR = 0.20f, kSkyG = 0.30f, kSkyB = 0.60f;
constexpr float kCloudR = 0.50f, kCloudG = 0.50f, kCloudB = 0.50f;

SpaceTimeImage blank_st(int half_length, int frames) {
    SpaceTimeImage st;
    st.half_length = half_length;
    st.band_width = 1;
    st.period_s = 30.0;
    for (int i = 0; i < frames; ++i) st.timestamps.push_back(30.0 * i);
    const std::size_t cells = static_cast<std::size_t>(st.rows()) * frames;
    st.rgb.assign(cells * 3, 0.0f);
    st.valid.assign(cells, 1);
    for (int row = 0; row < st.rows(); ++row)
        for (int col = 0; col < frames; ++col) {
            const std::size_t i = st.index(row, col) * 3;
            st.rgb[i + 0] = kSkyR;
            st.rgb[i + 1] = kSkyG;
            st.rgb[i + 2] = kSkyB;
        }
    return st;
}

// Streak of clouds that occlude the sun at frame c0: at frame t the cloud
// sits at offset (c0 - t) * tan(theta).
void paint_streak(SpaceTimeImage& st, double theta_deg, int occlusion_frame, double width) {
    const double tan_th = std::tan(deg_to_rad(theta_deg));
    for (int col = 0; col < st.cols(); ++col) {
        const double center = (occlusion_frame - col) * tan_th;
        for (int row = 0; row < st.rows(); ++row) {
            const double offset = row - st.half_length;
            if (std::abs(offset - center) <= width) {
                const std::size_t i = st.index(row, col) * 3;
                st.rgb[i + 0] = kCloudR;
                st.rgb[i + 1] = kCloudG;
                st.rgb[i + 2] = kCloudB;
            }
        }
    }
}

}  // namespace

TEST_CASE("red_blue_ratio basics") {
    CHECK(red_blue_ratio(0.3, 0.3) == 0.0);
    CHECK(red_blue_ratio(0.0, 0.5) == 1.0);
    CHECK(red_blue_ratio(0.5, 0.0) == -1.0);
    CHECK(red_blue_ratio(0.0, 0.0) == 0.0);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const double v = red_blue_ratio(rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("extract_slice: constant frame, coordinate ramp, band averaging") {
    Image flat(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) flat.at(x, y, c) = 0.7f;
    const auto col = extract_slice(flat, nullptr, {32.0, 32.0}, 30.0, 10, 1);
    for (const auto& s : col) {
        REQUIRE(s.valid);
        CHECK(s.r == doctest::Approx(0.7));
    }

    // Pixel value = continuous x coordinate of the pixel center.
    Image ramp(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) ramp.at(x, y, c) = static_cast<float>(x) + 0.5f;
    const Vec2 sun{20.0, 32.0};
    const auto rampcol = extract_slice(ramp, nullptr, sun, 0.0, 8, 1);
    for (int d = -8; d <= 8; ++d) {
        const auto& s = rampcol[static_cast<std::size_t>(d + 8)];
        REQUIRE(s.valid);
        CHECK(s.r == doctest::Approx(sun.x + d).epsilon(1e-6));
    }

    // Perpendicular-constant image: band width must not change the values.
    const auto b1 = extract_slice(ramp, nullptr, sun, 0.0, 8, 1);
    const auto b3 = extract_slice(ramp, nullptr, sun, 0.0, 8, 3);
    for (std::size_t i = 0; i < b1.size(); ++i)
        CHECK(b1[i].r == doctest::Approx(b3[i].r).epsilon(1e-6));

    // Samples leaving the image are invalid, not fabricated.
    const auto edge = extract_slice(ramp, nullptr, {2.0, 32.0}, 180.0, 8, 1);
    int invalid = 0;
    for (const auto& s : edge)
        if (!s.valid) ++invalid;
    CHECK(invalid > 0);
}

TEST_CASE("build_spacetime: one column per frame, sunless columns invalid") {
    Image img(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.5f;
    std::vector<FrameSliceInput> frames(5);
    for (int i = 0; i < 5; ++i) {
        frames[static_cast<std::size_t>(i)].image = &img;
        frames[static_cast<std::size_t>(i)].timestamp_s = 30.0 * i;
        if (i != 2) frames[static_cast<std::size_t>(i)].sun_pixel = Vec2{16.0, 16.0};
    }
    const SpaceTimeImage st = build_spacetime(frames, 45.0, 6, 1, 30.0);
    CHECK(st.cols() == 5);
    CHECK(st.rows() == 13);
    for (int row = 0; row < st.rows(); ++row) {
        CHECK(!st.is_valid(row, 2));
        CHECK(st.is_valid(row, 1));
    }
}

TEST_CASE("spacetime save/load round-trip") {
    SpaceTimeImage st = blank_st(10, 16);
    paint_streak(st, 70.0, 8, 1.5);
    st.valid[st.index(3, 4)] = 0;
    save_spacetime(st, "st_test");
    const SpaceTimeImage back = load_spacetime("st_test");
    CHECK(back.rows() == st.rows());
    CHECK(back.cols() == st.cols());
    CHECK(back.theta_image_deg == doctest::Approx(st.theta_image_deg));
    for (std::size_t i = 0; i < st.rgb.size(); ++i) CHECK(back.rgb[i] == st.rgb[i]);
    CHECK(back.valid == st.valid);
    for (const char* suffix : {".pfm", ".mask.pgm", ".csv"})
        std::filesystem::remove(std::string("st_test") + suffix);
}

TEST_CASE("shear: streaks of matching slope become constant columns") {
    // Channels affine in (offset - (c0 - t) tan theta): affine images make
    // bilinear sampling exact, so aligned shearing gives zero variance.
    const double theta = 70.0;
    const double tan_th = std::tan(deg_to_rad(theta));
    SpaceTimeImage st = blank_st(60, 80);
    const int c0 = 50;
    for (int col = 0; col < st.cols(); ++col) {
        for (int row = 0; row < st.rows(); ++row) {
            const double u = (row - st.half_length) - (c0 - col) * tan_th;
            const std::size_t i = st.index(row, col) * 3;
            st.rgb[i + 0] = static_cast<float>(0.45 + 0.0005 * u);
            st.rgb[i + 1] = 0.5f;
            st.rgb[i + 2] = static_cast<float>(0.55 - 0.0005 * u);
        }
    }

    const ShearedWindow w = shear(st, theta, 40, 30, 20);
    for (int col = 0; col < w.cols(); ++col) {
        double mn = 1e9, mx = -1e9;
        int n = 0;
        for (int row = 0; row < w.rows(); ++row) {
            const std::size_t i = static_cast<std::size_t>(row) * w.cols() + col;
            if (!w.valid[i]) continue;
            const double v = red_blue_ratio(w.rgb[i * 3 + 0], w.rgb[i * 3 + 2]);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            ++n;
        }
        if (n >= 2) CHECK(mx - mn < 1e-6);
    }

    // Constant input stays constant under any angle.
    const SpaceTimeImage flat = blank_st(40, 60);
    const ShearedWindow wf = shear(flat, 63.0, 30, 20, 15);
    for (std::size_t i = 0; i < wf.valid.size(); ++i) {
        if (!wf.valid[i]) continue;
        CHECK(wf.rgb[i * 3 + 2] == doctest::Approx(kSkyB));
    }

    // Offsets beyond the slice length are invalid.
    const ShearedWindow wb = shear(flat, 85.0, 30, 25, 25);
    const int far_col = wb.cols() - 1;
    CHECK(!wb.valid[static_cast<std::size_t>(0) * wb.cols() + far_col]);

    CHECK_THROWS_AS(shear(flat, 0.0, 30, 20, 10), std::invalid_argument);
    CHECK_THROWS_AS(shear(flat, 95.0, 30, 20, 10), std::invalid_argument);
    CHECK_THROWS_AS(shear(flat, 70.0, 10, 20, 10), std::invalid_argument);
}

TEST_CASE("shear round-trip recovers the source on the common support") {
    // At 45 degrees the shear hits integer offsets, so recovery is exact.
    SpaceTimeImage st = blank_st(30, 50);
    Rng rng(6);
    for (int row = 0; row < st.rows(); ++row)
        for (int col = 0; col < st.cols(); ++col) {
            const std::size_t i = st.index(row, col) * 3;
            st.rgb[i + 0] = static_cast<float>(rng.uniform());
            st.rgb[i + 2] = static_cast<float>(rng.uniform());
        }
    const int anchor = 30, past = 20, horizon = 10;
    const ShearedWindow w = shear(st, 45.0, anchor, past, horizon);
    const int first = anchor - past;
    for (int row = 0; row < w.rows(); ++row) {
        const int frame = first + row;
        for (int col = 0; col < w.cols(); ++col) {
            const std::size_t wi = static_cast<std::size_t>(row) * w.cols() + col;
            if (!w.valid[wi]) continue;
            const int offset = (first + col - frame);  // tan 45 = 1
            const std::size_t si = st.index(st.half_length + offset, frame) * 3;
            CHECK(w.rgb[wi * 3 + 0] == doctest::Approx(st.rgb[si + 0]).epsilon(1e-7));
            CHECK(w.rgb[wi * 3 + 2] == doctest::Approx(st.rgb[si + 2]).epsilon(1e-7));
        }
    }
}

TEST_CASE("optimal_theta recovers synthetic streak angles across the sweep") {
    for (double theta : {61.0, 67.0, 70.0, 76.0, 84.0}) {
        SpaceTimeImage st = blank_st(100, 120);
        Rng rng(static_cast<std::uint64_t>(theta * 10));
        for (int k = 0; k < 6; ++k)
            paint_streak(st, theta, 40 + static_cast<int>(rng.below(70)), 1.0 + rng.uniform() * 2.0);
        const double got = optimal_theta(st, 80, 60, 30);
        CHECK(std::abs(got - theta) <= 1.0);
    }

    // Constant sky: every angle scores the same; the tie resolves low.
    const SpaceTimeImage flat = blank_st(60, 100);
    CHECK(optimal_theta(flat, 70, 40, 20) == 60.0);
}

TEST_CASE("optimal_theta: dominant population wins; tau_max 0 is insufficient") {
    SpaceTimeImage st = blank_st(100, 120);
    Rng rng(12);
    for (int k = 0; k < 7; ++k)
        paint_streak(st, 65.0, 35 + static_cast<int>(rng.below(75)), 2.5);
    for (int k = 0; k < 2; ++k)
        paint_streak(st, 80.0, 45 + static_cast<int>(rng.below(50)), 1.0);
    const double got = optimal_theta(st, 80, 60, 30);
    CHECK(std::abs(got - 65.0) <= 1.0);

    const SpaceTimeImage flat = blank_st(40, 60);
    CHECK_THROWS_AS(optimal_theta(flat, 30, 0, 10), EstimationError);
}

TEST_CASE("backprojection: clear day stays clear; a streak flags its band") {
    // Clear synthetic day: ratio is the sky ratio everywhere.
    const double sky_ratio = red_blue_ratio(kSkyR, kSkyB);
    const SpaceTimeImage clear = blank_st(80, 100);
    const BackprojectionResult r0 = backproject_predict(clear, 70, 50, 20, sky_ratio - 0.05);
    for (int k = 0; k < 20; ++k) CHECK(r0.occluded[static_cast<std::size_t>(k)] == 0);

    // One cloud streak that occludes the sun at anchor+8.
    SpaceTimeImage st = blank_st(80, 100);
    const double theta = 70.0;
    paint_streak(st, theta, 78, 2.0);
    const double cloud_ratio = red_blue_ratio(kCloudR, kCloudB);
    const double threshold = 0.5 * (sky_ratio + cloud_ratio);
    const BackprojectionResult r1 = backproject_predict(st, 70, 50, 20, threshold);
    CHECK(std::abs(r1.theta_deg - theta) <= 1.0);
    REQUIRE(r1.occluded.size() == 20);
    CHECK(r1.occluded[7] == 1);  // horizon k = 8
    // The flagged horizons form one contiguous band containing k = 8.
    int first = -1, last = -1;
    for (int k = 0; k < 20; ++k) {
        if (r1.occluded[static_cast<std::size_t>(k)]) {
            if (first < 0) first = k;
            last = k;
        }
    }
    REQUIRE(first >= 0);
    CHECK(first <= 7);
    CHECK(last >= 7);
    for (int k = first; k <= last; ++k) CHECK(r1.occluded[static_cast<std::size_t>(k)] == 1);

    // tau_max = 0 leaves every column under the support minimum.
    CHECK_THROWS_AS(backproject_predict(st, 70, 0, 20, threshold), EstimationError);
}

TEST_CASE("trace values are bounded and dip monotonically with blue content") {
    SpaceTimeImage st = blank_st(60, 80);
    paint_streak(st, 70.0, 55, 3.0);
    const ShearedWindow w = shear(st, 70.0, 50, 30, 20);
    const RatioTrace tr = ratio_trace(w);
    for (std::size_t c = 0; c < tr.value.size(); ++c) {
        if (tr.valid_count[c] == 0) continue;
        CHECK(tr.value[c] >= -1.0);
        CHECK(tr.value[c] <= 1.0);
    }

    // Lower the cloud's blue channel; affected columns can only go down.
    SpaceTimeImage darker = st;
    for (std::size_t i = 0; i < darker.valid.size(); ++i) {
        if (darker.rgb[i * 3 + 0] == kCloudR && darker.rgb[i * 3 + 2] == kCloudB)
            darker.rgb[i * 3 + 2] = 0.40f;
    }
    const RatioTrace tr2 = ratio_trace(shear(darker, 70.0, 50, 30, 20));
    for (std::size_t c = 0; c < tr.value.size(); ++c) {
        if (tr.valid_count[c] == 0) continue;
        CHECK(tr2.value[c] <= tr.value[c] + 1e-9);
    }
}

TEST_CASE("calibrate_threshold: separation, chance, and brute-force agreement") {
    // Perfectly separated populations (occluded scores are lower).
    std::vector<double> scores{0.1, 0.15, 0.2, 0.6, 0.7, 0.65};
    std::vector<std::uint8_t> labels{1, 1, 1, 0, 0, 0};
    const double thr = calibrate_threshold(scores, labels);
    CHECK(thr > 0.2);
    CHECK(thr < 0.6);
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] < thr) (labels[i] ? tp : fp) += 1;
    }
    CHECK(tp == 3);
    CHECK(fp == 0);

    // Identical score distributions: no threshold beats J = 0.
    std::vector<double> same{0.3, 0.5, 0.3, 0.5};
    std::vector<std::uint8_t> l2{1, 1, 0, 0};
    const double thr2 = calibrate_threshold(same, l2);
    long tp2 = 0, fp2 = 0;
    for (std::size_t i = 0; i < same.size(); ++i)
        if (same[i] < thr2) (l2[i] ? tp2 : fp2) += 1;
    CHECK(static_cast<double>(tp2) / 2 - static_cast<double>(fp2) / 2 == doctest::Approx(0.0));

    // Small labeled set: achieved J equals an exhaustive dense sweep.
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> s(6);
        std::vector<std::uint8_t> l(6);
        bool both = false;
        for (int i = 0; i < 6; ++i) {
            s[static_cast<std::size_t>(i)] = rng.uniform();
            l[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
        }
        int pos = 0;
        for (const auto v : l) pos += v;
        if (pos == 0 || pos == 6) continue;
        both = true;
        const double got = calibrate_threshold(s, l);
        auto j_at = [&](double t) {
            double tp3 = 0, fp3 = 0;
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s[i] < t) (l[i] ? tp3 : fp3) += 1;
            return tp3 / pos - fp3 / (6 - pos);
        };
        double best = -2.0;
        for (double t = -0.05; t <= 1.1; t += 1e-3) best = std::max(best, j_at(t));
        CHECK(j_at(got) == doctest::Approx(best).epsilon(1e-12));
        (void)both;
    }

    std::vector<std::uint8_t> single{1, 1, 1};
    CHECK_THROWS_AS(calibrate_threshold({0.1, 0.2, 0.3}, single), EstimationError);
}

TEST_CASE("streaks are straight on the designed mirror, curved on the hemisphere") {
    // Track the sun-relative slice coordinate of a wind-driven cloud point
    // over time and fit a line: the designed mirror keeps the track straight
    // while the hemisphere bends it.
    mirror::OpticalConfig cfg;
    const auto designed = mirror::solve_profile(cfg);
    const auto hemi = mirror::hemisphere_profile(mirror::matched_hemisphere_radius(cfg),
                                                 cfg.camera_height_m);
    const sim::RadialCamera cam_d(designed, cfg);
    const sim::RadialCamera cam_h(hemi, cfg);

    sim::SunEphemeris sun;
    sun.peak_elevation_deg = 65.0;
    sun.min_elevation_deg = 30.0;

    const double h = 1500.0;
    const double wind = 13.0;  // m/s along -x: the cloud drifts toward the sun
    const int res = 256;
    const double t_start = 16200.0;
    const int steps = 36;

    auto project = [&](const sim::RadialCamera& cam, double gx, double gy) {
        const double tangent = std::hypot(gx, gy) / h;
        const auto frac = cam.radius_frac_for_tangent(tangent);
        REQUIRE(frac.has_value());
        const double az = std::atan2(gy, gx);
        return Vec2{res / 2.0 + *frac * res / 2.0 * std::cos(az),
                    res / 2.0 + *frac * res / 2.0 * std::sin(az)};
    };

    // Start 14 km upwind (+x) of the sun ground point.
    const Vec3 d0 = sun.direction(t_start);
    const double p0x = d0.x / d0.z * h + 14000.0;
    const double p0y = d0.y / d0.z * h;

    auto max_line_residual = [&](const sim::RadialCamera& cam) {
        std::vector<double> ts, ds;
        for (int i = 0; i <= steps; ++i) {
            const double t = t_start + 30.0 * i;
            const Vec3 sd = sun.direction(t);
            const Vec2 sun_px = project(cam, sd.x / sd.z * h, sd.y / sd.z * h);
            const Vec2 cloud_px = project(cam, p0x - wind * (t - t_start), p0y);
            ts.push_back(30.0 * i);
            ds.push_back(cloud_px.x - sun_px.x);  // slice axis is +x (upwind)
        }
        // Least-squares line d = a + b t.
        const double n = static_cast<double>(ts.size());
        double st = 0, sd2 = 0, stt = 0, std_ = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            st += ts[i];
            sd2 += ds[i];
            stt += ts[i] * ts[i];
            std_ += ts[i] * ds[i];
        }
        const double denom = n * stt - st * st;
        const double b = (n * std_ - st * sd2) / denom;
        const double a = (sd2 - b * st) / n;
        double max_resid = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i)
            max_resid = std::max(max_resid, std::abs(a + b * ts[i] - ds[i]));
        return max_resid;
    };

    const double resid_designed = max_line_residual(cam_d);
    const double resid_hemi = max_line_residual(cam_h);
    CHECK(resid_designed < 1.0);
    CHECK(resid_hemi >= 5.0 * resid_designed);
}
