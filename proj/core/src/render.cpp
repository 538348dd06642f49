#include "skylens/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skylens::sim {

namespace {

constexpr double kSunRadiance = 200.0;
constexpr double kGamma = 2.2;

struct Rgb {
    double r, g, b;
};

Rgb sky_radiance(double cos_zenith, double sun_elevation_deg) {
    // Blue gradient: saturated at the zenith, washed out near the horizon.
    const double t = std::pow(std::clamp(1.0 - cos_zenith, 0.0, 1.0), 1.5);
    const double bright =
        0.30 + 0.70 * std::clamp(std::sin(deg_to_rad(std::max(sun_elevation_deg, 0.0))), 0.0, 1.0);
    return {bright * (0.10 + t * (0.42 - 0.10)), bright * (0.22 + t * (0.48 - 0.22)),
            bright * (0.55 + t * (0.58 - 0.55))};
}

Rgb cloud_radiance(double opacity, double sun_elevation_deg) {
    const double bright =
        0.30 + 0.70 * std::clamp(std::sin(deg_to_rad(std::max(sun_elevation_deg, 0.0))), 0.0, 1.0);
    const double shade = 0.55 + 0.45 * (1.0 - 0.6 * opacity);
    return {bright * shade * 0.80, bright * shade * 0.80, bright * shade * 0.82};
}

constexpr Rgb kBorderColor{0.030, 0.030, 0.032};  // ray cleared the rim
constexpr Rgb kGroundColor{0.100, 0.085, 0.075};  // reflected below the horizon

}  // namespace

GroundTruth ground_truth(const CloudScene& scene, double t_s) {
    scene.clouds.validate();
    scene.sun.validate();
    GroundTruth gt;
    const double elevation = scene.sun.elevation_deg(t_s);
    if (elevation <= 0.0) return gt;  // ghi 0, not occluded

    const Vec3 dir = scene.sun.direction(t_s);
    const double scale = scene.clouds.height_m / dir.z;
    gt.sun_opacity = sample_opacity(scene.clouds, dir.x * scale, dir.y * scale, t_s);
    gt.occluded = gt.sun_opacity >= 0.5;
    const double clear = scene.sun.clear_sky_ghi_wm2(t_s);
    gt.ghi_wm2 = clear * (scene.sun.diffuse_fraction +
                          (1.0 - scene.sun.diffuse_fraction) * (1.0 - gt.sun_opacity));
    return gt;
}

RadialCamera::RadialCamera(const mirror::MirrorProfile& profile,
                           const mirror::OpticalConfig& config, int table_size) {
    profile.validate();
    config.validate();
    if (table_size < 64) throw std::invalid_argument("camera table too small");
    table_.resize(static_cast<std::size_t>(table_size) + 1);
    for (int i = 0; i <= table_size; ++i) {
        const double frac = static_cast<double>(i) / table_size;
        const double cam_tan = frac * config.sensor_half_width_mm / config.focal_length_mm;
        const mirror::TraceResult t = mirror::trace_camera_ray(profile, cam_tan);
        Lookup& e = table_[static_cast<std::size_t>(i)];
        e.beyond_rim = !t.hit;
        if (t.hit && t.hit_sky) {
            e.valid = true;
            e.sky_tangent = t.sky_tangent;
            e.cos_zenith = 1.0 / std::sqrt(1.0 + t.sky_tangent * t.sky_tangent);
            e.hit_rho = t.rho;
            e.hit_z = t.z;
            max_tangent_ = std::max(max_tangent_, t.sky_tangent);
        } else if (t.hit) {
            e.hit_rho = t.rho;
            e.hit_z = t.z;
        }
    }
}

RadialCamera::Lookup RadialCamera::lookup(double radius_frac) const {
    if (radius_frac < 0.0 || radius_frac > 1.0) {
        Lookup miss;
        miss.beyond_rim = true;
        return miss;
    }
    const double pos = radius_frac * static_cast<double>(table_.size() - 1);
    const std::size_t i0 = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
    const double w = pos - static_cast<double>(i0);
    const Lookup& a = table_[i0];
    const Lookup& b = table_[i0 + 1];
    if (!a.valid || !b.valid) {
        // Do not interpolate across the validity edge.
        return w < 0.5 ? a : b;
    }
    Lookup out;
    out.valid = true;
    out.sky_tangent = a.sky_tangent + w * (b.sky_tangent - a.sky_tangent);
    out.cos_zenith = a.cos_zenith + w * (b.cos_zenith - a.cos_zenith);
    out.hit_rho = a.hit_rho + w * (b.hit_rho - a.hit_rho);
    out.hit_z = a.hit_z + w * (b.hit_z - a.hit_z);
    return out;
}

std::optional<double> RadialCamera::radius_frac_for_tangent(double sky_tangent) const {
    if (sky_tangent < 0.0 || sky_tangent > max_tangent_) return std::nullopt;
    // The valid prefix of the table has strictly increasing tangent.
    std::size_t lo = 0, hi = table_.size() - 1;
    while (hi > lo && !table_[hi].valid) --hi;
    if (!table_[hi].valid || table_[hi].sky_tangent < sky_tangent) return std::nullopt;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (table_[mid].valid && table_[mid].sky_tangent >= sky_tangent)
            hi = mid;
        else
            lo = mid;
    }
    const double t0 = table_[lo].valid ? table_[lo].sky_tangent : 0.0;
    const double t1 = table_[hi].sky_tangent;
    const double w = t1 > t0 ? (sky_tangent - t0) / (t1 - t0) : 0.0;
    return (static_cast<double>(lo) + w) / static_cast<double>(table_.size() - 1);
}

std::optional<Vec2> sun_pixel_for(const RadialCamera& camera, const SunEphemeris& sun, double t_s,
                                  int resolution) {
    const double elevation = sun.elevation_deg(t_s);
    if (elevation <= 0.0) return std::nullopt;
    const double zenith_tan = std::tan(deg_to_rad(90.0 - elevation));
    const auto frac = camera.radius_frac_for_tangent(zenith_tan);
    if (!frac) return std::nullopt;
    const double az = deg_to_rad(sun.azimuth_deg(t_s));
    const double half = 0.5 * resolution;
    const double px = half + *frac * half * std::cos(az);
    const double py = half + *frac * half * std::sin(az);
    if (px < 0.0 || py < 0.0 || px >= resolution || py >= resolution) return std::nullopt;
    return Vec2{px, py};
}

namespace {

template <typename Shade>
SkyFrame render_common(const RadialCamera& camera, double t_s, int resolution, int supersample,
                       mirror::MirrorKind kind, Shade&& shade) {
    if (resolution < 64) throw std::invalid_argument("resolution must be at least 64");
    if (supersample < 1) throw std::invalid_argument("supersample must be at least 1");

    SkyFrame frame;
    frame.timestamp_s = t_s;
    frame.mirror_kind = kind;
    frame.hdr = Image(resolution, resolution, 3);
    frame.sky_mask.assign(static_cast<std::size_t>(resolution) * resolution, 0);

    const double half = 0.5 * resolution;
    const double inv_ss = 1.0 / supersample;
    const double px_to_frac = 1.0 / half;

    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            double acc_r = 0.0, acc_g = 0.0, acc_b = 0.0;
            int sky_hits = 0;
            for (int sy = 0; sy < supersample; ++sy) {
                for (int sx = 0; sx < supersample; ++sx) {
                    const double fx = (x + (sx + 0.5) * inv_ss - half) * px_to_frac;
                    const double fy = (y + (sy + 0.5) * inv_ss - half) * px_to_frac;
                    const double rad = std::sqrt(fx * fx + fy * fy);
                    const RadialCamera::Lookup lk = camera.lookup(rad);
                    Rgb c{};
                    if (!lk.valid) {
                        c = lk.beyond_rim ? kBorderColor : kGroundColor;
                    } else {
                        ++sky_hits;
                        const double inv_r = rad > 0.0 ? 1.0 / rad : 0.0;
                        const double cos_az = rad > 0.0 ? fx * inv_r : 1.0;
                        const double sin_az = rad > 0.0 ? fy * inv_r : 0.0;
                        c = shade(lk, cos_az, sin_az);
                    }
                    acc_r += c.r;
                    acc_g += c.g;
                    acc_b += c.b;
                }
            }
            const double inv_n = inv_ss * inv_ss;
            frame.hdr.at(x, y, 0) = static_cast<float>(acc_r * inv_n);
            frame.hdr.at(x, y, 1) = static_cast<float>(acc_g * inv_n);
            frame.hdr.at(x, y, 2) = static_cast<float>(acc_b * inv_n);
            // A pixel is sky when most of its samples are.
            if (2 * sky_hits > supersample * supersample)
                frame.sky_mask[static_cast<std::size_t>(y) * resolution + x] = 1;
        }
    }
    return frame;
}

}  // namespace

SkyFrame render_frame(const RadialCamera& camera, const CloudScene& scene, double t_s,
                      int resolution, int supersample, mirror::MirrorKind kind) {
    scene.clouds.validate();
    scene.sun.validate();
    const double elevation = scene.sun.elevation_deg(t_s);
    const GroundTruth gt = ground_truth(scene, t_s);
    const CloudField& clouds = scene.clouds;

    SkyFrame frame = render_common(
        camera, t_s, resolution, supersample, kind,
        [&](const RadialCamera::Lookup& lk, double cos_az, double sin_az) {
            // Radial distance on the cloud plane; the mirror point offset
            // keeps the intersection exact even though height dominates.
            const double ground_r = lk.hit_rho + lk.sky_tangent * (clouds.height_m - lk.hit_z);
            const double gx = ground_r * cos_az;
            const double gy = ground_r * sin_az;
            const double o = sample_opacity(clouds, gx, gy, t_s);
            const Rgb sky = sky_radiance(lk.cos_zenith, elevation);
            const Rgb cl = cloud_radiance(o, elevation);
            return Rgb{(1.0 - o) * sky.r + o * cl.r, (1.0 - o) * sky.g + o * cl.g,
                       (1.0 - o) * sky.b + o * cl.b};
        });

    frame.occluded = gt.occluded;
    frame.ghi_wm2 = gt.ghi_wm2;
    frame.sun_pixel = sun_pixel_for(camera, scene.sun, t_s, resolution);

    // The sun disk (0.27 deg) is far below one pixel at these resolutions;
    // deposit its radiance bilinearly into the containing pixel block.
    if (frame.sun_pixel) {
        const double sx = frame.sun_pixel->x - 0.5;
        const double sy = frame.sun_pixel->y - 0.5;
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double wx = sx - x0;
        const double wy = sy - y0;
        const double through = 1.0 - gt.sun_opacity;
        for (int dy = 0; dy <= 1; ++dy) {
            for (int dx = 0; dx <= 1; ++dx) {
                const int px = x0 + dx;
                const int py = y0 + dy;
                if (px < 0 || py < 0 || px >= resolution || py >= resolution) continue;
                const double w = (dx ? wx : 1.0 - wx) * (dy ? wy : 1.0 - wy);
                for (int c = 0; c < 3; ++c)
                    frame.hdr.at(px, py, c) += static_cast<float>(kSunRadiance * through * w);
            }
        }
    }
    return frame;
}

SkyFrame render_frame(const mirror::MirrorProfile& profile, const mirror::OpticalConfig& config,
                      const CloudScene& scene, double t_s, int resolution, int supersample) {
    const RadialCamera camera(profile, config);
    return render_frame(camera, scene, t_s, resolution, supersample, profile.kind);
}

SkyFrame render_frame(const mirror::MirrorProfile& profile, const mirror::OpticalConfig& config,
                      const CheckerboardScene& scene, double t_s, int resolution, int supersample) {
    if (!(scene.plane_height_m > 0.0) || !(scene.square_size_m > 0.0) ||
        !(scene.half_extent_m > 0.0))
        throw std::invalid_argument("checkerboard scene dimensions must be positive");
    const RadialCamera camera(profile, config);

    const Rgb bright{0.85, 0.85, 0.85};
    const Rgb dark{0.08, 0.08, 0.08};
    SkyFrame frame = render_common(
        camera, t_s, resolution, supersample, profile.kind,
        [&](const RadialCamera::Lookup& lk, double cos_az, double sin_az) {
            const double ground_r = lk.hit_rho + lk.sky_tangent * (scene.plane_height_m - lk.hit_z);
            const double gx = ground_r * cos_az;
            const double gy = ground_r * sin_az;
            if (std::abs(gx) > scene.half_extent_m || std::abs(gy) > scene.half_extent_m)
                return sky_radiance(lk.cos_zenith, 90.0);
            const auto ix = static_cast<long long>(std::floor(gx / scene.square_size_m));
            const auto iy = static_cast<long long>(std::floor(gy / scene.square_size_m));
            return ((ix + iy) & 1LL) ? dark : bright;
        });
    return frame;
}

ExposureStack bracket_exposures(const Image& hdr, const std::vector<double>& stops_ev) {
    if (stops_ev.empty()) throw std::invalid_argument("stops list must not be empty");
    for (const float v : hdr.data)
        if (!std::isfinite(v)) throw std::invalid_argument("hdr input must be finite");

    ExposureStack stack;
    stack.stops_ev = stops_ev;
    stack.ldr.reserve(stops_ev.size());
    for (const double ev : stops_ev) {
        const double scale = std::exp2(ev);
        Image ldr(hdr.width, hdr.height, hdr.channels);
        for (std::size_t i = 0; i < hdr.data.size(); ++i) {
            const double v = std::clamp(static_cast<double>(hdr.data[i]) * scale, 0.0, 1.0);
            ldr.data[i] = static_cast<float>(std::pow(v, 1.0 / kGamma));
        }
        stack.ldr.push_back(std::move(ldr));
    }

    // Shortest exposure = smallest 2^ev. Per pixel, invert the shortest
    // unsaturated one; if everything saturates, fall back to the shortest.
    std::vector<std::size_t> order(stops_ev.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return stops_ev[a] < stops_ev[b]; });

    constexpr double kSatLevel = 1.0 - 1e-6;
    stack.fused = Image(hdr.width, hdr.height, hdr.channels);
    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
        double fused = 0.0;
        bool found = false;
        for (const std::size_t k : order) {
            const double enc = stack.ldr[k].data[i];
            const double lin = std::pow(enc, kGamma);
            if (lin < kSatLevel) {
                fused = lin * std::exp2(-stops_ev[k]);
                found = true;
                break;
            }
        }
        if (!found) fused = std::exp2(-stops_ev[order.front()]);
        stack.fused.data[i] = static_cast<float>(fused);
    }
    return stack;
}

}  // namespace skylens::sim
