#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "skylens/geometry.hpp"
#include "skylens/image.hpp"
#include "skylens/mirror.hpp"
#include "skylens/sky.hpp"

namespace skylens::sim {

struct CheckerboardScene {
    double plane_height_m = 2000.0;
    double square_size_m = 1000.0;
    double half_extent_m = 25000.0;
};

struct CloudScene {
    CloudField clouds;
    SunEphemeris sun;
};

struct GroundTruth {
    bool occluded = false;
    double ghi_wm2 = 0.0;
    double sun_opacity = 0.0;
};

// Occlusion state and irradiance at the site: opacity is probed where the
// sun ray crosses the cloud plane; ties at 0.5 count as occluded.
GroundTruth ground_truth(const CloudScene& scene, double t_s);

struct SkyFrame {
    double timestamp_s = 0.0;
    Image hdr;                           // linear radiance, 3 channels
    std::vector<std::uint8_t> sky_mask;  // 1 where the pixel sees sky
    std::optional<Vec2> sun_pixel;       // pixel coordinates of the sun center
    bool occluded = false;
    double ghi_wm2 = 0.0;
    mirror::MirrorKind mirror_kind = mirror::MirrorKind::Designed;
};

// Precomputed radial view table: sensor radius -> (sky tangent, mirror hit,
// shading terms). Rays that clear the rim or reflect at/below the horizon
// are invalid and render as border/ground.
class RadialCamera {
public:
    RadialCamera(const mirror::MirrorProfile& profile, const mirror::OpticalConfig& config,
                 int table_size = 2048);

    struct Lookup {
        bool valid = false;      // maps to sky
        bool beyond_rim = false; // ray misses the mirror entirely
        double sky_tangent = 0.0;
        double cos_zenith = 1.0;
        double hit_rho = 0.0;
        double hit_z = 0.0;
    };
    // radius_frac: sensor radius as a fraction of the sensor half-width.
    Lookup lookup(double radius_frac) const;

    // Inverse mapping: pixel radius fraction at which the given sky tangent
    // appears; nullopt when outside the imaged field.
    std::optional<double> radius_frac_for_tangent(double sky_tangent) const;

    double max_tangent() const { return max_tangent_; }

private:
    std::vector<Lookup> table_;
    double max_tangent_ = 0.0;
};

// Renders one catadioptric frame. Cloud scenes composite a single planar
// cloud layer over a sky gradient and deposit the (sub-pixel) sun disk into
// its containing pixel; the checkerboard scene reproduces the validation
// plane. supersample > 1 averages an n x n sub-pixel grid.
SkyFrame render_frame(const mirror::MirrorProfile& profile, const mirror::OpticalConfig& config,
                      const CheckerboardScene& scene, double t_s, int resolution,
                      int supersample = 1);
SkyFrame render_frame(const mirror::MirrorProfile& profile, const mirror::OpticalConfig& config,
                      const CloudScene& scene, double t_s, int resolution, int supersample = 1);

// Same, reusing a prepared camera table.
SkyFrame render_frame(const RadialCamera& camera, const CloudScene& scene, double t_s,
                      int resolution, int supersample, mirror::MirrorKind kind);

// Exact sun pixel for a frame resolution (independent of rendering).
std::optional<Vec2> sun_pixel_for(const RadialCamera& camera, const SunEphemeris& sun, double t_s,
                                  int resolution);

struct ExposureStack {
    std::vector<double> stops_ev;
    std::vector<Image> ldr;  // gamma-encoded, clamped to [0, 1]
    Image fused;             // linear HDR reconstruction
};

// Exposure bracketing: each LDR is clamp(hdr * 2^ev, 0, 1) through gamma
// 1/2.2; fusion inverts, per pixel, the shortest unsaturated exposure (the
// shortest one if all saturate).
ExposureStack bracket_exposures(const Image& hdr, const std::vector<double>& stops_ev);

}  // namespace skylens::sim
