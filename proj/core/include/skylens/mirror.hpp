#pragma once

#include <optional>
#include <string>
#include <vector>

namespace skylens::mirror {

// Catadioptric rig: pinhole camera looking straight down at an axially
// symmetric mirror whose vertex sits camera_height_m below the pinhole.
// The mirror rescales the camera's narrow cone to the target field of view
// as a uniform scaling in tangent space.
struct OpticalConfig {
    double sensor_half_width_mm = 6.25;
    double focal_length_mm = 200.0;
    double camera_height_m = 1.0;
    double target_half_fov_deg = 85.0;

    double camera_half_fov_rad() const;
    double camera_half_fov_deg() const;
    double target_half_fov_rad() const;
    // Ratio of tangents: how much the mirror widens the view.
    double tangent_scale() const;

    void validate() const;  // throws std::invalid_argument on bad fields
};

enum class MirrorKind { Designed, Hemisphere, Plane };

std::string to_string(MirrorKind kind);
MirrorKind mirror_kind_from_string(const std::string& name);

struct ProfileSample {
    double rho;    // radial distance from the axis, m
    double z;      // height, m (camera pinhole at z = 0, mirror below)
    double slope;  // dz/drho
};

// Axial profile z(rho) of a mirror surface of revolution.
struct MirrorProfile {
    std::vector<ProfileSample> samples;  // rho strictly increasing from 0
    MirrorKind kind = MirrorKind::Designed;
    double rim_radius_m = 0.0;

    // Monotone C1 interpolation (cubic Hermite with stored slopes).
    double z_at(double rho) const;
    double slope_at(double rho) const;

    void validate() const;  // throws std::invalid_argument if invariants fail
};

// One traced sensor radius. Absent sky tangent means the ray missed the
// mirror or reflected at/below the horizon; such samples are reported, not
// fabricated.
struct MappingSample {
    double sensor_radius_norm;         // u in [0, 1], normalized to the valid rim
    std::optional<double> sky_tangent; // tan of the outgoing angle from zenith
};

struct AngularMapping {
    std::vector<MappingSample> samples;

    // Normalized radius at which the mapping reaches the given sky tangent
    // (linear interpolation); nullopt if never reached.
    std::optional<double> radius_at_tangent(double tangent) const;
    double max_tangent() const;
};

// Integrates the slope field that makes the mirror-reflected system act as
// a pinhole camera with the target field of view: at every surface point,
// required sky tangent = tangent_scale * camera-ray tangent. RK4 over rho
// with fixed step; stops at the camera's edge ray, which defines the rim.
MirrorProfile solve_profile(const OpticalConfig& config, double step_m = 1e-4);

// Spherical cap tangent to z = -camera_height at the apex, sampled to
// 0.999 * radius.
MirrorProfile hemisphere_profile(double radius_m, double camera_height_m,
                                 int sample_count = 4096);

// Baseline radius for side-by-side comparisons: the hemisphere's rim
// subtends the same camera angle as the designed mirror's rim, so both fill
// the sensor equally.
double matched_hemisphere_radius(const OpticalConfig& config);

// Traces n_rays pinhole rays uniformly over (0, sensor_half_width],
// reflects them off the interpolated profile and records the sky tangent.
// Radii are normalized by the outermost sensor radius that still maps to
// sky (outgoing angle < 90 deg); for the designed mirror that is the rim
// itself.
AngularMapping forward_trace_mapping(const MirrorProfile& profile,
                                     const OpticalConfig& config, int n_rays);

// Single-ray trace in the meridian plane, used by the renderer as well.
struct TraceResult {
    double rho;          // hit point radius
    double z;            // hit point height
    double sky_tangent;  // tan of outgoing angle from zenith (valid only if hit_sky)
    bool hit = false;    // ray intersected the profile
    bool hit_sky = false;  // outgoing direction points above the horizon
};
TraceResult trace_camera_ray(const MirrorProfile& profile, double camera_tangent);

struct ConicFit {
    // a*x^2 + b*x*y + c*y^2 + d*x + e*y + f = 0 with unit-norm coefficients,
    // in the conditioned frame x = rho / frame_scale,
    // y = (z - frame_z_offset) / frame_scale. Eccentricity is invariant to
    // that frame; the residual is reported in meters.
    double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
    double frame_scale = 1.0;
    double frame_z_offset = 0.0;
    double eccentricity = 0.0;
    double rms_residual_m = 0.0;  // RMS geometric residual estimate
    bool degenerate = false;      // no quadratic part (e.g. a plane)
};

// Least-squares conic through the profile samples (mirrored across the axis,
// since the surface is a body of revolution).
ConicFit fit_conic(const MirrorProfile& profile);

// Fits a conic and writes the profile as CSV (header rho,z,slope, 9
// significant digits). I/O failure raises a distinct runtime error.
ConicFit fit_conic_and_export(const MirrorProfile& profile, const std::string& path);

void export_profile_csv(const MirrorProfile& profile, const std::string& path);
MirrorProfile load_profile_csv(const std::string& path, MirrorKind kind);

}  // namespace skylens::mirror
