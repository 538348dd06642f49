#pragma once

#include <cstdint>

#include "skylens/geometry.hpp"

namespace skylens::sim {

// Planar cloud layer: a fractal opacity field advected rigidly by the wind.
// opacity(x, y, t) = opacity(x - wind*t, y - wind*t, 0) exactly.
struct CloudField {
    std::uint64_t seed = 1;
    int octaves = 4;
    double base_scale_m = 3000.0;  // feature size of the lowest octave
    double gain = 0.5;
    double lacunarity = 2.0;
    double coverage_threshold = 0.45;  // fractal values below this are clear sky
    double softness = 0.15;            // width of the clear-to-opaque ramp
    double wind_x_mps = 10.0;
    double wind_y_mps = 0.0;
    double height_m = 1500.0;

    void validate() const;
};

// Opacity in [0, 1] of the cloud layer at plane position (x, y) and time t.
double sample_opacity(const CloudField& field, double x_m, double y_m, double t_s);

// Analytic sun arc over one simulated day. Time is seconds since the day
// window opens (08:00); the window closes at 17:00.
struct SunEphemeris {
    double day_length_s = 32400.0;           // 09:00 hours
    double peak_elevation_deg = 55.0;        // elevation at solar noon
    double min_elevation_deg = 8.0;          // elevation at the window edges
    double azimuth_start_deg = 100.0;        // azimuth at window open
    double azimuth_span_deg = 160.0;         // swept linearly over the day
    double angular_radius_deg = 0.27;
    double clear_sky_peak_wm2 = 1050.0;      // G0: direct+diffuse at 90 deg elevation
    double diffuse_fraction = 0.2;

    double elevation_deg(double t_s) const;
    double azimuth_deg(double t_s) const;
    Vec3 direction(double t_s) const;        // unit vector toward the sun
    double clear_sky_ghi_wm2(double t_s) const;

    void validate() const;
};

}  // namespace skylens::sim
