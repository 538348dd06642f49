#include "skylens/sky.hpp"

#include <cmath>
#include <stdexcept>

#include "skylens/noise.hpp"

namespace skylens::sim {

void CloudField::validate() const {
    if (octaves < 1) throw std::invalid_argument("octaves must be at least 1");
    if (!(base_scale_m > 0.0)) throw std::invalid_argument("base_scale_m must be positive");
    if (!(gain > 0.0) || !(lacunarity > 0.0))
        throw std::invalid_argument("gain and lacunarity must be positive");
    if (coverage_threshold < 0.0 || coverage_threshold > 1.0)
        throw std::invalid_argument("coverage_threshold must lie in [0, 1]");
    if (softness < 0.0 || softness > 1.0)
        throw std::invalid_argument("softness must lie in [0, 1]");
    if (!(height_m > 0.0)) throw std::invalid_argument("cloud height must be positive");
}

double sample_opacity(const CloudField& field, double x_m, double y_m, double t_s) {
    const double x = (x_m - field.wind_x_mps * t_s) / field.base_scale_m;
    const double y = (y_m - field.wind_y_mps * t_s) / field.base_scale_m;
    const double v = fractal_noise(field.seed, x, y, field.octaves, field.gain, field.lacunarity);
    if (field.softness == 0.0) return v > field.coverage_threshold ? 1.0 : 0.0;
    const double t = (v - field.coverage_threshold) / field.softness;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
}

void SunEphemeris::validate() const {
    if (!(day_length_s > 0.0)) throw std::invalid_argument("day length must be positive");
    if (min_elevation_deg < 0.0 || peak_elevation_deg > 90.0 ||
        min_elevation_deg > peak_elevation_deg)
        throw std::invalid_argument("elevation range must satisfy 0 <= min <= peak <= 90");
    if (!(clear_sky_peak_wm2 > 0.0)) throw std::invalid_argument("G0 must be positive");
    if (diffuse_fraction < 0.0 || diffuse_fraction > 1.0)
        throw std::invalid_argument("diffuse_fraction must lie in [0, 1]");
}

double SunEphemeris::elevation_deg(double t_s) const {
    const double u = t_s / day_length_s;
    if (u < 0.0 || u > 1.0) return -1.0;  // below horizon outside the window
    return min_elevation_deg + (peak_elevation_deg - min_elevation_deg) * std::sin(kPi * u);
}

double SunEphemeris::azimuth_deg(double t_s) const {
    return azimuth_start_deg + azimuth_span_deg * (t_s / day_length_s);
}

Vec3 SunEphemeris::direction(double t_s) const {
    const double el = deg_to_rad(elevation_deg(t_s));
    const double az = deg_to_rad(azimuth_deg(t_s));
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double SunEphemeris::clear_sky_ghi_wm2(double t_s) const {
    const double el = elevation_deg(t_s);
    if (el <= 0.0) return 0.0;
    return clear_sky_peak_wm2 * std::sin(deg_to_rad(el));
}

}  // namespace skylens::sim
