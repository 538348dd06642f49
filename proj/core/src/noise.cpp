#include "skylens/noise.hpp"

#include <cmath>

#include "skylens/rng.hpp"

namespace skylens {

namespace {

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = seed;
    h = mix_u64(h ^ (static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL));
    h = mix_u64(h ^ (static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace

double value_noise(std::uint64_t seed, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const std::int64_t ix = static_cast<std::int64_t>(fx);
    const std::int64_t iy = static_cast<std::int64_t>(fy);
    const double tx = quintic(x - fx);
    const double ty = quintic(y - fy);

    const double v00 = lattice_value(seed, ix, iy);
    const double v10 = lattice_value(seed, ix + 1, iy);
    const double v01 = lattice_value(seed, ix, iy + 1);
    const double v11 = lattice_value(seed, ix + 1, iy + 1);

    const double a = v00 + tx * (v10 - v00);
    const double b = v01 + tx * (v11 - v01);
    return a + ty * (b - a);
}

double fractal_noise(std::uint64_t seed, double x, double y, int octaves, double gain,
                     double lacunarity) {
    double sum = 0.0;
    double amp = 1.0;
    double norm = 0.0;
    double fx = x, fy = y;
    for (int o = 0; o < octaves; ++o) {
        sum += amp * value_noise(seed + static_cast<std::uint64_t>(o) * 0x9E3779B9ULL, fx, fy);
        norm += amp;
        amp *= gain;
        fx *= lacunarity;
        fy *= lacunarity;
    }
    return norm > 0.0 ? sum / norm : 0.0;
}

}  // namespace skylens
