#pragma once

#include <cstdint>

namespace skylens {

// Deterministic 2-D value noise: hashed lattice values with quintic-smoothed
// bilinear interpolation. Integer hashing only, so results are bit-identical
// for a given seed.
double value_noise(std::uint64_t seed, double x, double y);

// Fractal sum of value_noise octaves, normalized to [0, 1).
double fractal_noise(std::uint64_t seed, double x, double y, int octaves, double gain,
                     double lacunarity);

}  // namespace skylens
