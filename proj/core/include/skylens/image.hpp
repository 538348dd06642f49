#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace skylens {

// Row-major interleaved float raster. Row 0 is the top scanline; pixel
// centers sit at (x + 0.5, y + 0.5) in pixel coordinates.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    float& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool in_bounds(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
    }

    // Bilinear sample in pixel-index coordinates (0..width-1). Caller must
    // check in_bounds first.
    double sample_bilinear(double x, double y, int c) const;

    double luminance(int x, int y) const;
};

// PFM: binary portable float map, little-endian (negative scale), scanlines
// stored bottom-to-top as in the de-facto standard. 'PF' for 3 channels,
// 'Pf' for 1.
void write_pfm(const Image& img, const std::string& path);
Image read_pfm(const std::string& path);

// 8-bit preview: gamma 2.2 after clamping to [0,1]. P6 for 3 channels.
void write_ppm_preview(const Image& img, const std::string& path, float exposure = 1.0f);

// Binary P5 mask, 0 or 255 per pixel.
void write_pgm_mask(const std::vector<std::uint8_t>& mask, int width, int height,
                    const std::string& path);
std::vector<std::uint8_t> read_pgm_mask(const std::string& path, int& width, int& height);

}  // namespace skylens
