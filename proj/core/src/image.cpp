#include "skylens/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "skylens/errors.hpp"

namespace skylens {

double Image::sample_bilinear(double x, double y, int c) const {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double v00 = at(x0, y0, c);
    const double v10 = at(x1, y0, c);
    const double v01 = at(x0, y1, c);
    const double v11 = at(x1, y1, c);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

double Image::luminance(int x, int y) const {
    if (channels == 1) return at(x, y, 0);
    return 0.2126 * at(x, y, 0) + 0.7152 * at(x, y, 1) + 0.0722 * at(x, y, 2);
}

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
    throw IoError(what + ": " + path);
}

}  // namespace

void write_pfm(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("pfm supports 1 or 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) io_fail("open for write", path);
    f << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n"
      << "-1.0\n";
    // Bottom-to-top scanlines.
    for (int y = img.height - 1; y >= 0; --y) {
        const float* row = &img.data[static_cast<std::size_t>(y) * img.width * img.channels];
        f.write(reinterpret_cast<const char*>(row),
                static_cast<std::streamsize>(sizeof(float)) * img.width * img.channels);
    }
    if (!f) io_fail("write", path);
}

Image read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_fail("open for read", path);
    std::string magic;
    f >> magic;
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else io_fail("bad pfm magic", path);
    int w = 0, h = 0;
    double scale = 0.0;
    f >> w >> h >> scale;
    f.get();  // single whitespace after the header
    if (w <= 0 || h <= 0 || scale >= 0.0) io_fail("unsupported pfm header", path);
    Image img(w, h, channels);
    for (int y = h - 1; y >= 0; --y) {
        float* row = &img.data[static_cast<std::size_t>(y) * w * channels];
        f.read(reinterpret_cast<char*>(row),
               static_cast<std::streamsize>(sizeof(float)) * w * channels);
    }
    if (!f) io_fail("truncated pfm", path);
    return img;
}

void write_ppm_preview(const Image& img, const std::string& path, float exposure) {
    if (img.channels != 3) throw std::invalid_argument("ppm preview needs 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) io_fail("open for write", path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(img.at(x, y, c)) * exposure, 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(255.0 * std::pow(v, 1.0 / 2.2)));
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) io_fail("write", path);
}

void write_pgm_mask(const std::vector<std::uint8_t>& mask, int width, int height,
                    const std::string& path) {
    if (static_cast<std::size_t>(width) * height != mask.size())
        throw std::invalid_argument("mask size does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) io_fail("open for write", path);
    f << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x)
            row[x] = mask[static_cast<std::size_t>(y) * width + x] ? 255 : 0;
        f.write(reinterpret_cast<const char*>(row.data()), width);
    }
    if (!f) io_fail("write", path);
}

std::vector<std::uint8_t> read_pgm_mask(const std::string& path, int& width, int& height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) io_fail("open for read", path);
    std::string magic;
    int maxval = 0;
    f >> magic >> width >> height >> maxval;
    f.get();
    if (magic != "P5" || width <= 0 || height <= 0) io_fail("bad pgm header", path);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height);
    std::vector<unsigned char> row(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), width);
        for (int x = 0; x < width; ++x)
            mask[static_cast<std::size_t>(y) * width + x] = row[x] >= 128 ? 1 : 0;
    }
    if (!f) io_fail("truncated pgm", path);
    return mask;
}

}  // namespace skylens
