#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skylens/geometry.hpp"
#include "skylens/image.hpp"

namespace skylens::prep {

// Centroid of the largest saturated blob, or nullopt when nothing saturates
// (absence is a value: an occluded sun is not an error).
std::optional<Vec2> detect_sun(const Image& short_exposure, double saturation_level,
                               int min_blob_px);

struct SunDetection {
    double t_s;
    double x;
    double y;
};

struct RansacParams {
    int iterations = 500;
    double inlier_tol_px = 3.0;
    double min_inlier_fraction = 0.5;
    std::uint64_t seed = 1;
};

// Polynomial sun track x(t), y(t) with RANSAC outlier rejection. Occluded
// gaps are filled by evaluating the fitted polynomials.
struct SunTrack {
    int degree = 2;
    // Coefficients over the normalized time s = 2*(t - t0)/(t1 - t0) - 1.
    std::vector<double> coeff_x;
    std::vector<double> coeff_y;
    double t0 = 0.0;
    double t1 = 1.0;
    std::vector<std::uint8_t> inlier;  // per input detection
    double inlier_fraction = 0.0;
    bool degenerate = false;  // rank-deficient fit (e.g. collinear detections)

    Vec2 eval(double t_s) const;
};

SunTrack fit_sun_track(const std::vector<SunDetection>& detections, int degree,
                       const RansacParams& params);

void save_sun_track_csv(const SunTrack& track, const std::string& path);
SunTrack load_sun_track_csv(const std::string& path);

// Dense displacement for a frame pair, px/frame.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> dx;
    std::vector<double> dy;
    std::vector<std::uint8_t> valid;  // 0 on statically masked pixels
    bool converged = true;

    Vec2 at(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        return {dx[i], dy[i]};
    }
};

struct FlowParams {
    double smoothness = 50.0;  // quadratic regularization weight
    int pyramid_levels = 4;
    int iterations_per_level = 300;
    double tolerance = 1e-4;
};

// Coarse-to-fine variational flow (brightness constancy + quadratic
// smoothness). Masked pixels contribute no data term and are zero-filled in
// the output.
FlowField estimate_flow(const Image& frame_a, const Image& frame_b,
                        const std::vector<std::uint8_t>* static_mask, const FlowParams& params);

struct WindEstimate {
    double direction_deg = 0.0;   // image-plane direction of cloud motion, [0, 360)
    double speed_px_per_frame = 0.0;
    double confidence = 0.0;      // 0 when no moving pixels were found
    bool estimable = false;
};

// Magnitude-weighted circular mean per frame, then a componentwise temporal
// median over the trailing window.
WindEstimate estimate_wind(const std::vector<FlowField>& flows,
                           const std::vector<std::uint8_t>* static_mask, int median_window,
                           double noise_floor_px = 0.1);

void save_wind_csv(const WindEstimate& wind, const std::string& path);
WindEstimate load_wind_csv(const std::string& path);

}  // namespace skylens::prep
