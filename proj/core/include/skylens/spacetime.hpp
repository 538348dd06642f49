#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skylens/geometry.hpp"
#include "skylens/image.hpp"

namespace skylens::st {

// Cloud/sky chromatic contrast: (B - R) / (B + R), 0 when both channels
// vanish. Clouds are neutral (near 0), clear sky is blue (positive).
double red_blue_ratio(double r, double b);

// One sun-centered slice sample: mean RGB over band_width points placed
// perpendicular to the slice direction.
struct SliceSample {
    float r = 0.0f, g = 0.0f, b = 0.0f;
    bool valid = false;
};

// Samples frame intensities along sun + d*(cos theta, sin theta) for
// d in [-L, L] (positive d points upwind). A sample whose footprint leaves
// the image, or lands on non-sky pixels when a mask is present, is invalid.
std::vector<SliceSample> extract_slice(const Image& frame,
                                       const std::vector<std::uint8_t>* sky_mask, Vec2 sun_pixel,
                                       double theta_image_deg, int half_length, int band_width);

// Per-day stack of slices: column f holds frame f's slice, row index
// L + offset. Invalid samples carry an explicit flag.
struct SpaceTimeImage {
    int half_length = 0;       // L
    int band_width = 1;        // b
    double theta_image_deg = 0.0;
    double period_s = 30.0;
    std::vector<double> timestamps;
    std::vector<float> rgb;            // rows x cols x 3
    std::vector<std::uint8_t> valid;   // rows x cols

    int rows() const { return 2 * half_length + 1; }
    int cols() const { return static_cast<int>(timestamps.size()); }

    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * cols() + col;
    }
    bool is_valid(int row, int col) const { return valid[index(row, col)] != 0; }
    void set(int row, int col, const SliceSample& s);
};

// Builds the stack from per-frame images; frames without a sun position get
// an all-invalid column.
struct FrameSliceInput {
    const Image* image = nullptr;
    const std::vector<std::uint8_t>* sky_mask = nullptr;
    std::optional<Vec2> sun_pixel;
    double timestamp_s = 0.0;
};
SpaceTimeImage build_spacetime(const std::vector<FrameSliceInput>& frames, double theta_image_deg,
                               int half_length, int band_width, double period_s);

// Persist as PFM (rows x cols, 3 channels) + PGM validity + CSV metadata.
void save_spacetime(const SpaceTimeImage& st, const std::string& base_path);
SpaceTimeImage load_spacetime(const std::string& base_path);

// Back-projection window: V(row t, column c) samples the space-time image
// at (frame t, spatial offset (c - t) * tan(theta)), i.e. the position a
// cloud occluding the sun at time c had at the earlier time t.
struct ShearedWindow {
    int anchor = 0;       // T, absolute frame index
    int past_window = 0;  // tau_max
    int horizon = 0;      // N
    double streak_tan = 0.0;
    std::vector<float> rgb;           // rows x cols x 3; rows = tau_max+1
    std::vector<std::uint8_t> valid;  // rows x cols

    int rows() const { return past_window + 1; }
    int cols() const { return past_window + horizon + 1; }
    int col_of_frame(int absolute_frame) const { return absolute_frame - (anchor - past_window); }
};

ShearedWindow shear(const SpaceTimeImage& st, double theta_deg, int anchor, int past_window,
                    int horizon);

struct ThetaSweepParams {
    double start_deg = 60.0;
    double stop_deg = 85.0;
    double step_deg = 1.0;
    int min_valid_per_column = 5;
};

// Streak angle minimizing the mean per-column standard deviation of the
// blue-red ratio over the sheared window; ties resolve to the smaller angle.
double optimal_theta(const SpaceTimeImage& st, int anchor, int past_window, int horizon,
                     const ThetaSweepParams& params = {});

// Mean blue-red ratio per occlusion-time column of a sheared window.
struct RatioTrace {
    int anchor = 0;
    int past_window = 0;
    int horizon = 0;
    std::vector<double> value;      // per column; meaningful when count >= min
    std::vector<int> valid_count;   // per column
};

RatioTrace ratio_trace(const ShearedWindow& window);

struct BackprojectionResult {
    double theta_deg = 0.0;
    RatioTrace trace;
    std::vector<double> horizon_score;   // per horizon 1..N, persistence-filled
    std::vector<std::uint8_t> occluded;  // per horizon 1..N
    std::vector<std::uint8_t> defined;   // 0 where the column had to persist
};

// Non-learning occlusion prediction: pick theta, build the trace, and call
// a dip below the threshold an occlusion. Columns without enough support
// persist the last defined horizon's state.
BackprojectionResult backproject_predict(const SpaceTimeImage& st, int anchor, int past_window,
                                         int horizon, double threshold,
                                         const ThetaSweepParams& params = {});

// Threshold maximizing Youden's J on labeled trace values (label true =
// occluded; occlusion predicted when score < threshold). Ties take the
// lower threshold.
double calibrate_threshold(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

}  // namespace skylens::st
