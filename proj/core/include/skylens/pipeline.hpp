#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skylens/dataset.hpp"
#include "skylens/experiment.hpp"
#include "skylens/preprocess.hpp"
#include "skylens/spacetime.hpp"

namespace skylens::harness {

// Slice-stack construction parameters shared by the generator and loaders.
struct SliceOptions {
    int half_length = 120;
    int band_width = 3;
};

// Image-plane direction (degrees) that points upwind, i.e. where clouds
// arriving at the sun come from.
double upwind_image_angle_deg(double wind_x_mps, double wind_y_mps);

// Builds the sun-centered slice stack for one rendered day using the
// simulator's ground truth (sun pixel per frame, wind direction).
st::SpaceTimeImage build_day_slices(const std::vector<sim::SkyFrame>& frames,
                                    double theta_image_deg, const SliceOptions& options,
                                    double period_s);

// Day directory layout: <root>/dayNN/<mirror>.csv (+ .meta) and
// <root>/dayNN/<mirror>.slices.{pfm,mask.pgm,csv}.
std::vector<std::string> list_day_directories(const std::string& root);
SimDay load_sim_day(const std::string& day_dir, const std::string& mirror_name);
std::vector<SimDay> load_sim_days(const std::string& root, const std::string& mirror_name);

// Static-region mask for preprocess: pixels rendered with the border or
// below-horizon colors (everything that is not sky).
std::vector<std::uint8_t> derive_static_mask(const Image& frame);

}  // namespace skylens::harness
