#include "skylens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "skylens/errors.hpp"

namespace fs = std::filesystem;

namespace skylens::harness {

double upwind_image_angle_deg(double wind_x_mps, double wind_y_mps) {
    return wrap_degrees(rad_to_deg(std::atan2(-wind_y_mps, -wind_x_mps)));
}

st::SpaceTimeImage build_day_slices(const std::vector<sim::SkyFrame>& frames,
                                    double theta_image_deg, const SliceOptions& options,
                                    double period_s) {
    std::vector<st::FrameSliceInput> inputs;
    inputs.reserve(frames.size());
    for (const auto& f : frames) {
        st::FrameSliceInput in;
        in.image = &f.hdr;
        in.sky_mask = &f.sky_mask;
        in.sun_pixel = f.sun_pixel;
        in.timestamp_s = f.timestamp_s;
        inputs.push_back(in);
    }
    return st::build_spacetime(inputs, theta_image_deg, options.half_length, options.band_width,
                               period_s);
}

std::vector<std::string> list_day_directories(const std::string& root) {
    if (!fs::is_directory(root)) throw IoError("data root is not a directory: " + root);
    std::vector<std::string> days;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("day", 0) == 0) days.push_back(entry.path().string());
    }
    std::sort(days.begin(), days.end());
    if (days.empty()) throw IoError("no dayNN directories under " + root);
    return days;
}

SimDay load_sim_day(const std::string& day_dir, const std::string& mirror_name) {
    const std::string manifest_path = (fs::path(day_dir) / (mirror_name + ".csv")).string();
    const sim::DatasetManifest manifest = sim::load_manifest(manifest_path);

    SimDay day;
    day.slices = st::load_spacetime((fs::path(day_dir) / (mirror_name + ".slices")).string());
    day.clear_sky_peak_wm2 = manifest.clear_sky_peak_wm2 > 0.0 ? manifest.clear_sky_peak_wm2 : 1050.0;
    day.ghi.period_s = manifest.period_s;
    day.occluded.reserve(manifest.frames.size());
    for (const auto& f : manifest.frames) {
        day.occluded.push_back(f.occluded ? 1 : 0);
        day.ghi.timestamps_s.push_back(f.timestamp_s);
        day.ghi.values_wm2.push_back(f.ghi_wm2);
    }
    if (day.slices.cols() != static_cast<int>(day.occluded.size()))
        throw IoError("slice stack and manifest disagree on frame count: " + day_dir);
    return day;
}

std::vector<SimDay> load_sim_days(const std::string& root, const std::string& mirror_name) {
    std::vector<SimDay> days;
    for (const auto& dir : list_day_directories(root)) days.push_back(load_sim_day(dir, mirror_name));
    return days;
}

std::vector<std::uint8_t> derive_static_mask(const Image& frame) {
    // The renderer paints non-sky pixels with fixed border/ground colors.
    auto close = [](float v, double target) { return std::abs(v - target) < 5e-3; };
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(frame.width) * frame.height, 0);
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x) {
            const float r = frame.at(x, y, 0), g = frame.at(x, y, 1), b = frame.at(x, y, 2);
            const bool border = close(r, 0.030) && close(g, 0.030) && close(b, 0.032);
            const bool ground = close(r, 0.100) && close(g, 0.085) && close(b, 0.075);
            if (border || ground) mask[static_cast<std::size_t>(y) * frame.width + x] = 1;
        }
    return mask;
}

}  // namespace skylens::harness
