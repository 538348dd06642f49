#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skylens/mirror.hpp"
#include "skylens/render.hpp"

namespace skylens::sim {

struct FrameRecord {
    std::string path;  // relative to the manifest; empty when frames are not stored
    double timestamp_s = 0.0;
    std::optional<Vec2> sun_pixel;
    bool occluded = false;
    double ghi_wm2 = 0.0;
};

struct DatasetManifest {
    std::vector<FrameRecord> frames;
    std::uint64_t scene_seed = 0;
    mirror::MirrorKind mirror_kind = mirror::MirrorKind::Designed;
    double period_s = 30.0;
    int resolution = 256;
    double wind_x_mps = 0.0;  // scene wind, carried for ground-truth slicing
    double wind_y_mps = 0.0;
    double clear_sky_peak_wm2 = 0.0;

    std::string directory;  // set on load/save; base for relative paths

    void validate() const;  // timestamp spacing and referenced-file existence
    std::string frame_path(std::size_t index) const;
};

// Manifest CSV schema: path,timestamp_s,sun_x,sun_y,occluded,ghi with one
// row per frame; scene metadata rides in a sidecar JSON next to it.
void save_manifest(const DatasetManifest& manifest, const std::string& csv_path);
DatasetManifest load_manifest(const std::string& csv_path);

struct DayScene {
    CloudField clouds;
    SunEphemeris sun;
};

// Per-day randomization: wind, coverage, softness, feature scale, sun arc.
DayScene randomize_day_scene(std::uint64_t master_seed, int day_index);

struct SimOptions {
    int resolution = 256;
    int supersample = 1;
    double period_s = 30.0;
    double day_length_s = 32400.0;  // 08:00 to 17:00
    bool store_frames = false;      // write per-frame PFM files
    bool store_previews = false;    // write 8-bit PPM previews
    std::string out_dir;            // required when storing
    std::string day_tag;            // e.g. "day01"
};

using FrameCallback =
    std::function<void(mirror::MirrorKind kind, int frame_index, const SkyFrame& frame)>;

// Renders one full day for each mirror from the identical scene; frames are
// generated at period_s from the window open to close (inclusive). Returns
// one manifest per mirror, in input order. The callback (when set) receives
// every frame and may be used to build slices without storing rasters.
std::vector<DatasetManifest> simulate_day(
    const std::vector<const mirror::MirrorProfile*>& mirrors,
    const mirror::OpticalConfig& config, const DayScene& scene, const SimOptions& options,
    const FrameCallback& callback = nullptr);

}  // namespace skylens::sim
