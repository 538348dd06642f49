#include "skylens/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"
#include "skylens/rng.hpp"

namespace fs = std::filesystem;

namespace skylens::sim {

void DatasetManifest::validate() const {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const double dt = frames[i].timestamp_s - frames[i - 1].timestamp_s;
        if (!(dt > 0.0) || std::abs(dt - period_s) > 1e-6)
            throw std::invalid_argument("manifest timestamps must increase in steps of the period");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].path.empty()) continue;
        if (!fs::exists(frame_path(i)))
            throw IoError("manifest references missing frame: " + frame_path(i));
    }
}

std::string DatasetManifest::frame_path(std::size_t index) const {
    const auto& p = frames.at(index).path;
    if (p.empty()) return {};
    if (directory.empty()) return p;
    return (fs::path(directory) / p).string();
}

void save_manifest(const DatasetManifest& manifest, const std::string& csv_path) {
    CsvTable t;
    t.header = {"path", "timestamp_s", "sun_x", "sun_y", "occluded", "ghi"};
    t.rows.reserve(manifest.frames.size());
    for (const auto& f : manifest.frames) {
        std::vector<std::string> row(6);
        row[0] = f.path;
        row[1] = format_double(f.timestamp_s, 10);
        row[2] = f.sun_pixel ? format_double(f.sun_pixel->x, 8) : "";
        row[3] = f.sun_pixel ? format_double(f.sun_pixel->y, 8) : "";
        row[4] = f.occluded ? "1" : "0";
        row[5] = format_double(f.ghi_wm2, 8);
        t.rows.push_back(std::move(row));
    }
    write_csv(t, csv_path);

    CsvTable meta;
    meta.header = {"key", "value"};
    meta.rows = {
        {"scene_seed", std::to_string(manifest.scene_seed)},
        {"mirror", mirror::to_string(manifest.mirror_kind)},
        {"period_s", format_double(manifest.period_s, 10)},
        {"resolution", std::to_string(manifest.resolution)},
        {"wind_x_mps", format_double(manifest.wind_x_mps, 10)},
        {"wind_y_mps", format_double(manifest.wind_y_mps, 10)},
        {"clear_sky_peak_wm2", format_double(manifest.clear_sky_peak_wm2, 10)},
    };
    write_csv(meta, csv_path + ".meta");
}

DatasetManifest load_manifest(const std::string& csv_path) {
    const CsvTable t = read_csv(csv_path);
    DatasetManifest m;
    m.directory = fs::path(csv_path).parent_path().string();
    const int cp = t.column("path"), ct = t.column("timestamp_s"), cx = t.column("sun_x"),
              cy = t.column("sun_y"), co = t.column("occluded"), cg = t.column("ghi");
    if (cp < 0 || ct < 0 || cx < 0 || cy < 0 || co < 0 || cg < 0)
        throw IoError("manifest csv missing required columns: " + csv_path);
    for (const auto& row : t.rows) {
        FrameRecord f;
        f.path = row[cp];
        f.timestamp_s = std::stod(row[ct]);
        if (!row[cx].empty() && !row[cy].empty())
            f.sun_pixel = Vec2{std::stod(row[cx]), std::stod(row[cy])};
        f.occluded = row[co] == "1";
        f.ghi_wm2 = std::stod(row[cg]);
        m.frames.push_back(std::move(f));
    }

    const std::string meta_path = csv_path + ".meta";
    if (fs::exists(meta_path)) {
        const CsvTable meta = read_csv(meta_path);
        for (const auto& row : meta.rows) {
            if (row.size() < 2) continue;
            if (row[0] == "scene_seed") m.scene_seed = std::stoull(row[1]);
            else if (row[0] == "mirror") m.mirror_kind = mirror::mirror_kind_from_string(row[1]);
            else if (row[0] == "period_s") m.period_s = std::stod(row[1]);
            else if (row[0] == "resolution") m.resolution = std::stoi(row[1]);
            else if (row[0] == "wind_x_mps") m.wind_x_mps = std::stod(row[1]);
            else if (row[0] == "wind_y_mps") m.wind_y_mps = std::stod(row[1]);
            else if (row[0] == "clear_sky_peak_wm2") m.clear_sky_peak_wm2 = std::stod(row[1]);
        }
    }
    return m;
}

DayScene randomize_day_scene(std::uint64_t master_seed, int day_index) {
    Rng rng = Rng(master_seed).fork(static_cast<std::uint64_t>(day_index) + 0x5A17ULL);
    DayScene scene;

    scene.clouds.seed = rng.next_u64();
    scene.clouds.octaves = 4;
    scene.clouds.base_scale_m = rng.uniform(2500.0, 5000.0);
    scene.clouds.gain = rng.uniform(0.45, 0.55);
    scene.clouds.lacunarity = 2.0;
    scene.clouds.coverage_threshold = rng.uniform(0.42, 0.58);
    scene.clouds.softness = rng.uniform(0.10, 0.20);
    const double wind_speed = rng.uniform(8.0, 16.0);
    const double wind_dir = rng.uniform(0.0, 2.0 * kPi);
    scene.clouds.wind_x_mps = wind_speed * std::cos(wind_dir);
    scene.clouds.wind_y_mps = wind_speed * std::sin(wind_dir);
    scene.clouds.height_m = 1500.0;

    scene.sun.peak_elevation_deg = rng.uniform(40.0, 70.0);
    scene.sun.min_elevation_deg = rng.uniform(7.0, 10.0);
    scene.sun.azimuth_start_deg = rng.uniform(0.0, 360.0);
    scene.sun.azimuth_span_deg = rng.uniform(140.0, 180.0);
    scene.sun.clear_sky_peak_wm2 = rng.uniform(1000.0, 1100.0);
    scene.sun.diffuse_fraction = rng.uniform(0.12, 0.28);
    return scene;
}

std::vector<DatasetManifest> simulate_day(
    const std::vector<const mirror::MirrorProfile*>& mirrors,
    const mirror::OpticalConfig& config, const DayScene& scene, const SimOptions& options,
    const FrameCallback& callback) {
    if (mirrors.empty()) throw std::invalid_argument("at least one mirror is required");
    if (!(options.period_s > 0.0)) throw std::invalid_argument("period must be positive");
    if ((options.store_frames || options.store_previews) && options.out_dir.empty())
        throw std::invalid_argument("out_dir required when storing frames");

    const int frame_count = static_cast<int>(std::llround(options.day_length_s / options.period_s)) + 1;

    const CloudScene cloud_scene{scene.clouds, scene.sun};
    std::vector<DatasetManifest> manifests;
    manifests.reserve(mirrors.size());

    for (const mirror::MirrorProfile* profile : mirrors) {
        const RadialCamera camera(*profile, config);
        DatasetManifest m;
        m.scene_seed = scene.clouds.seed;
        m.mirror_kind = profile->kind;
        m.period_s = options.period_s;
        m.resolution = options.resolution;
        m.wind_x_mps = scene.clouds.wind_x_mps;
        m.wind_y_mps = scene.clouds.wind_y_mps;
        m.clear_sky_peak_wm2 = scene.sun.clear_sky_peak_wm2;

        fs::path kind_dir;
        if (options.store_frames || options.store_previews) {
            kind_dir = fs::path(options.out_dir) / options.day_tag / mirror::to_string(profile->kind);
            std::error_code ec;
            fs::create_directories(kind_dir, ec);
            if (ec) throw IoError("cannot create " + kind_dir.string() + ": " + ec.message());
            m.directory = (fs::path(options.out_dir) / options.day_tag).string();
        }

        for (int i = 0; i < frame_count; ++i) {
            const double t = i * options.period_s;
            SkyFrame frame =
                render_frame(camera, cloud_scene, t, options.resolution, options.supersample,
                             profile->kind);
            FrameRecord rec;
            rec.timestamp_s = t;
            rec.sun_pixel = frame.sun_pixel;
            rec.occluded = frame.occluded;
            rec.ghi_wm2 = frame.ghi_wm2;
            if (options.store_frames) {
                char name[64];
                std::snprintf(name, sizeof(name), "frame_%05d.pfm", i);
                rec.path = (fs::path(mirror::to_string(profile->kind)) / name).string();
                write_pfm(frame.hdr, (kind_dir / name).string());
            }
            if (options.store_previews) {
                char name[64];
                std::snprintf(name, sizeof(name), "frame_%05d.ppm", i);
                write_ppm_preview(frame.hdr, (kind_dir / name).string());
            }
            if (callback) callback(profile->kind, i, frame);
            m.frames.push_back(std::move(rec));
        }
        manifests.push_back(std::move(m));
    }
    return manifests;
}

}  // namespace skylens::sim
