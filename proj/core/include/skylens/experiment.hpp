#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skylens/models.hpp"
#include "skylens/spacetime.hpp"

namespace skylens::harness {

// Day-granular train/test split (no intra-day leakage), deterministic in
// the seed.
struct DaySplit {
    std::vector<int> train;
    std::vector<int> test;
};
DaySplit split_days(int day_count, double train_fraction, std::uint64_t seed);

struct GhiSeries {
    double period_s = 30.0;
    std::vector<double> timestamps_s;
    std::vector<double> values_wm2;
};

// Everything the experiments need from one simulated day for one mirror.
struct SimDay {
    st::SpaceTimeImage slices;
    std::vector<std::uint8_t> occluded;  // per frame
    GhiSeries ghi;
    double clear_sky_peak_wm2 = 1050.0;
};

struct HorizonCell {
    double value = 0.0;
    long count = 0;
};

struct HorizonRow {
    std::string method;
    std::string mirror;
    std::string metric;  // "auc" or "nrmse"
    std::vector<std::optional<HorizonCell>> cells;  // one per horizon
};

struct HorizonTable {
    double period_s = 30.0;
    int horizon = 60;
    std::vector<HorizonRow> rows;

    int horizon_seconds(int k) const { return static_cast<int>(period_s) * (k + 1); }
    const HorizonRow* find(const std::string& method, const std::string& mirror) const;
};

// Schema: horizon_s,method,mirror,metric,value,count (absent cells omitted).
void save_horizon_table(const HorizonTable& table, const std::string& path);
HorizonTable load_horizon_table(const std::string& path);

// Plot-ready SVG line chart of the table (one polyline per method/mirror).
void write_horizon_chart_svg(const HorizonTable& table, const std::string& path,
                             const std::string& y_label);

struct SimExperimentConfig {
    int past_window = 47;   // frames of history (tau_max); CNN rows = past_window+1
    int horizon = 60;
    int anchor_stride = 10;
    double train_fraction = 0.75;
    std::uint64_t seed = 1;
    bool run_backprojection = true;
    bool run_cnn = true;
    int cnn_epochs = 10;
    double cnn_learning_rate = 1e-3;
    int cnn_batch = 16;
    st::ThetaSweepParams sweep;
};

// Occlusion experiment over one mirror's day set: calibrates the
// back-projection threshold and trains the CNN on the train split only,
// then reports AUC per horizon on the test split.
struct SimExperimentResult {
    HorizonTable table;
    double threshold = 0.0;
    DaySplit split;
};
SimExperimentResult run_sim_experiment(const std::vector<SimDay>& days,
                                       const std::string& mirror_name,
                                       const SimExperimentConfig& config);

struct GhiExperimentConfig {
    int history = 60;
    int horizon = 60;
    int image_half_rows = 40;  // crop of the slice stack fed to the encoder
    int anchor_stride = 10;
    double train_fraction = 0.75;
    std::uint64_t seed = 1;
    int pretrain_epochs = 12;
    int finetune_epochs = 12;
    nn::GhiModelConfig model;  // image_rows/cols and horizon are overwritten
};

struct GhiExperimentResult {
    HorizonTable table;  // rows: persistence and transformer
    DaySplit split;
    std::vector<double> pretrain_curve;
    std::vector<double> finetune_curve;
};
GhiExperimentResult run_ghi_experiment(const std::vector<SimDay>& days,
                                       const std::string& mirror_name,
                                       const GhiExperimentConfig& config);

// Bounded image intensity for model inputs.
inline float model_intensity(float v) { return v / (1.0f + std::max(v, 0.0f)); }

// Builds the CNN training/evaluation sample for one anchor: the sheared
// window RGB (invalid cells zero), bounded, plus the occlusion targets.
std::optional<nn::ForecastSample> make_occlusion_sample(const SimDay& day, int anchor,
                                                        int past_window, int horizon,
                                                        double theta_deg);

// Raw slice-window sample for the GHI model; nullopt when any needed slice
// cell is invalid or the series is out of range.
std::optional<nn::ForecastSample> make_ghi_sample(const SimDay& day, int anchor, int history,
                                                  int horizon, int image_half_rows);

}  // namespace skylens::harness
