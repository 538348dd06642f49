#include "skylens/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"
#include "skylens/metrics.hpp"
#include "skylens/rng.hpp"

namespace skylens::harness {

DaySplit split_days(int day_count, double train_fraction, std::uint64_t seed) {
    if (day_count < 2) throw std::invalid_argument("need at least 2 days to split");
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    std::vector<int> order(static_cast<std::size_t>(day_count));
    for (int i = 0; i < day_count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed ^ 0x5B17DA75ULL);
    rng.shuffle(order);
    const int n_train = std::clamp(
        static_cast<int>(std::floor(train_fraction * day_count + 0.5)), 1, day_count - 1);
    DaySplit split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.test.assign(order.begin() + n_train, order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

const HorizonRow* HorizonTable::find(const std::string& method, const std::string& mirror) const {
    for (const auto& row : rows)
        if (row.method == method && row.mirror == mirror) return &row;
    return nullptr;
}

void save_horizon_table(const HorizonTable& table, const std::string& path) {
    CsvTable t;
    t.header = {"horizon_s", "method", "mirror", "metric", "value", "count"};
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.cells.size(); ++k) {
            if (!row.cells[k]) continue;
            t.rows.push_back({std::to_string(table.horizon_seconds(static_cast<int>(k))),
                              row.method, row.mirror, row.metric,
                              format_double(row.cells[k]->value, 8),
                              std::to_string(row.cells[k]->count)});
        }
    }
    write_csv(t, path);
}

HorizonTable load_horizon_table(const std::string& path) {
    const CsvTable t = read_csv(path);
    const int ch = t.column("horizon_s"), cm = t.column("method"), ci = t.column("mirror"),
              ck = t.column("metric"), cv = t.column("value"), cc = t.column("count");
    if (ch < 0 || cm < 0 || ci < 0 || ck < 0 || cv < 0 || cc < 0)
        throw IoError("horizon table missing columns: " + path);
    HorizonTable table;
    int max_h = 0;
    for (const auto& row : t.rows) max_h = std::max(max_h, std::stoi(row[ch]));
    // Recover the period from the smallest horizon (first row is horizon 1).
    int min_h = max_h;
    for (const auto& row : t.rows) min_h = std::min(min_h, std::stoi(row[ch]));
    table.period_s = min_h;
    table.horizon = max_h / std::max(min_h, 1);
    for (const auto& row : t.rows) {
        HorizonRow* target = nullptr;
        for (auto& r : table.rows)
            if (r.method == row[cm] && r.mirror == row[ci]) target = &r;
        if (!target) {
            table.rows.push_back({row[cm], row[ci], row[ck],
                                  std::vector<std::optional<HorizonCell>>(
                                      static_cast<std::size_t>(table.horizon))});
            target = &table.rows.back();
        }
        const int k = std::stoi(row[ch]) / std::max(min_h, 1) - 1;
        if (k >= 0 && k < static_cast<int>(target->cells.size()))
            target->cells[static_cast<std::size_t>(k)] =
                HorizonCell{std::stod(row[cv]), std::stol(row[cc])};
    }
    return table;
}

void write_horizon_chart_svg(const HorizonTable& table, const std::string& path,
                             const std::string& y_label) {
    const int width = 720, height = 420, margin = 60;
    const double plot_w = width - 2.0 * margin, plot_h = height - 2.0 * margin;

    double y_min = 1e300, y_max = -1e300;
    int max_k = 0;
    for (const auto& row : table.rows)
        for (std::size_t k = 0; k < row.cells.size(); ++k)
            if (row.cells[k]) {
                y_min = std::min(y_min, row.cells[k]->value);
                y_max = std::max(y_max, row.cells[k]->value);
                max_k = std::max(max_k, static_cast<int>(k) + 1);
            }
    if (max_k == 0) {
        y_min = 0.0;
        y_max = 1.0;
        max_k = 1;
    }
    const double pad = std::max(0.05 * (y_max - y_min), 0.01);
    y_min -= pad;
    y_max += pad;

    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                             "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ofstream f(path);
    if (!f) throw IoError("open for write: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' viewBox='0 0 " << width << " " << height << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    // Axes
    f << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
    f << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
    f << "<text x='" << width / 2 << "' y='" << height - 12
      << "' font-size='13' text-anchor='middle'>forecast horizon (s)</text>\n";
    f << "<text x='16' y='" << height / 2 << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
      << height / 2 << ")'>" << y_label << "</text>\n";

    auto sx = [&](double k) { return margin + plot_w * (k / static_cast<double>(max_k)); };
    auto sy = [&](double v) { return height - margin - plot_h * ((v - y_min) / (y_max - y_min)); };

    for (int tick = 0; tick <= 4; ++tick) {
        const double v = y_min + (y_max - y_min) * tick / 4.0;
        f << "<text x='" << margin - 8 << "' y='" << sy(v) + 4
          << "' font-size='11' text-anchor='end'>" << format_double(v, 3) << "</text>\n";
        f << "<line x1='" << margin << "' y1='" << sy(v) << "' x2='" << width - margin << "' y2='"
          << sy(v) << "' stroke='#dddddd'/>\n";
    }
    for (int tick = 0; tick <= 6; ++tick) {
        const double k = max_k * tick / 6.0;
        f << "<text x='" << sx(k) << "' y='" << height - margin + 18
          << "' font-size='11' text-anchor='middle'>"
          << static_cast<int>(k * table.period_s) << "</text>\n";
    }

    int color = 0;
    int legend_y = margin;
    for (const auto& row : table.rows) {
        std::string pts;
        for (std::size_t k = 0; k < row.cells.size(); ++k) {
            if (!row.cells[k]) continue;
            pts += std::to_string(sx(static_cast<double>(k + 1))) + "," +
                   std::to_string(sy(row.cells[k]->value)) + " ";
        }
        const char* c = palette[color % 8];
        f << "<polyline fill='none' stroke='" << c << "' stroke-width='2' points='" << pts
          << "'/>\n";
        f << "<rect x='" << width - margin - 180 << "' y='" << legend_y - 9
          << "' width='12' height='12' fill='" << c << "'/>\n";
        f << "<text x='" << width - margin - 162 << "' y='" << legend_y + 2 << "' font-size='12'>"
          << row.method << " / " << row.mirror << "</text>\n";
        legend_y += 18;
        ++color;
    }
    f << "</svg>\n";
    if (!f) throw IoError("write: " + path);
}

std::optional<nn::ForecastSample> make_occlusion_sample(const SimDay& day, int anchor,
                                                        int past_window, int horizon,
                                                        double theta_deg) {
    const int frames = day.slices.cols();
    if (anchor - past_window < 0 || anchor + horizon >= frames) return std::nullopt;
    // The anchor's own slice column must exist (sun located in that frame).
    bool anchor_has_data = false;
    for (int row = 0; row < day.slices.rows(); ++row)
        if (day.slices.is_valid(row, anchor)) {
            anchor_has_data = true;
            break;
        }
    if (!anchor_has_data) return std::nullopt;

    const st::ShearedWindow w = st::shear(day.slices, theta_deg, anchor, past_window, horizon);
    nn::ForecastSample sample;
    sample.anchor_t_s = day.slices.timestamps[static_cast<std::size_t>(anchor)];
    const int rows = w.rows(), cols = w.cols();
    // Channels: the cloud/sky ratio coordinate plus bounded red and blue.
    sample.image.assign(static_cast<std::size_t>(3) * rows * cols, 0.0f);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            if (!w.valid[i]) continue;  // invalid cells stay zero
            const float red = w.rgb[i * 3 + 0];
            const float blue = w.rgb[i * 3 + 2];
            sample.image[(static_cast<std::size_t>(0) * rows + r) * cols + c] =
                static_cast<float>(st::red_blue_ratio(red, blue));
            sample.image[(static_cast<std::size_t>(1) * rows + r) * cols + c] = model_intensity(red);
            sample.image[(static_cast<std::size_t>(2) * rows + r) * cols + c] = model_intensity(blue);
        }
    sample.targets.resize(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k)
        sample.targets[static_cast<std::size_t>(k - 1)] =
            day.occluded[static_cast<std::size_t>(anchor + k)] ? 1.0 : 0.0;
    return sample;
}

std::optional<nn::ForecastSample> make_ghi_sample(const SimDay& day, int anchor, int history,
                                                  int horizon, int image_half_rows) {
    const int frames = day.slices.cols();
    if (anchor - history + 1 < 0 || anchor + horizon >= frames) return std::nullopt;
    if (image_half_rows > day.slices.half_length) return std::nullopt;

    nn::ForecastSample sample;
    sample.anchor_t_s = day.slices.timestamps[static_cast<std::size_t>(anchor)];
    const int rows = 2 * image_half_rows + 1;
    const int cols = history;
    const int row0 = day.slices.half_length - image_half_rows;
    sample.image.assign(static_cast<std::size_t>(3) * rows * cols, 0.0f);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const int src_col = anchor - history + 1 + c;
            if (!day.slices.is_valid(row0 + r, src_col)) return std::nullopt;  // skip the window
            const std::size_t i = day.slices.index(row0 + r, src_col) * 3;
            for (int ch = 0; ch < 3; ++ch)
                sample.image[(static_cast<std::size_t>(ch) * rows + r) * cols + c] =
                    model_intensity(day.slices.rgb[i + ch]);
        }

    const double g0 = day.clear_sky_peak_wm2 > 0.0 ? day.clear_sky_peak_wm2 : 1.0;
    sample.ghi_history.resize(static_cast<std::size_t>(history));
    for (int c = 0; c < history; ++c)
        sample.ghi_history[static_cast<std::size_t>(c)] =
            day.ghi.values_wm2[static_cast<std::size_t>(anchor - history + 1 + c)] / g0;
    sample.targets.resize(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k)
        sample.targets[static_cast<std::size_t>(k - 1)] =
            day.ghi.values_wm2[static_cast<std::size_t>(anchor + k)] / g0;
    return sample;
}

namespace {

std::vector<int> anchors_for_day(const SimDay& day, int past, int horizon, int stride) {
    std::vector<int> anchors;
    const int frames = day.slices.cols();
    for (int a = past; a + horizon < frames; a += stride) anchors.push_back(a);
    return anchors;
}

struct ScorePool {
    // per horizon: scores + labels
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<std::uint8_t>> labels;
    explicit ScorePool(int horizon)
        : scores(static_cast<std::size_t>(horizon)), labels(static_cast<std::size_t>(horizon)) {}
    void add(int k, double score, bool label) {
        scores[static_cast<std::size_t>(k)].push_back(score);
        labels[static_cast<std::size_t>(k)].push_back(label ? 1 : 0);
    }
};

HorizonRow pool_to_auc_row(const ScorePool& pool, const std::string& method,
                           const std::string& mirror, int horizon) {
    HorizonRow row{method, mirror, "auc",
                   std::vector<std::optional<HorizonCell>>(static_cast<std::size_t>(horizon))};
    for (int k = 0; k < horizon; ++k) {
        const auto& s = pool.scores[static_cast<std::size_t>(k)];
        const auto& l = pool.labels[static_cast<std::size_t>(k)];
        long pos = 0;
        for (const auto v : l) pos += v;
        if (s.size() < 8 || pos == 0 || pos == static_cast<long>(l.size())) continue;  // absent
        row.cells[static_cast<std::size_t>(k)] =
            HorizonCell{roc_auc(s, l).auc, static_cast<long>(s.size())};
    }
    return row;
}

}  // namespace

SimExperimentResult run_sim_experiment(const std::vector<SimDay>& days,
                                       const std::string& mirror_name,
                                       const SimExperimentConfig& config) {
    if (days.size() < 4) throw std::invalid_argument("need at least 4 days per split");
    SimExperimentResult result;
    result.split = split_days(static_cast<int>(days.size()), config.train_fraction, config.seed);

    const int past = config.past_window;
    const int horizon = config.horizon;

    // --- training split: theta + traces for calibration, CNN samples ------
    std::vector<double> calib_scores;
    std::vector<std::uint8_t> calib_labels;
    std::vector<nn::ForecastSample> train_samples;
    std::vector<double> train_thetas;

    for (const int di : result.split.train) {
        const SimDay& day = days[static_cast<std::size_t>(di)];
        for (const int anchor : anchors_for_day(day, past, horizon, config.anchor_stride)) {
            double theta;
            try {
                theta = st::optimal_theta(day.slices, anchor, past, horizon, config.sweep);
            } catch (const EstimationError&) {
                continue;
            }
            const st::ShearedWindow w = st::shear(day.slices, theta, anchor, past, horizon);
            const st::RatioTrace trace = st::ratio_trace(w);
            for (int k = 1; k <= horizon; ++k) {
                const int col = w.col_of_frame(anchor + k);
                if (trace.valid_count[static_cast<std::size_t>(col)] <
                    config.sweep.min_valid_per_column)
                    continue;
                calib_scores.push_back(trace.value[static_cast<std::size_t>(col)]);
                calib_labels.push_back(day.occluded[static_cast<std::size_t>(anchor + k)] ? 1 : 0);
            }
            if (config.run_cnn) {
                auto sample = make_occlusion_sample(day, anchor, past, horizon, theta);
                if (sample) {
                    train_samples.push_back(std::move(*sample));
                    train_thetas.push_back(theta);
                }
            }
        }
    }

    if (config.run_backprojection) {
        result.threshold = st::calibrate_threshold(calib_scores, calib_labels);
    }

    std::unique_ptr<nn::CnnMlpOcclusion> cnn;
    if (config.run_cnn) {
        nn::OcclusionModelConfig mc;
        mc.window_rows = past + 1;
        mc.window_cols = past + horizon + 1;
        mc.horizon = horizon;
        mc.epochs = config.cnn_epochs;
        mc.learning_rate = config.cnn_learning_rate;
        mc.batch_size = config.cnn_batch;
        mc.seed = config.seed ^ 0xCC17ULL;
        cnn = std::make_unique<nn::CnnMlpOcclusion>(mc);
        if (train_samples.empty()) throw EstimationError("no usable training anchors");
        cnn->train(train_samples);
    }

    // --- test split ---------------------------------------------------------
    ScorePool back_pool(horizon), cnn_pool(horizon);
    for (const int di : result.split.test) {
        const SimDay& day = days[static_cast<std::size_t>(di)];
        for (const int anchor : anchors_for_day(day, past, horizon, config.anchor_stride)) {
            double theta;
            try {
                theta = st::optimal_theta(day.slices, anchor, past, horizon, config.sweep);
            } catch (const EstimationError&) {
                continue;
            }
            if (config.run_backprojection) {
                const st::ShearedWindow w = st::shear(day.slices, theta, anchor, past, horizon);
                const st::RatioTrace trace = st::ratio_trace(w);
                double last = 0.0;
                bool have = false;
                const int anchor_col = w.col_of_frame(anchor);
                if (trace.valid_count[static_cast<std::size_t>(anchor_col)] >=
                    config.sweep.min_valid_per_column) {
                    last = trace.value[static_cast<std::size_t>(anchor_col)];
                    have = true;
                }
                for (int k = 1; k <= horizon; ++k) {
                    const int col = w.col_of_frame(anchor + k);
                    if (trace.valid_count[static_cast<std::size_t>(col)] >=
                        config.sweep.min_valid_per_column) {
                        last = trace.value[static_cast<std::size_t>(col)];
                        have = true;
                    }
                    if (!have) continue;  // nothing to persist yet
                    back_pool.add(k - 1, last,
                                  day.occluded[static_cast<std::size_t>(anchor + k)] != 0);
                }
            }
            if (config.run_cnn) {
                auto sample = make_occlusion_sample(day, anchor, past, horizon, theta);
                if (!sample) continue;
                const auto probs = cnn->predict(*sample);
                for (int k = 0; k < horizon; ++k)
                    cnn_pool.add(k, -probs[static_cast<std::size_t>(k)],
                                 day.occluded[static_cast<std::size_t>(anchor + k + 1)] != 0);
            }
        }
    }

    result.table.period_s = days.front().ghi.period_s;
    result.table.horizon = horizon;
    if (config.run_backprojection)
        result.table.rows.push_back(pool_to_auc_row(back_pool, "backprojection", mirror_name,
                                                    horizon));
    if (config.run_cnn)
        result.table.rows.push_back(pool_to_auc_row(cnn_pool, "cnn-mlp", mirror_name, horizon));
    return result;
}

GhiExperimentResult run_ghi_experiment(const std::vector<SimDay>& days,
                                       const std::string& mirror_name,
                                       const GhiExperimentConfig& config) {
    if (days.size() < 4) throw std::invalid_argument("need at least 4 days per split");
    GhiExperimentResult result;
    result.split = split_days(static_cast<int>(days.size()), config.train_fraction, config.seed);

    const int history = config.history;
    const int horizon = config.horizon;

    auto collect = [&](const std::vector<int>& day_indices) {
        std::vector<nn::ForecastSample> samples;
        for (const int di : day_indices) {
            const SimDay& day = days[static_cast<std::size_t>(di)];
            for (int a = history - 1; a + horizon < day.slices.cols(); a += config.anchor_stride) {
                auto s = make_ghi_sample(day, a, history, horizon, config.image_half_rows);
                if (s) samples.push_back(std::move(*s));
            }
        }
        return samples;
    };

    const auto train_samples = collect(result.split.train);
    if (train_samples.empty()) throw EstimationError("no usable GHI training anchors");

    nn::GhiModelConfig mc = config.model;
    mc.history = history;
    mc.horizon = horizon;
    mc.image_rows = 2 * config.image_half_rows + 1;
    mc.image_cols = history;
    nn::GhiForecaster model(mc);
    result.pretrain_curve = model.pretrain(train_samples, config.pretrain_epochs);
    result.finetune_curve = model.finetune(train_samples, config.finetune_epochs);

    // Test split: pooled per-horizon nRMSE for persistence and the model.
    std::vector<std::vector<double>> pred_t(static_cast<std::size_t>(horizon));
    std::vector<std::vector<double>> pred_p(static_cast<std::size_t>(horizon));
    std::vector<std::vector<double>> truth(static_cast<std::size_t>(horizon));
    long count = 0;
    for (const int di : result.split.test) {
        const SimDay& day = days[static_cast<std::size_t>(di)];
        const double g0 = day.clear_sky_peak_wm2 > 0.0 ? day.clear_sky_peak_wm2 : 1.0;
        for (int a = history - 1; a + horizon < day.slices.cols(); a += config.anchor_stride) {
            auto s = make_ghi_sample(day, a, history, horizon, config.image_half_rows);
            if (!s) continue;
            const auto model_pred = model.predict(*s);
            const auto persist =
                nn::persistence_forecast(day.ghi.values_wm2[static_cast<std::size_t>(a)], horizon);
            ++count;
            for (int k = 0; k < horizon; ++k) {
                pred_t[static_cast<std::size_t>(k)].push_back(model_pred[static_cast<std::size_t>(k)] * g0);
                pred_p[static_cast<std::size_t>(k)].push_back(persist[static_cast<std::size_t>(k)]);
                truth[static_cast<std::size_t>(k)].push_back(
                    day.ghi.values_wm2[static_cast<std::size_t>(a + k + 1)]);
            }
        }
    }
    if (count == 0) throw EstimationError("no usable GHI test anchors");

    result.table.period_s = days.front().ghi.period_s;
    result.table.horizon = horizon;
    HorizonRow persist_row{"persistence", mirror_name, "nrmse",
                           std::vector<std::optional<HorizonCell>>(static_cast<std::size_t>(horizon))};
    HorizonRow model_row{"transformer", mirror_name, "nrmse",
                         std::vector<std::optional<HorizonCell>>(static_cast<std::size_t>(horizon))};
    for (int k = 0; k < horizon; ++k) {
        const auto& y = truth[static_cast<std::size_t>(k)];
        if (y.size() < 4) continue;
        persist_row.cells[static_cast<std::size_t>(k)] =
            HorizonCell{nrmse(pred_p[static_cast<std::size_t>(k)], y), static_cast<long>(y.size())};
        model_row.cells[static_cast<std::size_t>(k)] =
            HorizonCell{nrmse(pred_t[static_cast<std::size_t>(k)], y), static_cast<long>(y.size())};
    }
    result.table.rows.push_back(std::move(persist_row));
    result.table.rows.push_back(std::move(model_row));
    return result;
}

}  // namespace skylens::harness
