#include "skylens/spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"

namespace skylens::st {

double red_blue_ratio(double r, double b) {
    const double denom = b + r;
    if (denom == 0.0) return 0.0;
    return (b - r) / denom;
}

std::vector<SliceSample> extract_slice(const Image& frame,
                                       const std::vector<std::uint8_t>* sky_mask, Vec2 sun_pixel,
                                       double theta_image_deg, int half_length, int band_width) {
    if (half_length < 1) throw std::invalid_argument("half_length must be at least 1");
    if (band_width < 1) throw std::invalid_argument("band_width must be at least 1");
    if (!frame.in_bounds(sun_pixel.x - 0.5, sun_pixel.y - 0.5))
        throw std::invalid_argument("sun pixel must lie inside the frame");

    const double th = deg_to_rad(theta_image_deg);
    const Vec2 dir{std::cos(th), std::sin(th)};
    const Vec2 perp{-dir.y, dir.x};

    std::vector<SliceSample> out(static_cast<std::size_t>(2 * half_length + 1));
    for (int d = -half_length; d <= half_length; ++d) {
        SliceSample s;
        double acc[3] = {0.0, 0.0, 0.0};
        bool ok = true;
        for (int k = 0; k < band_width && ok; ++k) {
            const double off = k - 0.5 * (band_width - 1);
            // Continuous pixel coordinates -> bilinear index coordinates.
            const double px = sun_pixel.x + d * dir.x + off * perp.x - 0.5;
            const double py = sun_pixel.y + d * dir.y + off * perp.y - 0.5;
            if (!frame.in_bounds(px, py)) {
                ok = false;
                break;
            }
            if (sky_mask) {
                const int nx = std::clamp(static_cast<int>(std::lround(px)), 0, frame.width - 1);
                const int ny = std::clamp(static_cast<int>(std::lround(py)), 0, frame.height - 1);
                if (!(*sky_mask)[static_cast<std::size_t>(ny) * frame.width + nx]) {
                    ok = false;
                    break;
                }
            }
            for (int c = 0; c < 3; ++c) acc[c] += frame.sample_bilinear(px, py, c);
        }
        if (ok) {
            s.valid = true;
            s.r = static_cast<float>(acc[0] / band_width);
            s.g = static_cast<float>(acc[1] / band_width);
            s.b = static_cast<float>(acc[2] / band_width);
        }
        out[static_cast<std::size_t>(d + half_length)] = s;
    }
    return out;
}

void SpaceTimeImage::set(int row, int col, const SliceSample& s) {
    const std::size_t i = index(row, col);
    rgb[i * 3 + 0] = s.r;
    rgb[i * 3 + 1] = s.g;
    rgb[i * 3 + 2] = s.b;
    valid[i] = s.valid ? 1 : 0;
}

SpaceTimeImage build_spacetime(const std::vector<FrameSliceInput>& frames, double theta_image_deg,
                               int half_length, int band_width, double period_s) {
    if (frames.size() < 2) throw std::invalid_argument("need at least 2 frames");
    SpaceTimeImage st;
    st.half_length = half_length;
    st.band_width = band_width;
    st.theta_image_deg = theta_image_deg;
    st.period_s = period_s;
    st.timestamps.reserve(frames.size());
    for (const auto& f : frames) st.timestamps.push_back(f.timestamp_s);
    const std::size_t cells = static_cast<std::size_t>(st.rows()) * frames.size();
    st.rgb.assign(cells * 3, 0.0f);
    st.valid.assign(cells, 0);

    for (std::size_t col = 0; col < frames.size(); ++col) {
        const FrameSliceInput& f = frames[col];
        if (!f.sun_pixel || f.image == nullptr) continue;  // column stays invalid
        const auto column = extract_slice(*f.image, f.sky_mask, *f.sun_pixel, theta_image_deg,
                                          half_length, band_width);
        for (int row = 0; row < st.rows(); ++row)
            st.set(row, static_cast<int>(col), column[static_cast<std::size_t>(row)]);
    }
    return st;
}

void save_spacetime(const SpaceTimeImage& st, const std::string& base_path) {
    Image img(st.cols(), st.rows(), 3);
    for (int row = 0; row < st.rows(); ++row)
        for (int col = 0; col < st.cols(); ++col)
            for (int c = 0; c < 3; ++c)
                img.at(col, row, c) = st.rgb[st.index(row, col) * 3 + c];
    write_pfm(img, base_path + ".pfm");
    write_pgm_mask(st.valid, st.cols(), st.rows(), base_path + ".mask.pgm");

    CsvTable t;
    t.header = {"key", "value"};
    t.rows.push_back({"half_length", std::to_string(st.half_length)});
    t.rows.push_back({"band_width", std::to_string(st.band_width)});
    t.rows.push_back({"theta_image_deg", format_double(st.theta_image_deg, 10)});
    t.rows.push_back({"period_s", format_double(st.period_s, 10)});
    for (std::size_t i = 0; i < st.timestamps.size(); ++i)
        t.rows.push_back({"t" + std::to_string(i), format_double(st.timestamps[i], 10)});
    write_csv(t, base_path + ".csv");
}

SpaceTimeImage load_spacetime(const std::string& base_path) {
    const Image img = read_pfm(base_path + ".pfm");
    int mw = 0, mh = 0;
    const auto mask = read_pgm_mask(base_path + ".mask.pgm", mw, mh);
    if (mw != img.width || mh != img.height) throw IoError("spacetime mask/pfm shape mismatch");
    const CsvTable t = read_csv(base_path + ".csv");

    SpaceTimeImage st;
    std::vector<std::pair<int, double>> ts;
    for (const auto& row : t.rows) {
        if (row.size() < 2) continue;
        const std::string& k = row[0];
        if (k == "half_length") st.half_length = std::stoi(row[1]);
        else if (k == "band_width") st.band_width = std::stoi(row[1]);
        else if (k == "theta_image_deg") st.theta_image_deg = std::stod(row[1]);
        else if (k == "period_s") st.period_s = std::stod(row[1]);
        else if (k[0] == 't') ts.push_back({std::stoi(k.substr(1)), std::stod(row[1])});
    }
    std::sort(ts.begin(), ts.end());
    for (const auto& [i, v] : ts) st.timestamps.push_back(v);
    if (st.rows() != img.height || st.cols() != img.width)
        throw IoError("spacetime metadata does not match raster shape");

    const std::size_t cells = static_cast<std::size_t>(st.rows()) * st.cols();
    st.rgb.assign(cells * 3, 0.0f);
    st.valid = mask;
    for (int row = 0; row < st.rows(); ++row)
        for (int col = 0; col < st.cols(); ++col)
            for (int c = 0; c < 3; ++c)
                st.rgb[st.index(row, col) * 3 + c] = img.at(col, row, c);
    return st;
}

ShearedWindow shear(const SpaceTimeImage& st, double theta_deg, int anchor, int past_window,
                    int horizon) {
    if (!(theta_deg > 0.0) || !(theta_deg < 90.0))
        throw std::invalid_argument("theta must lie in (0, 90) degrees");
    if (anchor - past_window < 0)
        throw std::invalid_argument("past window extends before the first frame");
    if (anchor >= st.cols()) throw std::invalid_argument("anchor beyond the last frame");
    if (past_window < 0 || horizon < 0) throw std::invalid_argument("negative window");

    ShearedWindow w;
    w.anchor = anchor;
    w.past_window = past_window;
    w.horizon = horizon;
    w.streak_tan = std::tan(deg_to_rad(theta_deg));
    const std::size_t cells = static_cast<std::size_t>(w.rows()) * w.cols();
    w.rgb.assign(cells * 3, 0.0f);
    w.valid.assign(cells, 0);

    const int first = anchor - past_window;
    for (int row = 0; row < w.rows(); ++row) {
        const int frame = first + row;  // absolute frame index of this row
        for (int col = 0; col < w.cols(); ++col) {
            const int occl_frame = first + col;
            if (occl_frame < frame) continue;           // the cloud has already passed
            if (occl_frame > anchor + horizon) continue;
            const double offset = (occl_frame - frame) * w.streak_tan;
            if (offset > st.half_length) continue;      // beyond the slice
            // Linear interpolation along the spatial axis.
            const double pos = st.half_length + offset;
            const int r0 = static_cast<int>(std::floor(pos));
            const int r1 = std::min(r0 + 1, st.rows() - 1);
            const double f = pos - r0;
            if (!st.is_valid(r0, frame) || !st.is_valid(r1, frame)) continue;
            const std::size_t i0 = st.index(r0, frame) * 3;
            const std::size_t i1 = st.index(r1, frame) * 3;
            const std::size_t o = (static_cast<std::size_t>(row) * w.cols() + col) * 3;
            for (int c = 0; c < 3; ++c)
                w.rgb[o + c] =
                    static_cast<float>((1.0 - f) * st.rgb[i0 + c] + f * st.rgb[i1 + c]);
            w.valid[static_cast<std::size_t>(row) * w.cols() + col] = 1;
        }
    }
    return w;
}

RatioTrace ratio_trace(const ShearedWindow& window) {
    RatioTrace tr;
    tr.anchor = window.anchor;
    tr.past_window = window.past_window;
    tr.horizon = window.horizon;
    tr.value.assign(static_cast<std::size_t>(window.cols()), 0.0);
    tr.valid_count.assign(static_cast<std::size_t>(window.cols()), 0);
    for (int col = 0; col < window.cols(); ++col) {
        double acc = 0.0;
        int n = 0;
        for (int row = 0; row < window.rows(); ++row) {
            const std::size_t i = static_cast<std::size_t>(row) * window.cols() + col;
            if (!window.valid[i]) continue;
            acc += red_blue_ratio(window.rgb[i * 3 + 0], window.rgb[i * 3 + 2]);
            ++n;
        }
        tr.valid_count[static_cast<std::size_t>(col)] = n;
        if (n > 0) tr.value[static_cast<std::size_t>(col)] = acc / n;
    }
    return tr;
}

namespace {

// Mean per-column standard deviation of the blue-red ratio; nullopt when no
// column reaches the support minimum.
std::optional<double> shear_score(const SpaceTimeImage& st, double theta_deg, int anchor,
                                  int past_window, int horizon, int min_valid) {
    const ShearedWindow w = shear(st, theta_deg, anchor, past_window, horizon);
    double acc = 0.0;
    int cols_used = 0;
    for (int col = 0; col < w.cols(); ++col) {
        double sum = 0.0, sum2 = 0.0;
        int n = 0;
        for (int row = 0; row < w.rows(); ++row) {
            const std::size_t i = static_cast<std::size_t>(row) * w.cols() + col;
            if (!w.valid[i]) continue;
            const double v = red_blue_ratio(w.rgb[i * 3 + 0], w.rgb[i * 3 + 2]);
            sum += v;
            sum2 += v * v;
            ++n;
        }
        if (n < min_valid) continue;
        const double mean = sum / n;
        const double var = std::max(0.0, sum2 / n - mean * mean);
        acc += std::sqrt(var);
        ++cols_used;
    }
    if (cols_used == 0) return std::nullopt;
    return acc / cols_used;
}

}  // namespace

double optimal_theta(const SpaceTimeImage& st, int anchor, int past_window, int horizon,
                     const ThetaSweepParams& params) {
    if (!(params.step_deg > 0.0) || params.stop_deg < params.start_deg)
        throw std::invalid_argument("bad theta grid");
    double best_theta = 0.0;
    double best_score = 0.0;
    bool found = false;
    for (double th = params.start_deg; th <= params.stop_deg + 1e-9; th += params.step_deg) {
        const auto score = shear_score(st, th, anchor, past_window, horizon,
                                       params.min_valid_per_column);
        if (!score) continue;
        if (!found || *score < best_score - 1e-15) {  // strict improvement; ties keep smaller theta
            found = true;
            best_score = *score;
            best_theta = th;
        }
    }
    if (!found) throw EstimationError("insufficient data: no column has enough valid samples");
    return best_theta;
}

BackprojectionResult backproject_predict(const SpaceTimeImage& st, int anchor, int past_window,
                                         int horizon, double threshold,
                                         const ThetaSweepParams& params) {
    BackprojectionResult out;
    out.theta_deg = optimal_theta(st, anchor, past_window, horizon, params);
    const ShearedWindow w = shear(st, out.theta_deg, anchor, past_window, horizon);
    out.trace = ratio_trace(w);

    out.horizon_score.assign(static_cast<std::size_t>(horizon), 0.0);
    out.occluded.assign(static_cast<std::size_t>(horizon), 0);
    out.defined.assign(static_cast<std::size_t>(horizon), 0);

    // The anchor column is always supported; it seeds persistence when the
    // first horizons lack support.
    const int anchor_col = w.col_of_frame(anchor);
    double last_score = out.trace.valid_count[anchor_col] >= params.min_valid_per_column
                            ? out.trace.value[anchor_col]
                            : 0.0;
    bool have_any = out.trace.valid_count[anchor_col] >= params.min_valid_per_column;

    for (int k = 1; k <= horizon; ++k) {
        const int col = w.col_of_frame(anchor + k);
        const bool defined = out.trace.valid_count[col] >= params.min_valid_per_column;
        if (defined) {
            last_score = out.trace.value[col];
            have_any = true;
        }
        if (!have_any)
            throw EstimationError("insufficient data: no supported column up to horizon");
        out.horizon_score[static_cast<std::size_t>(k - 1)] = last_score;
        out.occluded[static_cast<std::size_t>(k - 1)] = last_score < threshold ? 1 : 0;
        out.defined[static_cast<std::size_t>(k - 1)] = defined ? 1 : 0;
    }
    return out;
}

double calibrate_threshold(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
    long pos = 0, neg = 0;
    for (const auto l : labels) (l ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw EstimationError("threshold calibration requires both label classes");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Candidates: below the minimum, between adjacent distinct scores, above
    // the maximum. Prediction rule: occluded when score < threshold.
    std::vector<double> candidates;
    candidates.push_back(scores[order.front()] - 1.0);
    for (std::size_t i = 1; i < order.size(); ++i) {
        const double a = scores[order[i - 1]], b = scores[order[i]];
        if (b > a) candidates.push_back(0.5 * (a + b));
    }
    candidates.push_back(scores[order.back()] + 1.0);

    double best_j = -2.0, best_thr = candidates.front();
    for (const double thr : candidates) {
        long tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] < thr) (labels[i] ? tp : fp) += 1;
        }
        const double j = static_cast<double>(tp) / pos - static_cast<double>(fp) / neg;
        if (j > best_j + 1e-15) {  // strict improvement keeps the lower threshold on ties
            best_j = j;
            best_thr = thr;
        }
    }
    return best_thr;
}

}  // namespace skylens::st
