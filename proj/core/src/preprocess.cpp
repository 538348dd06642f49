#include "skylens/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"
#include "skylens/rng.hpp"

namespace skylens::prep {

std::optional<Vec2> detect_sun(const Image& short_exposure, double saturation_level,
                               int min_blob_px) {
    const int w = short_exposure.width;
    const int h = short_exposure.height;
    std::vector<std::int8_t> hot(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (short_exposure.luminance(x, y) >= saturation_level)
                hot[static_cast<std::size_t>(y) * w + x] = 1;

    // Largest 8-connected component of saturated pixels.
    std::vector<std::pair<int, int>> stack;
    long best_area = 0;
    double best_cx = 0.0, best_cy = 0.0;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            if (hot[static_cast<std::size_t>(y0) * w + x0] != 1) continue;
            long area = 0;
            double cx = 0.0, cy = 0.0;
            stack.push_back({x0, y0});
            hot[static_cast<std::size_t>(y0) * w + x0] = 2;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                ++area;
                cx += x + 0.5;
                cy += y + 0.5;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        auto& m = hot[static_cast<std::size_t>(ny) * w + nx];
                        if (m == 1) {
                            m = 2;
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
            if (area > best_area) {
                best_area = area;
                best_cx = cx / static_cast<double>(area);
                best_cy = cy / static_cast<double>(area);
            }
        }
    }
    if (best_area < min_blob_px || best_area == 0) return std::nullopt;
    return Vec2{best_cx, best_cy};
}

namespace {

double eval_poly(const std::vector<double>& coeff, double s) {
    double acc = 0.0;
    for (std::size_t i = coeff.size(); i-- > 0;) acc = acc * s + coeff[i];
    return acc;
}

// Least-squares polynomial fit over normalized time; returns false when the
// design matrix is numerically rank-deficient.
bool poly_fit(const std::vector<double>& s, const std::vector<double>& v, int degree,
              std::vector<double>& coeff) {
    const int n = static_cast<int>(s.size());
    const int m = degree + 1;
    Eigen::MatrixXd A(n, m);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        double p = 1.0;
        for (int j = 0; j < m; ++j) {
            A(i, j) = p;
            p *= s[i];
        }
        b(i) = v[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(m - 1) / sv(0) < 1e-10) return false;
    Eigen::VectorXd x = svd.solve(b);
    coeff.assign(x.data(), x.data() + m);
    return true;
}

}  // namespace

Vec2 SunTrack::eval(double t_s) const {
    const double span = t1 - t0;
    const double s = span > 0.0 ? 2.0 * (t_s - t0) / span - 1.0 : 0.0;
    return {eval_poly(coeff_x, s), eval_poly(coeff_y, s)};
}

SunTrack fit_sun_track(const std::vector<SunDetection>& detections, int degree,
                       const RansacParams& params) {
    if (degree < 1) throw std::invalid_argument("degree must be at least 1");
    const int n = static_cast<int>(detections.size());
    const int m = degree + 1;
    if (n < m) throw std::invalid_argument("need at least degree+1 detections");

    double t0 = detections[0].t_s, t1 = detections[0].t_s;
    for (const auto& d : detections) {
        t0 = std::min(t0, d.t_s);
        t1 = std::max(t1, d.t_s);
    }
    const double span = t1 > t0 ? t1 - t0 : 1.0;
    std::vector<double> s(n), xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        s[i] = 2.0 * (detections[i].t_s - t0) / span - 1.0;
        xs[i] = detections[i].x;
        ys[i] = detections[i].y;
    }

    Rng rng(params.seed);
    std::vector<std::uint8_t> best_inliers;
    long best_count = -1;
    double best_sse = 0.0;

    std::vector<double> ss(m), sx(m), sy(m), cx, cy;
    for (int it = 0; it < params.iterations; ++it) {
        // Minimal sample with distinct times.
        bool ok = true;
        for (int j = 0; j < m; ++j) {
            const int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            ss[j] = s[pick];
            sx[j] = xs[pick];
            sy[j] = ys[pick];
            for (int k = 0; k < j; ++k)
                if (ss[k] == ss[j]) ok = false;
        }
        if (!ok) continue;
        if (!poly_fit(ss, sx, degree, cx) || !poly_fit(ss, sy, degree, cy)) continue;

        std::vector<std::uint8_t> inliers(n, 0);
        long count = 0;
        double sse = 0.0;
        for (int i = 0; i < n; ++i) {
            const double rx = eval_poly(cx, s[i]) - xs[i];
            const double ry = eval_poly(cy, s[i]) - ys[i];
            const double r2 = rx * rx + ry * ry;
            if (r2 <= params.inlier_tol_px * params.inlier_tol_px) {
                inliers[i] = 1;
                ++count;
                sse += r2;
            }
        }
        if (count > best_count || (count == best_count && sse < best_sse)) {
            best_count = count;
            best_sse = sse;
            best_inliers = std::move(inliers);
        }
    }

    const long min_inliers = std::max<long>(
        m, static_cast<long>(std::ceil(params.min_inlier_fraction * static_cast<double>(n))));
    if (best_count < min_inliers)
        throw EstimationError("track not identifiable: consensus below minimum inliers");

    // Final refit on the consensus set.
    std::vector<double> fs, fx, fy;
    for (int i = 0; i < n; ++i) {
        if (!best_inliers[i]) continue;
        fs.push_back(s[i]);
        fx.push_back(xs[i]);
        fy.push_back(ys[i]);
    }
    SunTrack track;
    track.degree = degree;
    track.t0 = t0;
    track.t1 = t0 + span;
    track.inlier = best_inliers;
    track.inlier_fraction = static_cast<double>(best_count) / static_cast<double>(n);
    if (!poly_fit(fs, fx, degree, track.coeff_x) || !poly_fit(fs, fy, degree, track.coeff_y)) {
        track.degenerate = true;
        // Fall back to the best minimal-sample fit that produced the consensus.
        poly_fit(fs, fx, std::min(degree, static_cast<int>(fs.size()) - 1), track.coeff_x);
        poly_fit(fs, fy, std::min(degree, static_cast<int>(fs.size()) - 1), track.coeff_y);
        if (track.coeff_x.empty() || track.coeff_y.empty())
            throw EstimationError("track not identifiable: degenerate design matrix");
    }

    // Collinear detections cannot pin a curved track: flag via the rank of
    // the centered inlier positions.
    if (degree >= 2 && fs.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) {
            mx += fx[i];
            my += fy[i];
        }
        mx /= static_cast<double>(fx.size());
        my /= static_cast<double>(fy.size());
        Eigen::MatrixXd P(fx.size(), 2);
        for (std::size_t i = 0; i < fx.size(); ++i) {
            P(static_cast<int>(i), 0) = fx[i] - mx;
            P(static_cast<int>(i), 1) = fy[i] - my;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
        if (svd.singularValues()(0) > 0.0 &&
            svd.singularValues()(1) / svd.singularValues()(0) < 1e-8)
            track.degenerate = true;
    }
    return track;
}

void save_sun_track_csv(const SunTrack& track, const std::string& path) {
    CsvTable t;
    t.header = {"key", "value"};
    t.rows.push_back({"degree", std::to_string(track.degree)});
    t.rows.push_back({"t0", format_double(track.t0, 12)});
    t.rows.push_back({"t1", format_double(track.t1, 12)});
    t.rows.push_back({"inlier_fraction", format_double(track.inlier_fraction, 8)});
    t.rows.push_back({"degenerate", track.degenerate ? "1" : "0"});
    for (std::size_t i = 0; i < track.coeff_x.size(); ++i)
        t.rows.push_back({"cx" + std::to_string(i), format_double(track.coeff_x[i], 12)});
    for (std::size_t i = 0; i < track.coeff_y.size(); ++i)
        t.rows.push_back({"cy" + std::to_string(i), format_double(track.coeff_y[i], 12)});
    write_csv(t, path);
}

SunTrack load_sun_track_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    SunTrack track;
    std::vector<std::pair<int, double>> cx, cy;
    for (const auto& row : t.rows) {
        if (row.size() < 2) continue;
        const std::string& k = row[0];
        if (k == "degree") track.degree = std::stoi(row[1]);
        else if (k == "t0") track.t0 = std::stod(row[1]);
        else if (k == "t1") track.t1 = std::stod(row[1]);
        else if (k == "inlier_fraction") track.inlier_fraction = std::stod(row[1]);
        else if (k == "degenerate") track.degenerate = row[1] == "1";
        else if (k.rfind("cx", 0) == 0) cx.push_back({std::stoi(k.substr(2)), std::stod(row[1])});
        else if (k.rfind("cy", 0) == 0) cy.push_back({std::stoi(k.substr(2)), std::stod(row[1])});
    }
    std::sort(cx.begin(), cx.end());
    std::sort(cy.begin(), cy.end());
    for (const auto& [i, v] : cx) track.coeff_x.push_back(v);
    for (const auto& [i, v] : cy) track.coeff_y.push_back(v);
    return track;
}

namespace {

// Bounded luminance in [0, 1): v / (1 + v) keeps the sun from dominating
// the data term.
std::vector<double> tone_mapped_luma(const Image& img) {
    std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double v = std::max(0.0, img.luminance(x, y));
            out[static_cast<std::size_t>(y) * img.width + x] = v / (1.0 + v);
        }
    return out;
}

struct Level {
    int w, h;
    std::vector<double> a, b;
    std::vector<std::uint8_t> mask;  // 1 = use data term
};

std::vector<double> downsample2(const std::vector<double>& src, int w, int h, int& ow, int& oh) {
    ow = w / 2;
    oh = h / 2;
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const int x0 = 2 * x, y0 = 2 * y;
            out[static_cast<std::size_t>(y) * ow + x] =
                0.25 * (src[static_cast<std::size_t>(y0) * w + x0] +
                        src[static_cast<std::size_t>(y0) * w + x0 + 1] +
                        src[static_cast<std::size_t>(y0 + 1) * w + x0] +
                        src[static_cast<std::size_t>(y0 + 1) * w + x0 + 1]);
        }
    return out;
}

std::vector<std::uint8_t> downsample_mask(const std::vector<std::uint8_t>& src, int w, int h) {
    const int ow = w / 2, oh = h / 2;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const int x0 = 2 * x, y0 = 2 * y;
            const int sum = src[static_cast<std::size_t>(y0) * w + x0] +
                            src[static_cast<std::size_t>(y0) * w + x0 + 1] +
                            src[static_cast<std::size_t>(y0 + 1) * w + x0] +
                            src[static_cast<std::size_t>(y0 + 1) * w + x0 + 1];
            out[static_cast<std::size_t>(y) * ow + x] = sum >= 3 ? 1 : 0;
        }
    return out;
}

double sample_clamped(const std::vector<double>& img, int w, int h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double v00 = img[static_cast<std::size_t>(y0) * w + x0];
    const double v10 = img[static_cast<std::size_t>(y0) * w + x1];
    const double v01 = img[static_cast<std::size_t>(y1) * w + x0];
    const double v11 = img[static_cast<std::size_t>(y1) * w + x1];
    return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

}  // namespace

FlowField estimate_flow(const Image& frame_a, const Image& frame_b,
                        const std::vector<std::uint8_t>* static_mask, const FlowParams& params) {
    if (frame_a.width != frame_b.width || frame_a.height != frame_b.height)
        throw std::invalid_argument("flow frames must share a shape");
    if (!(params.smoothness > 0.0)) throw std::invalid_argument("smoothness must be positive");
    if (static_mask &&
        static_mask->size() != static_cast<std::size_t>(frame_a.width) * frame_a.height)
        throw std::invalid_argument("static mask size mismatch");

    const int W = frame_a.width, H = frame_a.height;

    // Build the pyramid (level 0 = full resolution).
    std::vector<Level> pyr;
    {
        Level l0;
        l0.w = W;
        l0.h = H;
        l0.a = tone_mapped_luma(frame_a);
        l0.b = tone_mapped_luma(frame_b);
        l0.mask.assign(static_cast<std::size_t>(W) * H, 1);
        if (static_mask)
            for (std::size_t i = 0; i < l0.mask.size(); ++i) l0.mask[i] = (*static_mask)[i] ? 0 : 1;

        // Joint affine normalization to unit range, then neutralize masked
        // pixels so their content cannot leak into derivative stencils or
        // coarser pyramid levels.
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < l0.a.size(); ++i) {
            if (!l0.mask[i]) continue;
            lo = std::min({lo, l0.a[i], l0.b[i]});
            hi = std::max({hi, l0.a[i], l0.b[i]});
        }
        const double span = hi > lo ? hi - lo : 1.0;
        for (std::size_t i = 0; i < l0.a.size(); ++i) {
            if (l0.mask[i]) {
                l0.a[i] = (l0.a[i] - lo) / span;
                l0.b[i] = (l0.b[i] - lo) / span;
            } else {
                l0.a[i] = 0.5;
                l0.b[i] = 0.5;
            }
        }
        pyr.push_back(std::move(l0));
    }
    for (int l = 1; l < params.pyramid_levels; ++l) {
        const Level& prev = pyr.back();
        if (prev.w < 32 || prev.h < 32) break;
        Level next;
        next.a = downsample2(prev.a, prev.w, prev.h, next.w, next.h);
        int dw, dh;
        next.b = downsample2(prev.b, prev.w, prev.h, dw, dh);
        next.mask = downsample_mask(prev.mask.empty() ? std::vector<std::uint8_t>() : prev.mask,
                                    prev.w, prev.h);
        pyr.push_back(std::move(next));
    }

    bool converged = true;
    std::vector<double> u, v;
    for (int li = static_cast<int>(pyr.size()) - 1; li >= 0; --li) {
        const Level& lev = pyr[static_cast<std::size_t>(li)];
        const int w = lev.w, h = lev.h;
        if (u.empty()) {
            u.assign(static_cast<std::size_t>(w) * h, 0.0);
            v.assign(static_cast<std::size_t>(w) * h, 0.0);
        } else {
            // Upsample previous-level flow, doubling both axes and values.
            const int pw = pyr[static_cast<std::size_t>(li + 1)].w;
            const int ph = pyr[static_cast<std::size_t>(li + 1)].h;
            std::vector<double> nu(static_cast<std::size_t>(w) * h), nv(nu.size());
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double sx = std::min(static_cast<double>(pw - 1), x * 0.5);
                    const double sy = std::min(static_cast<double>(ph - 1), y * 0.5);
                    nu[static_cast<std::size_t>(y) * w + x] = 2.0 * sample_clamped(u, pw, ph, sx, sy);
                    nv[static_cast<std::size_t>(y) * w + x] = 2.0 * sample_clamped(v, pw, ph, sx, sy);
                }
            u = std::move(nu);
            v = std::move(nv);
        }

        // A few warp-and-linearize passes per level. Each pass first solves
        // the best constant (global-translation) increment in closed form:
        // pointwise relaxation alone cannot move that mode under a strong
        // smoothness weight, since its convergence rate is ~|grad|^2/lambda.
        for (int outer = 0; outer < 3; ++outer) {
            std::vector<double> bw(static_cast<std::size_t>(w) * h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    bw[i] = sample_clamped(lev.b, w, h, x + u[i], y + v[i]);
                }
            std::vector<double> ix(bw.size()), iy(bw.size()), it(bw.size());
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
                    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
                    ix[i] = 0.25 * (lev.a[static_cast<std::size_t>(y) * w + xp] -
                                    lev.a[static_cast<std::size_t>(y) * w + xm] +
                                    bw[static_cast<std::size_t>(y) * w + xp] -
                                    bw[static_cast<std::size_t>(y) * w + xm]);
                    iy[i] = 0.25 * (lev.a[static_cast<std::size_t>(yp) * w + x] -
                                    lev.a[static_cast<std::size_t>(ym) * w + x] +
                                    bw[static_cast<std::size_t>(yp) * w + x] -
                                    bw[static_cast<std::size_t>(ym) * w + x]);
                    it[i] = bw[i] - lev.a[i];
                }

            // Global translation increment over unmasked pixels.
            double gxx = 0.0, gxy = 0.0, gyy = 0.0, gxt = 0.0, gyt = 0.0;
            for (std::size_t i = 0; i < bw.size(); ++i) {
                if (!lev.mask[i]) continue;
                gxx += ix[i] * ix[i];
                gxy += ix[i] * iy[i];
                gyy += iy[i] * iy[i];
                gxt += ix[i] * it[i];
                gyt += iy[i] * it[i];
            }
            double g_u = 0.0, g_v = 0.0;
            const double det = gxx * gyy - gxy * gxy;
            if (det > 1e-12 * (gxx + gyy + 1e-300)) {
                g_u = (-gxt * gyy + gyt * gxy) / det;
                g_v = (-gyt * gxx + gxt * gxy) / det;
            }

            std::vector<double> du(bw.size(), g_u), dv(bw.size(), g_v);
            const double omega = 1.9;
            double delta = 0.0;
            for (int iter = 0; iter < params.iterations_per_level; ++iter) {
                delta = 0.0;
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const std::size_t i = static_cast<std::size_t>(y) * w + x;
                        const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
                        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
                        const double ub = 0.25 * (du[static_cast<std::size_t>(y) * w + xm] +
                                                  du[static_cast<std::size_t>(y) * w + xp] +
                                                  du[static_cast<std::size_t>(ym) * w + x] +
                                                  du[static_cast<std::size_t>(yp) * w + x]);
                        const double vb = 0.25 * (dv[static_cast<std::size_t>(y) * w + xm] +
                                                  dv[static_cast<std::size_t>(y) * w + xp] +
                                                  dv[static_cast<std::size_t>(ym) * w + x] +
                                                  dv[static_cast<std::size_t>(yp) * w + x]);
                        double nu_val, nv_val;
                        if (lev.mask[i]) {
                            const double num = ix[i] * ub + iy[i] * vb + it[i];
                            const double den = params.smoothness + ix[i] * ix[i] + iy[i] * iy[i];
                            nu_val = ub - ix[i] * num / den;
                            nv_val = vb - iy[i] * num / den;
                        } else {
                            nu_val = ub;  // pure diffusion under the mask
                            nv_val = vb;
                        }
                        nu_val = du[i] + omega * (nu_val - du[i]);
                        nv_val = dv[i] + omega * (nv_val - dv[i]);
                        delta = std::max(delta, std::abs(nu_val - du[i]) + std::abs(nv_val - dv[i]));
                        du[i] = nu_val;
                        dv[i] = nv_val;
                    }
                }
                if (delta < params.tolerance) break;
            }
            if (delta >= params.tolerance) converged = false;
            double step = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] += du[i];
                v[i] += dv[i];
                step = std::max(step, std::abs(du[i]) + std::abs(dv[i]));
            }
            if (step < params.tolerance) break;  // warp iteration fixed point
        }
    }

    FlowField out;
    out.width = W;
    out.height = H;
    out.dx = std::move(u);
    out.dy = std::move(v);
    out.valid.assign(static_cast<std::size_t>(W) * H, 1);
    out.converged = converged;
    if (static_mask) {
        for (std::size_t i = 0; i < out.valid.size(); ++i) {
            if ((*static_mask)[i]) {
                out.valid[i] = 0;
                out.dx[i] = 0.0;
                out.dy[i] = 0.0;
            }
        }
    }
    return out;
}

WindEstimate estimate_wind(const std::vector<FlowField>& flows,
                           const std::vector<std::uint8_t>* static_mask, int median_window,
                           double noise_floor_px) {
    if (flows.empty()) throw std::invalid_argument("need at least one flow field");
    if (median_window < 1) throw std::invalid_argument("median window must be at least 1");

    struct FrameVec {
        double vx, vy, speed, moving_fraction;
    };
    std::vector<FrameVec> per_frame;
    for (const FlowField& f : flows) {
        double sw = 0.0, sx = 0.0, sy = 0.0, sspeed = 0.0;
        long moving = 0, considered = 0;
        for (int y = 0; y < f.height; ++y) {
            for (int x = 0; x < f.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * f.width + x;
                if (!f.valid[i]) continue;
                if (static_mask && (*static_mask)[i]) continue;
                ++considered;
                const double mag = std::hypot(f.dx[i], f.dy[i]);
                if (mag <= noise_floor_px) continue;
                ++moving;
                const double ang = std::atan2(f.dy[i], f.dx[i]);
                sw += mag;
                sx += mag * std::cos(ang);
                sy += mag * std::sin(ang);
                sspeed += mag * mag;  // magnitude-weighted mean speed
            }
        }
        if (moving == 0 || sw <= 0.0) continue;
        FrameVec fv;
        const double mean_speed = sspeed / sw;
        const double ang = std::atan2(sy, sx);
        fv.vx = mean_speed * std::cos(ang);
        fv.vy = mean_speed * std::sin(ang);
        fv.speed = mean_speed;
        fv.moving_fraction = considered > 0 ? static_cast<double>(moving) / considered : 0.0;
        per_frame.push_back(fv);
    }

    WindEstimate est;
    if (per_frame.empty()) return est;  // wind not estimable, confidence 0

    const std::size_t take = std::min<std::size_t>(per_frame.size(),
                                                   static_cast<std::size_t>(median_window));
    const std::size_t start = per_frame.size() - take;
    auto median_of = [&](auto proj) {
        std::vector<double> vals;
        vals.reserve(take);
        for (std::size_t i = start; i < per_frame.size(); ++i) vals.push_back(proj(per_frame[i]));
        std::sort(vals.begin(), vals.end());
        const std::size_t mid = vals.size() / 2;
        return vals.size() % 2 ? vals[mid] : 0.5 * (vals[mid - 1] + vals[mid]);
    };
    const double mx = median_of([](const FrameVec& f) { return f.vx; });
    const double my = median_of([](const FrameVec& f) { return f.vy; });
    est.direction_deg = wrap_degrees(rad_to_deg(std::atan2(my, mx)));
    est.speed_px_per_frame = median_of([](const FrameVec& f) { return f.speed; });
    double mean_moving = 0.0;
    for (std::size_t i = start; i < per_frame.size(); ++i)
        mean_moving += per_frame[i].moving_fraction;
    mean_moving /= static_cast<double>(take);
    est.confidence = std::min(1.0, (static_cast<double>(per_frame.size()) /
                                    static_cast<double>(flows.size())) *
                                       std::min(1.0, 5.0 * mean_moving));
    est.estimable = true;
    return est;
}

void save_wind_csv(const WindEstimate& wind, const std::string& path) {
    CsvTable t;
    t.header = {"direction_deg", "speed_px_per_frame", "confidence", "estimable"};
    t.rows.push_back({format_double(wind.direction_deg, 8), format_double(wind.speed_px_per_frame, 8),
                      format_double(wind.confidence, 6), wind.estimable ? "1" : "0"});
    write_csv(t, path);
}

WindEstimate load_wind_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    WindEstimate w;
    if (t.rows.empty()) throw IoError("wind csv has no rows: " + path);
    const auto& r = t.rows[0];
    w.direction_deg = std::stod(r[0]);
    w.speed_px_per_frame = std::stod(r[1]);
    w.confidence = std::stod(r[2]);
    w.estimable = r[3] == "1";
    return w;
}

}  // namespace skylens::prep
