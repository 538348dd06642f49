#include "skylens/mirror.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "skylens/csv.hpp"
#include "skylens/errors.hpp"
#include "skylens/geometry.hpp"

namespace skylens::mirror {

double OpticalConfig::camera_half_fov_rad() const {
    return std::atan(sensor_half_width_mm / focal_length_mm);
}

double OpticalConfig::camera_half_fov_deg() const { return rad_to_deg(camera_half_fov_rad()); }

double OpticalConfig::target_half_fov_rad() const { return deg_to_rad(target_half_fov_deg); }

double OpticalConfig::tangent_scale() const {
    return std::tan(target_half_fov_rad()) / std::tan(camera_half_fov_rad());
}

void OpticalConfig::validate() const {
    if (!(sensor_half_width_mm > 0.0))
        throw std::invalid_argument("sensor_half_width_mm must be positive");
    if (!(focal_length_mm > 0.0)) throw std::invalid_argument("focal_length_mm must be positive");
    if (!(camera_height_m > 0.0)) throw std::invalid_argument("camera_height_m must be positive");
    const double cam = camera_half_fov_deg();
    if (target_half_fov_deg < cam)
        throw std::invalid_argument("target half FoV must be at least the camera half FoV");
    if (!(target_half_fov_deg < 90.0))
        throw std::invalid_argument("target half FoV must be below 90 degrees");
}

std::string to_string(MirrorKind kind) {
    switch (kind) {
        case MirrorKind::Designed: return "designed";
        case MirrorKind::Hemisphere: return "hemisphere";
        case MirrorKind::Plane: return "plane";
    }
    return "designed";
}

MirrorKind mirror_kind_from_string(const std::string& name) {
    if (name == "designed" || name == "hyperboloid") return MirrorKind::Designed;
    if (name == "hemisphere" || name == "hemispherical") return MirrorKind::Hemisphere;
    if (name == "plane") return MirrorKind::Plane;
    throw std::invalid_argument("unknown mirror kind: " + name);
}

namespace {

// Index of the knot interval containing rho.
std::size_t find_interval(const std::vector<ProfileSample>& s, double rho) {
    auto it = std::upper_bound(s.begin(), s.end(), rho,
                               [](double v, const ProfileSample& p) { return v < p.rho; });
    std::size_t i = static_cast<std::size_t>(it - s.begin());
    if (i == 0) return 0;
    if (i >= s.size()) return s.size() - 2;
    return i - 1;
}

struct HermiteEval {
    double z;
    double slope;
};

HermiteEval hermite(const ProfileSample& p0, const ProfileSample& p1, double rho) {
    const double h = p1.rho - p0.rho;
    const double t = (rho - p0.rho) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    HermiteEval e;
    e.z = h00 * p0.z + h10 * h * p0.slope + h01 * p1.z + h11 * h * p1.slope;
    const double d00 = (6 * t2 - 6 * t) / h;
    const double d10 = 3 * t2 - 4 * t + 1;
    const double d01 = (-6 * t2 + 6 * t) / h;
    const double d11 = 3 * t2 - 2 * t;
    e.slope = d00 * p0.z + d10 * p0.slope + d01 * p1.z + d11 * p1.slope;
    return e;
}

}  // namespace

double MirrorProfile::z_at(double rho) const {
    if (samples.size() < 2) throw std::invalid_argument("profile needs at least 2 samples");
    const std::size_t i = find_interval(samples, rho);
    return hermite(samples[i], samples[i + 1], rho).z;
}

double MirrorProfile::slope_at(double rho) const {
    if (samples.size() < 2) throw std::invalid_argument("profile needs at least 2 samples");
    const std::size_t i = find_interval(samples, rho);
    return hermite(samples[i], samples[i + 1], rho).slope;
}

void MirrorProfile::validate() const {
    if (samples.size() < 2) throw std::invalid_argument("profile needs at least 2 samples");
    if (samples.front().rho != 0.0) throw std::invalid_argument("profile must start at rho = 0");
    if (std::abs(samples.front().slope) > 1e-12)
        throw std::invalid_argument("profile slope at the vertex must be 0");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].rho > samples[i - 1].rho))
            throw std::invalid_argument("profile rho must be strictly increasing");
        if (samples[i].z > samples[i - 1].z + 1e-12)
            throw std::invalid_argument("profile z must be non-increasing");
    }
    if (!(rim_radius_m > 0.0)) throw std::invalid_argument("rim radius must be positive");
}

namespace {

// Slope of the designed surface at (rho, z): the normal must take the
// camera ray (tangent rho/-z from the axis) to the sky direction whose
// tangent is scaled by s.
double designed_slope(double rho, double z, double tangent_scale, bool& unreachable) {
    const double alpha = std::atan2(rho, -z);
    const double sky_tan = tangent_scale * std::tan(alpha);
    if (!std::isfinite(sky_tan)) {
        unreachable = true;
        return 0.0;
    }
    const double phi = std::atan(sky_tan);
    if (phi >= deg_to_rad(89.9999)) {
        unreachable = true;
        return 0.0;
    }
    const double nr = std::sin(phi) - std::sin(alpha);
    const double nz = std::cos(phi) + std::cos(alpha);
    return -nr / nz;
}

double rk4_step(double rho, double z, double h, double tangent_scale, bool& unreachable) {
    const double k1 = designed_slope(rho, z, tangent_scale, unreachable);
    const double k2 = designed_slope(rho + 0.5 * h, z + 0.5 * h * k1, tangent_scale, unreachable);
    const double k3 = designed_slope(rho + 0.5 * h, z + 0.5 * h * k2, tangent_scale, unreachable);
    const double k4 = designed_slope(rho + h, z + h * k3, tangent_scale, unreachable);
    return z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

MirrorProfile solve_profile(const OpticalConfig& config, double step_m) {
    config.validate();
    if (!(step_m > 0.0)) throw std::invalid_argument("step must be positive");
    if (step_m > 1e-3) throw std::invalid_argument("step must be at most 1e-3 m");

    const double s = config.tangent_scale();
    const double alpha_edge = config.camera_half_fov_rad();
    const bool planar = std::abs(s - 1.0) < 1e-12;

    MirrorProfile profile;
    profile.kind = planar ? MirrorKind::Plane : MirrorKind::Designed;

    double rho = 0.0;
    double z = -config.camera_height_m;
    bool unreachable = false;
    profile.samples.push_back({0.0, z, 0.0});

    const double rho_limit = 10.0 * config.camera_height_m;  // safety bound
    while (true) {
        const double alpha = std::atan2(rho, -z);
        if (alpha >= alpha_edge) break;

        // Shorten the final step so the last sample lands on the edge ray.
        double h = step_m;
        double z_next = rk4_step(rho, z, h, s, unreachable);
        if (unreachable) throw std::runtime_error("target FoV unreachable: sky angle reached 90 deg");
        double alpha_next = std::atan2(rho + h, -z_next);
        if (alpha_next > alpha_edge) {
            double lo = 0.0, hi = h;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double zm = rk4_step(rho, z, mid, s, unreachable);
                if (std::atan2(rho + mid, -zm) < alpha_edge)
                    lo = mid;
                else
                    hi = mid;
            }
            h = hi;
            z_next = rk4_step(rho, z, h, s, unreachable);
        }
        rho += h;
        z = z_next;
        const double slope = designed_slope(rho, z, s, unreachable);
        if (unreachable) throw std::runtime_error("target FoV unreachable: sky angle reached 90 deg");
        profile.samples.push_back({rho, z, slope});
        if (rho > rho_limit)
            throw std::runtime_error("target FoV unreachable: profile integration diverged");
    }

    profile.rim_radius_m = profile.samples.back().rho;
    return profile;
}

MirrorProfile hemisphere_profile(double radius_m, double camera_height_m, int sample_count) {
    if (!(radius_m > 0.0)) throw std::invalid_argument("radius must be positive");
    if (!(camera_height_m > 0.0)) throw std::invalid_argument("camera height must be positive");
    if (sample_count < 8) throw std::invalid_argument("sample_count must be at least 8");

    MirrorProfile profile;
    profile.kind = MirrorKind::Hemisphere;
    const double rho_max = 0.999 * radius_m;
    const double zc = -camera_height_m - radius_m;  // sphere center
    profile.samples.reserve(static_cast<std::size_t>(sample_count) + 1);
    for (int i = 0; i <= sample_count; ++i) {
        const double rho = rho_max * static_cast<double>(i) / sample_count;
        const double root = std::sqrt(radius_m * radius_m - rho * rho);
        profile.samples.push_back({rho, zc + root, -rho / root});
    }
    profile.rim_radius_m = rho_max;
    return profile;
}

double matched_hemisphere_radius(const OpticalConfig& config) {
    config.validate();
    // Rim at the equator (rho = R, depth camera_height + R) seen under the
    // camera's edge-ray angle.
    const double t = std::tan(config.camera_half_fov_rad());
    return config.camera_height_m * t / (1.0 - t);
}

TraceResult trace_camera_ray(const MirrorProfile& profile, double camera_tangent) {
    TraceResult out{};
    const auto& s = profile.samples;
    if (s.size() < 2) throw std::invalid_argument("profile needs at least 2 samples");
    if (camera_tangent < 0.0) throw std::invalid_argument("camera tangent must be non-negative");

    double hit_rho;
    if (camera_tangent == 0.0) {
        hit_rho = 0.0;
    } else {
        // Ray height at radius rho: z = -rho / tan(alpha). Find the first
        // knot interval where the ray dips below the surface.
        const double inv_t = 1.0 / camera_tangent;
        auto gap = [&](double rho, double z_prof) { return -rho * inv_t - z_prof; };
        double g_prev = gap(s[0].rho, s[0].z);  // camera_height > 0 at the vertex
        std::size_t bracket = s.size();
        for (std::size_t i = 1; i < s.size(); ++i) {
            const double g = gap(s[i].rho, s[i].z);
            if (g_prev > 0.0 && g <= 0.0) {
                bracket = i;
                break;
            }
            g_prev = g;
        }
        if (bracket == s.size()) return out;  // ray clears the rim
        double lo = s[bracket - 1].rho, hi = s[bracket].rho;
        for (int it = 0; it < 64; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double g = gap(mid, hermite(s[bracket - 1], s[bracket], mid).z);
            if (g > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        hit_rho = 0.5 * (lo + hi);
    }

    const double z = profile.z_at(hit_rho);
    const double m = profile.slope_at(hit_rho);
    const double inv_len = 1.0 / std::sqrt(1.0 + m * m);
    const Vec2 normal{-m * inv_len, inv_len};
    const double alpha = std::atan(camera_tangent);
    const Vec2 incoming{std::sin(alpha), -std::cos(alpha)};
    const Vec2 outgoing = reflect(incoming, normal);

    out.rho = hit_rho;
    out.z = z;
    out.hit = true;
    if (outgoing.y > 1e-12) {
        out.hit_sky = true;
        out.sky_tangent = outgoing.x / outgoing.y;
    }
    return out;
}

std::optional<double> AngularMapping::radius_at_tangent(double tangent) const {
    double prev_u = 0.0, prev_t = 0.0;
    bool have_prev = true;  // the mapping starts at (0, 0) by symmetry
    for (const auto& sm : samples) {
        if (!sm.sky_tangent) continue;
        const double t = *sm.sky_tangent;
        if (t >= tangent && have_prev) {
            if (t == prev_t) return sm.sensor_radius_norm;
            const double w = (tangent - prev_t) / (t - prev_t);
            return prev_u + w * (sm.sensor_radius_norm - prev_u);
        }
        prev_u = sm.sensor_radius_norm;
        prev_t = t;
        have_prev = true;
    }
    return std::nullopt;
}

double AngularMapping::max_tangent() const {
    double m = 0.0;
    for (const auto& sm : samples)
        if (sm.sky_tangent) m = std::max(m, *sm.sky_tangent);
    return m;
}

AngularMapping forward_trace_mapping(const MirrorProfile& profile, const OpticalConfig& config,
                                     int n_rays) {
    if (n_rays < 16) throw std::invalid_argument("n_rays must be at least 16");
    profile.validate();
    config.validate();

    struct Raw {
        double sensor_radius;
        std::optional<double> tangent;
    };
    std::vector<Raw> raw;
    raw.reserve(static_cast<std::size_t>(n_rays));
    double max_valid_radius = 0.0;
    for (int k = 1; k <= n_rays; ++k) {
        const double r = config.sensor_half_width_mm * static_cast<double>(k) / n_rays;
        const double cam_tan = r / config.focal_length_mm;
        const TraceResult t = trace_camera_ray(profile, cam_tan);
        if (t.hit && t.hit_sky) {
            raw.push_back({r, t.sky_tangent});
            max_valid_radius = r;
        } else {
            raw.push_back({r, std::nullopt});
        }
    }
    if (max_valid_radius <= 0.0)
        throw std::runtime_error("no traced ray reached the sky; profile and config disagree");

    AngularMapping mapping;
    mapping.samples.reserve(raw.size());
    for (const auto& r : raw)
        mapping.samples.push_back({r.sensor_radius / max_valid_radius, r.tangent});
    return mapping;
}

ConicFit fit_conic(const MirrorProfile& profile) {
    const auto& s = profile.samples;
    if (s.size() < 10) throw std::invalid_argument("conic fit needs at least 10 samples");

    // Center and uniformly scale for conditioning; eccentricity is invariant.
    double mz = 0.0;
    for (const auto& p : s) mz += p.z;
    mz /= static_cast<double>(s.size());
    double spread = 0.0;
    for (const auto& p : s)
        spread += p.rho * p.rho + (p.z - mz) * (p.z - mz);
    spread = std::sqrt(spread / (2.0 * static_cast<double>(s.size())));
    if (spread <= 0.0) throw std::invalid_argument("profile samples are a single point");
    const double inv = 1.0 / spread;

    // Collinear samples (a plane seen in cross-section) leave the conic
    // underdetermined; report the degenerate fit directly.
    {
        double max_dev = 0.0;
        for (const auto& p : s) max_dev = std::max(max_dev, std::abs(p.z - mz));
        if (max_dev * inv < 1e-9) {
            ConicFit flat;
            flat.degenerate = true;
            flat.e = 1.0;
            flat.f = -mz;
            double sum_sq = 0.0;
            for (const auto& p : s) sum_sq += (p.z - mz) * (p.z - mz);
            flat.rms_residual_m = std::sqrt(sum_sq / static_cast<double>(s.size()));
            return flat;
        }
    }

    // Mirror across the axis: the profile describes a surface of revolution.
    const std::size_t n = 2 * s.size();
    Eigen::MatrixXd design(n, 6);
    std::size_t row = 0;
    for (const auto& p : s) {
        for (const double sign : {1.0, -1.0}) {
            const double x = sign * p.rho * inv;
            const double y = (p.z - mz) * inv;
            design(row, 0) = x * x;
            design(row, 1) = x * y;
            design(row, 2) = y * y;
            design(row, 3) = x;
            design(row, 4) = y;
            design(row, 5) = 1.0;
            ++row;
        }
    }

    // Algebraic fit, then Sampson reweighting to approximate the geometric
    // least-squares conic (plain algebraic fits are biased on short arcs).
    Eigen::VectorXd v;
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
    for (int pass = 0; pass < 6; ++pass) {
        Eigen::MatrixXd weighted = weights.asDiagonal() * design;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted, Eigen::ComputeThinV);
        v = svd.matrixV().col(5);
        v.normalize();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = design(i, 3);
            const double y = design(i, 4);
            const double gx = 2 * v(0) * x + v(1) * y + v(3);
            const double gy = v(1) * x + 2 * v(2) * y + v(4);
            weights(i) = 1.0 / std::max(std::hypot(gx, gy), 1e-12);
        }
    }

    ConicFit fit;
    fit.frame_scale = spread;
    fit.frame_z_offset = mz;
    fit.a = v(0);
    fit.b = v(1);
    fit.c = v(2);
    fit.d = v(3);
    fit.e = v(4);
    fit.f = v(5);

    // Geometric residual: |F| / |grad F|, in meters after undoing the scale.
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = design(i, 3);
        const double y = design(i, 4);
        const double F = fit.a * x * x + fit.b * x * y + fit.c * y * y + fit.d * x + fit.e * y +
                         fit.f;
        const double gx = 2 * fit.a * x + fit.b * y + fit.d;
        const double gy = fit.b * x + 2 * fit.c * y + fit.e;
        const double grad = std::hypot(gx, gy);
        const double dist = grad > 1e-300 ? std::abs(F) / grad : std::abs(F);
        sum_sq += dist * dist;
    }
    fit.rms_residual_m = std::sqrt(sum_sq / static_cast<double>(n)) * spread;

    // Quadratic-part eigenvalues decide the conic class.
    const double tr = fit.a + fit.c;
    const double det_term = std::sqrt(std::max(0.0, (fit.a - fit.c) * (fit.a - fit.c) + fit.b * fit.b));
    const double l1 = 0.5 * (tr + det_term);
    const double l2 = 0.5 * (tr - det_term);
    const double quad_norm = std::max(std::abs(l1), std::abs(l2));
    const double lin_norm = std::hypot(fit.d, fit.e);

    if (quad_norm < 1e-7 * std::max(lin_norm, 1e-12)) {
        fit.degenerate = true;
        fit.eccentricity = 0.0;
        return fit;
    }

    const double det = l1 * l2;
    if (std::abs(det) < 1e-12 * quad_norm * quad_norm) {
        fit.eccentricity = 1.0;  // parabolic
        return fit;
    }

    // Reduce to central form: lambda1 u^2 + lambda2 w^2 = -k.
    Eigen::Matrix2d A;
    A << fit.a, 0.5 * fit.b, 0.5 * fit.b, fit.c;
    Eigen::Vector2d bvec(fit.d, fit.e);
    Eigen::Vector2d center = A.colPivHouseholderQr().solve(-0.5 * bvec);
    const double k = 0.5 * bvec.dot(center) + fit.f;

    const double q1 = -k / l1;  // squared semi-axis along eigenvector 1
    const double q2 = -k / l2;
    if (q1 > 0.0 && q2 > 0.0) {
        const double major = std::max(q1, q2);
        const double minor = std::min(q1, q2);
        fit.eccentricity = std::sqrt(std::max(0.0, 1.0 - minor / major));
    } else if (q1 > 0.0 || q2 > 0.0) {
        const double a2 = q1 > 0.0 ? q1 : q2;
        const double b2 = q1 > 0.0 ? -q2 : -q1;
        fit.eccentricity = std::sqrt(1.0 + b2 / a2);
    } else {
        fit.degenerate = true;  // empty locus
        fit.eccentricity = 0.0;
    }
    return fit;
}

void export_profile_csv(const MirrorProfile& profile, const std::string& path) {
    CsvTable t;
    t.header = {"rho", "z", "slope"};
    t.rows.reserve(profile.samples.size());
    for (const auto& p : profile.samples)
        t.rows.push_back({format_double(p.rho, 9), format_double(p.z, 9), format_double(p.slope, 9)});
    write_csv(t, path);
}

ConicFit fit_conic_and_export(const MirrorProfile& profile, const std::string& path) {
    ConicFit fit = fit_conic(profile);
    export_profile_csv(profile, path);
    return fit;
}

MirrorProfile load_profile_csv(const std::string& path, MirrorKind kind) {
    const CsvTable t = read_csv(path);
    const int cr = t.column("rho"), cz = t.column("z"), cs = t.column("slope");
    if (cr < 0 || cz < 0 || cs < 0) throw IoError("profile csv missing rho/z/slope columns: " + path);
    MirrorProfile p;
    p.kind = kind;
    for (const auto& row : t.rows)
        p.samples.push_back({std::stod(row[cr]), std::stod(row[cz]), std::stod(row[cs])});
    if (p.samples.empty()) throw IoError("profile csv has no rows: " + path);
    p.rim_radius_m = p.samples.back().rho;
    return p;
}

}  // namespace skylens::mirror
