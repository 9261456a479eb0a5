#include "dtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "dtwin/closest_point.hpp"
#include "dtwin/error.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

const std::array<const char*, ShapeMetrics::size>& ShapeMetrics::names() {
    static const std::array<const char*, size> n{"L1",     "L2",     "phi",   "rho_box", "E",
                                                 "A_skew", "A_kurt", "A_cov", "alpha"};
    return n;
}

const std::array<const char*, ShapeRatios::size>& ShapeRatios::names() {
    static const std::array<const char*, size> n{"R_V",     "R_A",    "R_phi",  "R_rho", "R_E",
                                                 "R_alpha", "R_skew", "R_kurt", "R_cov"};
    return n;
}

const std::array<const char*, SimilarityMetrics::size>& SimilarityMetrics::names() {
    static const std::array<const char*, size> n{"D", "dN", "dTheta"};
    return n;
}

AreaMoments area_moments(const std::vector<double>& values) {
    AreaMoments m;
    if (values.empty()) return m;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double sd = std::sqrt(m2);
    if (mean == 0.0 || sd <= 1e-12 * std::abs(mean)) return m;
    m.skew = m3 / (sd * sd * sd);
    m.kurt = m4 / (m2 * m2);
    m.cov = sd / mean;
    return m;
}

Sphere ritter_bounding_sphere(const std::vector<Vec3>& points) {
    Sphere s;
    if (points.empty()) return s;
    auto farthest_from = [&](const Vec3& from) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double d = norm_sq(points[i] - from);
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        return points[best];
    };
    const Vec3 y = farthest_from(points.front());
    const Vec3 z = farthest_from(y);
    s.center = 0.5 * (y + z);
    s.radius = 0.5 * norm(z - y);
    for (const auto& p : points) {
        const double d = norm(p - s.center);
        if (d > s.radius) {
            const double r = 0.5 * (s.radius + d);
            s.center += (p - s.center) * ((d - r) / d);
            s.radius = r;
        }
    }
    return s;
}

ShapeMetrics compute_shape_metrics(const TriangleMesh& mesh) {
    const MeshSummary summary = mesh_summary(mesh);
    if (!(summary.area > 0.0)) throw MathError("degenerate mesh: zero surface area");
    const Vec3 e = summary.bbox.extents();
    std::array<double, 3> ext{e.x, e.y, e.z};
    std::sort(ext.begin(), ext.end(), std::greater<>());
    if (!(ext[2] > 1e-12 * ext[0])) throw MathError("degenerate mesh: flat bounding box");

    ShapeMetrics m;
    m.L1 = ext[0] / ext[1];
    m.L2 = ext[0] / ext[2];
    const double v = summary.volume;
    m.phi = std::cbrt(std::numbers::pi) * std::pow(6.0 * v, 2.0 / 3.0) / summary.area;
    m.rho_box = v / (ext[0] * ext[1] * ext[2]);
    const double r_volume = std::cbrt(3.0 * v / (4.0 * std::numbers::pi));
    const double r_bound = ritter_bounding_sphere(mesh.vertices).radius;
    m.E = r_volume / r_bound;
    const AreaMoments am = area_moments(face_areas(mesh));
    m.A_skew = am.skew;
    m.A_kurt = am.kurt;
    m.A_cov = am.cov;
    m.alpha = static_cast<double>(summary.face_count) / static_cast<double>(summary.vertex_count);
    return m;
}

ShapeProfile shape_profile(const TriangleMesh& mesh) {
    return {compute_shape_metrics(mesh), mesh_summary(mesh)};
}

ShapeRatios compute_shape_ratios(const ShapeProfile& high, const ShapeProfile& low) {
    constexpr double eps = 1e-12;
    ShapeRatios r;
    auto ratio = [&](double lo, double hi, const char* name) {
        if (std::abs(hi) < eps) {
            if (std::abs(lo) < eps) return 1.0;
            r.flagged.emplace_back(name);
            return 0.0;
        }
        return lo / hi;
    };
    const auto& h = high.metrics;
    const auto& l = low.metrics;
    r.R_V = ratio(low.summary.volume, high.summary.volume, "R_V");
    r.R_A = ratio(low.summary.area, high.summary.area, "R_A");
    r.R_phi = ratio(l.phi, h.phi, "R_phi");
    r.R_rho = ratio(l.rho_box, h.rho_box, "R_rho");
    r.R_E = ratio(l.E, h.E, "R_E");
    r.R_alpha = ratio(l.alpha, h.alpha, "R_alpha");
    r.R_skew = ratio(l.A_skew, h.A_skew, "R_skew");
    r.R_kurt = ratio(l.A_kurt, h.A_kurt, "R_kurt");
    r.R_cov = ratio(l.A_cov, h.A_cov, "R_cov");
    return r;
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
    const auto areas = face_areas(mesh);
    const double total = std::accumulate(areas.begin(), areas.end(), 0.0);
    std::vector<SurfaceSample> out;
    if (!(total > 0.0) || count == 0) return out;

    // Shares are quantized to 2^-20 of a sample so that bit-level noise in the
    // areas (rotations, rescaling) does not move samples between faces.
    constexpr int frac_bits = 20;
    const std::size_t nf = areas.size();
    std::vector<std::size_t> per_face(nf);
    std::vector<std::uint64_t> remainder(nf);
    std::size_t assigned = 0;
    for (std::size_t f = 0; f < nf; ++f) {
        const double share = static_cast<double>(count) * areas[f] / total;
        const auto q = static_cast<std::uint64_t>(std::llround(std::ldexp(share, frac_bits)));
        per_face[f] = static_cast<std::size_t>(q >> frac_bits);
        remainder[f] = q & ((std::uint64_t{1} << frac_bits) - 1);
        assigned += per_face[f];
    }
    if (assigned < count) {
        std::vector<std::size_t> order(nf);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t k = 0; assigned < count; k = (k + 1) % nf) {
            ++per_face[order[k]];
            ++assigned;
        }
    }

    Rng rng = make_rng(seed, 0x5a3b1e);
    out.reserve(count);
    for (std::size_t f = 0; f < nf && out.size() < count; ++f) {
        const auto& face = mesh.faces[f];
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3 ab = mesh.vertices[face[1]] - a;
        const Vec3 ac = mesh.vertices[face[2]] - a;
        for (std::size_t k = 0; k < per_face[f] && out.size() < count; ++k) {
            double r1 = unit_double(rng);
            double r2 = unit_double(rng);
            if (r1 + r2 > 1.0) {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            out.push_back({a + r1 * ab + r2 * ac, static_cast<std::uint32_t>(f)});
        }
    }
    return out;
}

bool mean_dihedral_deg(const TriangleMesh& mesh, double& mean) {
    // Coplanar neighbours are triangulation artifacts, not surface features.
    constexpr double coplanar_deg = 1e-6;
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, int>> first_face;
    std::unordered_map<std::uint64_t, int> use;
    first_face.reserve(mesh.faces.size() * 3);
    use.reserve(mesh.faces.size() * 3);
    std::vector<std::uint64_t> keys;
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int i = 0; i < 3; ++i) {
            std::uint64_t a = face[i], b = face[(i + 1) % 3];
            if (a > b) std::swap(a, b);
            const std::uint64_t key = (a << 32) | b;
            const int n = ++use[key];
            if (n == 1) {
                first_face[key] = {f, 0};
                keys.push_back(key);
            } else if (n == 2) {
                first_face[key].second = static_cast<int>(f);
            }
        }
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (auto key : keys) {
        if (use[key] != 2) continue;
        const auto [f0, f1] = first_face[key];
        const double between = angle_deg(face_normal(mesh, f0), face_normal(mesh, static_cast<std::size_t>(f1)));
        if (between < coplanar_deg) continue;
        sum += 180.0 - between;
        ++count;
    }
    if (count == 0) return false;
    mean = sum / static_cast<double>(count);
    return true;
}

namespace {

struct SampleTerms {
    double dist = 0.0;
    double normal_dev = 0.0;
};

template <typename ClosestFn>
SimilarityMetrics similarity_impl(const TriangleMesh& high, const TriangleMesh& low,
                                  const SimilarityConfig& config, bool parallel, ClosestFn&& closest) {
    if (high.empty() || low.empty()) throw ValidationError("compute_similarity: empty mesh");
    if (config.samples < 100) throw ValidationError("compute_similarity: samples must be >= 100");
    const double diag = bounding_box(high).diagonal();
    if (!(diag > 0.0)) throw MathError("compute_similarity: degenerate high-poly bounding box");

    const auto samples = sample_surface(low, config.samples, config.seed);
    if (samples.empty()) throw MathError("compute_similarity: low-poly mesh has zero area");
    std::vector<Vec3> low_normals(low.faces.size());
    for (std::size_t f = 0; f < low.faces.size(); ++f) low_normals[f] = face_normal(low, f);

    std::vector<SampleTerms> terms(samples.size());
    const auto n = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        const ClosestHit hit = closest(s.point);
        terms[static_cast<std::size_t>(i)] = {
            std::sqrt(hit.dist_sq), angle_deg(low_normals[s.face], face_normal(high, hit.face))};
    }

    // Serial reduction keeps the sum order fixed.
    double dist_sum = 0.0, normal_sum = 0.0;
    for (const auto& t : terms) {
        dist_sum += t.dist;
        normal_sum += t.normal_dev;
    }
    SimilarityMetrics m;
    const double count = static_cast<double>(terms.size());
    m.D = dist_sum / count / diag;
    m.dN = normal_sum / count;
    double mean_high = 0.0, mean_low = 0.0;
    if (mean_dihedral_deg(high, mean_high) && mean_dihedral_deg(low, mean_low)) {
        m.dTheta = std::abs(mean_high - mean_low);
    } else {
        m.open_mesh = true;
    }
    return m;
}

}  // namespace

SimilarityMetrics compute_similarity(const TriangleMesh& high, const TriangleMesh& low,
                                     const SimilarityConfig& config) {
    if (high.empty()) throw ValidationError("compute_similarity: empty mesh");
    const TriangleBvh bvh(high);
    return similarity_impl(high, low, config, config.parallel,
                           [&](const Vec3& p) { return bvh.closest(p); });
}

SimilarityMetrics compute_similarity_reference(const TriangleMesh& high, const TriangleMesh& low,
                                               const SimilarityConfig& config) {
    return similarity_impl(high, low, config, false,
                           [&](const Vec3& p) { return closest_point_brute_force(high, p); });
}

}  // namespace dtwin
