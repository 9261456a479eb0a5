#include "dtwin/decimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <unordered_map>

#include "dtwin/error.hpp"

namespace dtwin {

namespace {

constexpr std::array<double, 3> edge_weight_values{0.0, 0.5, 1.0};
constexpr std::array<double, 3> normal_limit_values{15.0, 45.0, 90.0};
// Scales the squared-edge-length term against the quadric error.
constexpr double length_term_scale = 0.1;
constexpr std::size_t min_faces = 4;

int ordinal(double value, const std::array<double, 3>& allowed) {
    for (int i = 0; i < 3; ++i) {
        if (value == allowed[i]) return i;
    }
    return -1;
}

/// Symmetric 4x4 quadric stored as its upper triangle.
struct Quadric {
    // a2 ab ac ad b2 bc bd c2 cd d2
    std::array<double, 10> q{};

    static Quadric plane(const Vec3& n, double d, double weight) {
        Quadric k;
        k.q = {n.x * n.x, n.x * n.y, n.x * n.z, n.x * d, n.y * n.y,
               n.y * n.z, n.y * d,   n.z * n.z, n.z * d, d * d};
        for (auto& v : k.q) v *= weight;
        return k;
    }
    Quadric& operator+=(const Quadric& o) {
        for (int i = 0; i < 10; ++i) q[i] += o.q[i];
        return *this;
    }
    double error(const Vec3& p) const {
        const double x = p.x, y = p.y, z = p.z;
        return q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x + q[4] * y * y +
               2 * q[5] * y * z + 2 * q[6] * y + q[7] * z * z + 2 * q[8] * z + q[9];
    }
    /// Minimizer of the quadric, if the 3x3 system is well conditioned.
    bool optimum(Vec3& out, double scale_sq) const {
        const double a = q[0], b = q[1], c = q[2], e = q[4], f = q[5], i = q[7];
        const double det = a * (e * i - f * f) - b * (b * i - f * c) + c * (b * f - e * c);
        const double magnitude = (std::abs(a) + std::abs(e) + std::abs(i));
        if (!(std::abs(det) > 1e-10 * magnitude * magnitude * magnitude) || magnitude == 0.0) return false;
        const Vec3 rhs{-q[3], -q[6], -q[8]};
        const double inv = 1.0 / det;
        // Cramer's rule on the symmetric system.
        out.x = inv * (rhs.x * (e * i - f * f) - b * (rhs.y * i - f * rhs.z) + c * (rhs.y * f - e * rhs.z));
        out.y = inv * (a * (rhs.y * i - f * rhs.z) - rhs.x * (b * i - f * c) + c * (b * rhs.z - rhs.y * c));
        out.z = inv * (a * (e * rhs.z - rhs.y * f) - b * (b * rhs.z - rhs.y * c) + rhs.x * (b * f - e * c));
        (void)scale_sq;
        return std::isfinite(out.x) && std::isfinite(out.y) && std::isfinite(out.z);
    }
};

struct Candidate {
    double cost;
    std::uint32_t u;
    std::uint32_t v;
    std::uint32_t version_u;
    std::uint32_t version_v;
    Vec3 target;
};

struct CandidateOrder {
    // Max-heap comparator inverted: smallest cost, then lowest edge, on top.
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.cost != b.cost) return a.cost > b.cost;
        if (a.u != b.u) return a.u > b.u;
        return a.v > b.v;
    }
};

class Collapser {
public:
    Collapser(const TriangleMesh& mesh, const DecimationParams& params)
        : params_(params),
          pos_(mesh.vertices),
          faces_(mesh.faces),
          face_alive_(mesh.faces.size(), true),
          vertex_alive_(mesh.vertices.size(), true),
          vertex_faces_(mesh.vertices.size()),
          version_(mesh.vertices.size(), 0),
          boundary_(mesh.vertices.size(), false),
          quadric_(mesh.vertices.size()),
          alive_faces_(mesh.faces.size()) {
        const double diag = bounding_box(mesh).diagonal();
        diag_sq_ = diag > 0.0 ? diag * diag : 1.0;
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            for (auto v : faces_[f]) vertex_faces_[v].push_back(f);
        }
        build_quadrics();
    }

    std::size_t run(std::size_t target) {
        for (std::uint32_t v = 0; v < pos_.size(); ++v) push_edges_of(v);
        std::size_t collapses = 0;
        while (alive_faces_ > target && !heap_.empty()) {
            const Candidate c = heap_.top();
            heap_.pop();
            if (!vertex_alive_[c.u] || !vertex_alive_[c.v]) continue;
            if (version_[c.u] != c.version_u || version_[c.v] != c.version_v) continue;
            if (!try_collapse(c)) continue;
            ++collapses;
        }
        return collapses;
    }

    TriangleMesh result() const {
        TriangleMesh out;
        std::vector<std::uint32_t> remap(pos_.size(), UINT32_MAX);
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f]) continue;
            Face nf{};
            for (int k = 0; k < 3; ++k) {
                const auto v = faces_[f][k];
                if (remap[v] == UINT32_MAX) {
                    remap[v] = static_cast<std::uint32_t>(out.vertices.size());
                    out.vertices.push_back(pos_[v]);
                }
                nf[k] = remap[v];
            }
            out.faces.push_back(nf);
        }
        return out;
    }

    std::size_t alive_faces() const { return alive_faces_; }

private:
    static std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    void build_quadrics() {
        std::unordered_map<std::uint64_t, std::pair<int, std::uint32_t>> edge_faces;
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            const auto& face = faces_[f];
            const Vec3 n = face_normal_of(face);
            const double d = -dot(n, pos_[face[0]]);
            const Quadric k = Quadric::plane(n, d, 1.0);
            for (auto v : face) quadric_[v] += k;
            for (int i = 0; i < 3; ++i) {
                auto& entry = edge_faces[edge_key(face[i], face[(i + 1) % 3])];
                ++entry.first;
                entry.second = f;
            }
        }
        // Boundary edges get a constraint plane perpendicular to their face.
        for (const auto& [key, entry] : edge_faces) {
            if (entry.first != 1) continue;
            const auto a = static_cast<std::uint32_t>(key >> 32);
            const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
            boundary_[a] = boundary_[b] = true;
            const Vec3 fn = face_normal_of(faces_[entry.second]);
            const Vec3 n = normalized(cross(pos_[b] - pos_[a], fn));
            if (norm_sq(n) == 0.0) continue;
            const Quadric k = Quadric::plane(n, -dot(n, pos_[a]), 1.0);
            quadric_[a] += k;
            quadric_[b] += k;
        }
    }

    Vec3 face_normal_of(const Face& f) const {
        return normalized(cross(pos_[f[1]] - pos_[f[0]], pos_[f[2]] - pos_[f[0]]));
    }

    std::vector<std::uint32_t> neighbours(std::uint32_t v) const {
        std::vector<std::uint32_t> out;
        for (auto f : vertex_faces_[v]) {
            if (!face_alive_[f]) continue;
            for (auto w : faces_[f]) {
                if (w != v) out.push_back(w);
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool place(std::uint32_t u, std::uint32_t v, Vec3& target) const {
        if (params_.preserve_boundary) {
            if (boundary_[u] && boundary_[v]) return false;
            if (boundary_[u]) {
                target = pos_[u];
                return true;
            }
            if (boundary_[v]) {
                target = pos_[v];
                return true;
            }
        }
        Quadric q = quadric_[u];
        q += quadric_[v];
        if (q.optimum(target, diag_sq_)) {
            // Reject optima that run far from the edge; fall back to the candidates below.
            const Vec3 mid = 0.5 * (pos_[u] + pos_[v]);
            if (norm_sq(target - mid) <= 4.0 * norm_sq(pos_[u] - pos_[v])) return true;
        }
        const Vec3 options[3] = {pos_[u], pos_[v], 0.5 * (pos_[u] + pos_[v])};
        double best = q.error(options[0]);
        target = options[0];
        for (int i = 1; i < 3; ++i) {
            const double e = q.error(options[i]);
            if (e < best) {
                best = e;
                target = options[i];
            }
        }
        return true;
    }

    void push_edge(std::uint32_t u, std::uint32_t v) {
        if (u > v) std::swap(u, v);
        Vec3 target;
        if (!place(u, v, target)) return;
        Quadric q = quadric_[u];
        q += quadric_[v];
        const double quadric_error = std::fmax(0.0, q.error(target));
        const double length_sq = norm_sq(pos_[u] - pos_[v]);
        const double cost =
            (quadric_error + params_.edge_weight * length_term_scale * length_sq) / diag_sq_;
        heap_.push({cost, u, v, version_[u], version_[v], target});
    }

    void push_edges_of(std::uint32_t v) {
        for (auto w : neighbours(v)) {
            if (v < w) push_edge(v, w);
        }
    }

    bool try_collapse(const Candidate& c) {
        const std::uint32_t u = c.u, v = c.v;
        // Faces sharing the edge and their opposite vertices.
        std::vector<std::uint32_t> shared, opposite;
        for (auto f : vertex_faces_[u]) {
            if (!face_alive_[f]) continue;
            const auto& face = faces_[f];
            if (std::find(face.begin(), face.end(), v) == face.end()) continue;
            shared.push_back(f);
            for (auto w : face) {
                if (w != u && w != v) opposite.push_back(w);
            }
        }
        if (shared.empty() || shared.size() > 2) return false;
        if (alive_faces_ - shared.size() < min_faces) return false;

        // Link condition: the one-rings of u and v may only meet at the opposite vertices.
        const auto nu = neighbours(u);
        const auto nv = neighbours(v);
        std::vector<std::uint32_t> common;
        std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
        std::sort(opposite.begin(), opposite.end());
        if (common != opposite) return false;
        // An interior edge joining two boundary vertices would pinch the surface.
        if (shared.size() == 2 && boundary_[u] && boundary_[v]) return false;

        // Geometric checks on every face that survives and moves.
        const double cos_limit = std::cos(params_.normal_limit_deg * 3.14159265358979323846 / 180.0);
        const double min_area2 = 1e-20 * diag_sq_ * diag_sq_;
        for (auto w : {u, v}) {
            for (auto f : vertex_faces_[w]) {
                if (!face_alive_[f]) continue;
                if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                Face moved = faces_[f];
                const Vec3 before = cross(pos_[moved[1]] - pos_[moved[0]], pos_[moved[2]] - pos_[moved[0]]);
                Vec3 p[3];
                for (int k = 0; k < 3; ++k) p[k] = (moved[k] == u || moved[k] == v) ? c.target : pos_[moved[k]];
                const Vec3 after = cross(p[1] - p[0], p[2] - p[0]);
                const double after_sq = norm_sq(after);
                if (after_sq <= min_area2) return false;
                const double before_sq = norm_sq(before);
                if (before_sq > 0.0) {
                    const double cosine = dot(before, after) / std::sqrt(before_sq * after_sq);
                    if (cosine < cos_limit) return false;
                }
            }
        }

        // Commit.
        for (auto f : shared) {
            face_alive_[f] = false;
            --alive_faces_;
        }
        for (auto f : vertex_faces_[v]) {
            if (!face_alive_[f]) continue;
            for (auto& w : faces_[f]) {
                if (w == v) w = u;
            }
            vertex_faces_[u].push_back(f);
        }
        vertex_faces_[v].clear();
        auto& fu = vertex_faces_[u];
        fu.erase(std::remove_if(fu.begin(), fu.end(), [&](std::uint32_t f) { return !face_alive_[f]; }), fu.end());
        std::sort(fu.begin(), fu.end());
        fu.erase(std::unique(fu.begin(), fu.end()), fu.end());

        vertex_alive_[v] = false;
        pos_[u] = c.target;
        quadric_[u] += quadric_[v];
        boundary_[u] = boundary_[u] || boundary_[v];

        const auto ring = neighbours(u);
        ++version_[u];
        for (auto w : ring) ++version_[w];
        push_edges_of(u);
        for (auto w : ring) push_edges_of(w);
        return true;
    }

    DecimationParams params_;
    std::vector<Vec3> pos_;
    std::vector<Face> faces_;
    std::vector<bool> face_alive_;
    std::vector<bool> vertex_alive_;
    std::vector<std::vector<std::uint32_t>> vertex_faces_;
    std::vector<std::uint32_t> version_;
    std::vector<bool> boundary_;
    std::vector<Quadric> quadric_;
    std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> heap_;
    std::size_t alive_faces_;
    double diag_sq_ = 1.0;
};

}  // namespace

void DecimationParams::validate() const {
    if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
        throw ValidationError("target_ratio must be in (0, 1], got " + std::to_string(target_ratio));
    }
    if (ordinal(edge_weight, edge_weight_values) < 0) {
        throw ValidationError("edge_weight must be one of {0, 0.5, 1}");
    }
    if (ordinal(normal_limit_deg, normal_limit_values) < 0) {
        throw ValidationError("normal_limit_deg must be one of {15, 45, 90}");
    }
}

std::string DecimationParams::label() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "r%.2f_w%.1f_n%.0f_b%d", target_ratio, edge_weight, normal_limit_deg,
                  preserve_boundary ? 1 : 0);
    return buf;
}

DecimationResult decimate(const TriangleMesh& mesh, const DecimationParams& params) {
    params.validate();
    validate(mesh, "decimate");
    DecimationResult r;
    r.faces_before = mesh.faces.size();
    const double wanted = params.target_ratio * static_cast<double>(mesh.faces.size());
    if (params.target_ratio == 1.0 || mesh.faces.size() <= min_faces) {
        r.mesh = mesh;
        r.faces_after = mesh.faces.size();
        r.infeasible = params.target_ratio < 1.0 && wanted < static_cast<double>(min_faces);
        return r;
    }
    const auto target = std::max<std::size_t>(min_faces, static_cast<std::size_t>(std::llround(wanted)));
    Collapser collapser(mesh, params);
    r.collapses = collapser.run(target);
    r.mesh = collapser.result();
    r.faces_after = r.mesh.faces.size();
    r.infeasible = static_cast<double>(r.faces_after) > 1.1 * wanted;
    return r;
}

ParamAxes default_axes() {
    return {{0.05, 0.1, 0.2, 0.35, 0.5, 0.75},
            {edge_weight_values.begin(), edge_weight_values.end()},
            {normal_limit_values.begin(), normal_limit_values.end()},
            {false, true}};
}

ParamGrid make_grid(const ParamAxes& axes) {
    ParamGrid g;
    g.axes = axes;
    for (double r : axes.target_ratios) {
        for (double w : axes.edge_weights) {
            for (double n : axes.normal_limits_deg) {
                for (bool b : axes.preserve_boundary) {
                    DecimationParams p{r, w, n, b};
                    p.validate();
                    g.combos.push_back(p);
                }
            }
        }
    }
    return g;
}

ParamGrid default_grid() { return make_grid(default_axes()); }

std::array<double, encoded_param_count> encode_params(const DecimationParams& params) {
    return {params.target_ratio, static_cast<double>(ordinal(params.edge_weight, edge_weight_values)),
            static_cast<double>(ordinal(params.normal_limit_deg, normal_limit_values)),
            params.preserve_boundary ? 1.0 : 0.0};
}

const std::array<const char*, encoded_param_count>& encoded_param_names() {
    static const std::array<const char*, encoded_param_count> n{"target_ratio", "edge_weight_ord",
                                                                "normal_limit_ord", "preserve_boundary"};
    return n;
}

}  // namespace dtwin
