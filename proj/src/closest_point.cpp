#include "dtwin/closest_point.hpp"

#include <algorithm>

namespace dtwin {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + ab * v + ac * w;
}

namespace {

// Distances within `tol` of the running minimum count as ties and go to the lowest
// face index, so the winner does not depend on rounding (or on the mesh's scale).
// dist_sq keeps the minimum; face and point belong to the winner.
inline void consider(const TriangleMesh& mesh, std::uint32_t f, const Vec3& p, double tol, ClosestHit& best) {
    const auto& face = mesh.faces[f];
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[face[0]], mesh.vertices[face[1]],
                                             mesh.vertices[face[2]]);
    const double d2 = norm_sq(p - q);
    const double d = std::sqrt(d2), b = std::sqrt(best.dist_sq);
    if (d < b - tol) {
        best = {d2, f, q};
    } else if (d <= b + tol) {
        if (f < best.face) {
            best.face = f;
            best.point = q;
        }
        best.dist_sq = std::min(best.dist_sq, d2);
    }
}

inline double tie_tolerance(const TriangleMesh& mesh) {
    return mesh.empty() ? 0.0 : 1e-10 * bounding_box(mesh).diagonal();
}

inline double box_dist_sq(const Aabb& box, const Vec3& p) {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double lo = box.min[i] - p[i];
        const double hi = p[i] - box.max[i];
        const double d = std::fmax(0.0, std::fmax(lo, hi));
        d2 += d * d;
    }
    return d2;
}

constexpr std::uint32_t leaf_size = 4;

}  // namespace

ClosestHit closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p) {
    ClosestHit best;
    const double tol = tie_tolerance(mesh);
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) consider(mesh, f, p, tol, best);
    return best;
}

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : mesh_(&mesh), tie_tol_(tie_tolerance(mesh)) {
    const auto n = static_cast<std::uint32_t>(mesh.faces.size());
    order_.resize(n);
    centroids_.resize(n);
    for (std::uint32_t f = 0; f < n; ++f) {
        order_[f] = f;
        const auto& face = mesh.faces[f];
        centroids_[f] = (mesh.vertices[face[0]] + mesh.vertices[face[1]] + mesh.vertices[face[2]]) / 3.0;
    }
    nodes_.reserve(n > 0 ? 2 * n / leaf_size + 2 : 1);
    if (n > 0) build(0, n);
}

std::uint32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box{mesh_->vertices[mesh_->faces[order_[begin]][0]], mesh_->vertices[mesh_->faces[order_[begin]][0]]};
    Aabb cbox{centroids_[order_[begin]], centroids_[order_[begin]]};
    for (std::uint32_t i = begin; i < end; ++i) {
        const auto& face = mesh_->faces[order_[i]];
        for (auto v : face) {
            box.min = component_min(box.min, mesh_->vertices[v]);
            box.max = component_max(box.max, mesh_->vertices[v]);
        }
        cbox.min = component_min(cbox.min, centroids_[order_[i]]);
        cbox.max = component_max(cbox.max, centroids_[order_[i]]);
    }
    nodes_[index].box = box;
    if (end - begin <= leaf_size) {
        nodes_[index].first = begin;
        nodes_[index].count = end - begin;
        return index;
    }
    const Vec3 ext = cbox.extents();
    const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = centroids_[a][axis], cb = centroids_[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[index].first = left;
    nodes_[index].count = 0;
    nodes_[index].right = right;
    return index;
}

ClosestHit TriangleBvh::closest(const Vec3& p) const {
    ClosestHit best;
    if (nodes_.empty()) return best;
    std::uint32_t stack[96];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        const double reach = std::sqrt(best.dist_sq) + tie_tol_;
        if (box_dist_sq(node.box, p) > reach * reach) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                consider(*mesh_, order_[i], p, tie_tol_, best);
            }
            continue;
        }
        const Node& l = nodes_[node.first];
        const Node& r = nodes_[node.right];
        const double dl = box_dist_sq(l.box, p);
        const double dr = box_dist_sq(r.box, p);
        // Push the farther child first so the nearer one is explored first.
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.first;
        } else {
            stack[top++] = node.first;
            stack[top++] = node.right;
        }
    }
    return best;
}

}  // namespace dtwin
