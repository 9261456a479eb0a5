#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dtwin/mesh.hpp"

namespace dtwin {

struct ClosestHit {
    double dist_sq = std::numeric_limits<double>::infinity();
    std::uint32_t face = std::numeric_limits<std::uint32_t>::max();
    Vec3 point;
};

/// Closest point on triangle (a, b, c) to p, by Voronoi-region classification.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy over the faces of a mesh for closest-point queries.
/// Distances within 1e-10 of the bounding-box diagonal are ties and resolve to the
/// lowest face index, so results match the brute-force scan bit for bit.
class TriangleBvh {
public:
    explicit TriangleBvh(const TriangleMesh& mesh);

    ClosestHit closest(const Vec3& p) const;

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // leaf: first index into order_; inner: left child
        std::uint32_t count = 0;  // leaf: face count; inner: 0
        std::uint32_t right = 0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end);

    const TriangleMesh* mesh_;
    double tie_tol_ = 0.0;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::vector<Vec3> centroids_;
};

/// Brute-force scan over every face (serial reference for TriangleBvh).
ClosestHit closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p);

}  // namespace dtwin
