#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dtwin/geometry.hpp"

namespace dtwin {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Coordinates are in meters.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec3> normals;  // optional, per vertex

    bool empty() const { return faces.empty(); }
    friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

/// Throws ValidationError naming `context` when an invariant does not hold.
void validate(const TriangleMesh& mesh, std::string_view context = "mesh");

struct Aabb {
    Vec3 min;
    Vec3 max;

    Vec3 extents() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return norm(max - min); }
};

Aabb bounding_box(const TriangleMesh& mesh);

struct MeshSummary {
    std::size_t vertex_count = 0;
    std::size_t face_count = 0;
    double area = 0.0;
    double volume = 0.0;  // |signed volume|
    Aabb bbox;
    bool watertight = false;

    bool open() const { return !watertight; }
};

/// Throws ValidationError on an empty mesh.
MeshSummary mesh_summary(const TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, std::size_t face);
Vec3 face_normal(const TriangleMesh& mesh, std::size_t face);  // unit, zero if degenerate
std::vector<double> face_areas(const TriangleMesh& mesh);

/// Signed volume measured from the vertex centroid; zero for flat meshes.
double signed_volume(const TriangleMesh& mesh);
bool is_watertight(const TriangleMesh& mesh);

/// Hash over counts, coordinates quantized to 1e-9 of the bbox diagonal, and the index buffer.
std::uint64_t canonical_hash(const TriangleMesh& mesh);
/// Exact equality of the quantized representation used by canonical_hash, plus equal
/// bounding-box diagonals (to 1e-9) so scaled copies are distinct.
bool canonically_equal(const TriangleMesh& a, const TriangleMesh& b);

TriangleMesh transformed(const TriangleMesh& mesh, const Affine& xf);
TriangleMesh scaled(const TriangleMesh& mesh, double s);

// OBJ subset: `v` and `f` records. Polygons are fan-triangulated.
TriangleMesh parse_obj(std::istream& in, std::string_view source_name);
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace dtwin
