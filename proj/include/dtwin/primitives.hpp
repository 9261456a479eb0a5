#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtwin/mesh.hpp"

// Closed, outward-oriented procedural meshes. Used to build fixtures and the
// synthetic training corpus.
namespace dtwin::primitives {

TriangleMesh unit_cube();                       // [0,1]^3, 8 vertices, 12 faces
TriangleMesh box(const Vec3& size, int subdivisions = 1);
TriangleMesh tetrahedron();                     // regular, edge length 1
TriangleMesh octahedron();                      // regular, circumradius 1
TriangleMesh icosphere(int subdivisions, double radius = 1.0);
TriangleMesh cylinder(double radius, double height, int segments, int stacks = 1);
TriangleMesh cone(double radius, double height, int segments);
TriangleMesh torus(double major_radius, double minor_radius, int major_segments, int minor_segments);
/// Icosphere with smooth radial bumps of relative amplitude `amplitude` and angular frequency `lobes`.
TriangleMesh bumpy_sphere(int subdivisions, double amplitude, int lobes);
TriangleMesh single_triangle();

/// Deterministic family of "mechanical" parts (bolts, nuts, shafts, housings, ...).
/// Index selects the family member; the same index always yields the same mesh.
TriangleMesh synthetic_part(int index);
std::string synthetic_part_name(int index);

}  // namespace dtwin::primitives
