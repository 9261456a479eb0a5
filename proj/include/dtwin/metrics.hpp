#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dtwin/mesh.hpp"

namespace dtwin {

/// Nine scale-free descriptors of a single mesh.
struct ShapeMetrics {
    double L1 = 0.0;       // bbox length / width
    double L2 = 0.0;       // bbox length / depth
    double phi = 0.0;      // sphericity
    double rho_box = 0.0;  // volume / bbox volume
    double E = 0.0;        // shape efficiency
    double A_skew = 0.0;   // polygon-area skewness
    double A_kurt = 0.0;   // polygon-area kurtosis (raw)
    double A_cov = 0.0;    // polygon-area coefficient of variation
    double alpha = 0.0;    // faces / vertices

    static constexpr std::size_t size = 9;
    std::array<double, size> values() const { return {L1, L2, phi, rho_box, E, A_skew, A_kurt, A_cov, alpha}; }
    static const std::array<const char*, size>& names();
};

/// Low-poly / high-poly ratios.
struct ShapeRatios {
    double R_V = 0.0;
    double R_A = 0.0;
    double R_phi = 0.0;
    double R_rho = 0.0;
    double R_E = 0.0;
    double R_alpha = 0.0;
    double R_skew = 0.0;
    double R_kurt = 0.0;
    double R_cov = 0.0;
    /// Names of ratios whose high-poly denominator vanished while the numerator did not.
    /// Flagged fields hold 0.
    std::vector<std::string> flagged;

    static constexpr std::size_t size = 9;
    std::array<double, size> values() const {
        return {R_V, R_A, R_phi, R_rho, R_E, R_alpha, R_skew, R_kurt, R_cov};
    }
    static const std::array<const char*, size>& names();
};

struct SimilarityMetrics {
    double D = 0.0;       // mean sample distance / high-poly bbox diagonal
    double dN = 0.0;      // mean normal deviation, degrees
    double dTheta = 0.0;  // |mean dihedral(high) - mean dihedral(low)|, degrees
    bool open_mesh = false;  // dihedral mean undefined on one side; dTheta reported as 0

    static constexpr std::size_t size = 3;
    std::array<double, size> values() const { return {D, dN, dTheta}; }
    static const std::array<const char*, size>& names();
};

/// Metrics together with the summary they were derived from.
struct ShapeProfile {
    ShapeMetrics metrics;
    MeshSummary summary;
};

/// Throws MathError for zero-area meshes or a bounding box with a zero extent.
ShapeMetrics compute_shape_metrics(const TriangleMesh& mesh);
ShapeProfile shape_profile(const TriangleMesh& mesh);

ShapeRatios compute_shape_ratios(const ShapeProfile& high, const ShapeProfile& low);

/// Population skewness, raw kurtosis and coefficient of variation of `values`.
/// A sample with (relative) zero spread reports 0 for all three.
struct AreaMoments {
    double skew = 0.0;
    double kurt = 0.0;
    double cov = 0.0;
};
AreaMoments area_moments(const std::vector<double>& values);

/// Approximate minimal bounding sphere (Ritter, two passes over the vertices).
struct Sphere {
    Vec3 center;
    double radius = 0.0;
};
Sphere ritter_bounding_sphere(const std::vector<Vec3>& points);

struct SimilarityConfig {
    std::size_t samples = 10000;
    std::uint64_t seed = 1;
    bool parallel = true;  // OpenMP over samples; results are identical either way
};

struct SurfaceSample {
    Vec3 point;
    std::uint32_t face = 0;
};

/// Area-stratified surface samples: each face gets its proportional share of
/// `count` (largest remainder), then uniform barycentric points from a seeded stream.
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

/// Mean interior dihedral angle in degrees over non-coplanar manifold edges.
/// Returns false when no such edge exists.
bool mean_dihedral_deg(const TriangleMesh& mesh, double& mean);

/// Throws ValidationError for empty meshes or samples < 100.
SimilarityMetrics compute_similarity(const TriangleMesh& high, const TriangleMesh& low,
                                     const SimilarityConfig& config = {});

/// Serial brute-force reference of compute_similarity; bitwise-equal results.
SimilarityMetrics compute_similarity_reference(const TriangleMesh& high, const TriangleMesh& low,
                                               const SimilarityConfig& config = {});

}  // namespace dtwin
