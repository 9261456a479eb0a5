#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dtwin/closest_point.hpp"
#include "dtwin/decimate.hpp"
#include "dtwin/error.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/primitives.hpp"
#include "dtwin/random.hpp"
#include "oracles.hpp"

using namespace dtwin;
namespace prim = dtwin::primitives;

namespace {

bool rel_close(double a, double b, double tol) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < 1e-300 || std::abs(a - b) <= tol * scale;
}

}  // namespace

TEST_CASE("cube shape metrics") {
    const auto m = compute_shape_metrics(prim::unit_cube());
    const double phi = std::cbrt(std::numbers::pi) * std::pow(6.0, 2.0 / 3.0) / 6.0;
    CHECK(m.phi == doctest::Approx(phi).epsilon(1e-12));
    CHECK(std::abs(m.phi - 0.80600) < 1e-4);
    CHECK(m.rho_box == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.L1 == 1.0);
    CHECK(m.L2 == 1.0);
    CHECK(m.alpha == 1.5);
    CHECK(m.A_cov == 0.0);
    // Ritter on the cube finds the circumsphere: radius sqrt(3)/2.
    CHECK(m.E == doctest::Approx(std::cbrt(3.0 / (4.0 * std::numbers::pi)) / (std::sqrt(3.0) / 2.0)));
}

TEST_CASE("icosphere metrics") {
    const auto m = compute_shape_metrics(prim::icosphere(3));
    CHECK(m.phi >= 0.98);
    CHECK(m.phi <= 1.0);
    CHECK(m.E >= 0.97);
    CHECK(m.E <= 1.0);
    CHECK(m.L2 >= m.L1);
    CHECK(m.L1 >= 1.0);
}

TEST_CASE("alpha tends to 2 on refined spheres") {
    double prev = 0.0;
    for (int s = 0; s <= 4; ++s) {
        const double a = compute_shape_metrics(prim::icosphere(s)).alpha;
        CHECK(a > prev);
        CHECK(a < 2.0);
        prev = a;
    }
    CHECK(prev > 1.99);
}

TEST_CASE("area moments match hand values") {
    // values 1,2,3,4: mean 2.5, var 1.25, m3 0, m4 2.5625
    const auto am = area_moments({1, 2, 3, 4});
    CHECK(am.skew == doctest::Approx(0.0));
    CHECK(am.kurt == doctest::Approx(2.5625 / (1.25 * 1.25)));
    CHECK(am.cov == doctest::Approx(std::sqrt(1.25) / 2.5));
    const auto skewed = area_moments({1, 1, 1, 5});
    CHECK(skewed.skew > 0.0);
}

TEST_CASE("shape metrics are scale invariant") {
    const auto base = prim::bumpy_sphere(3, 0.12, 3);
    const auto ref = compute_shape_metrics(base).values();
    for (double s : {0.01, 100.0}) {
        const auto v = compute_shape_metrics(scaled(base, s)).values();
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(rel_close(v[i], ref[i], 1e-9));
    }
}

TEST_CASE("metrics rotation invariance") {
    const auto base = prim::bumpy_sphere(3, 0.1, 4);
    const auto rot = transformed(base, Affine::rotation(quat_from_euler_xyz_deg({17, 41, -63})));
    const auto a = compute_shape_metrics(base);
    const auto b = compute_shape_metrics(rot);
    CHECK(rel_close(a.phi, b.phi, 1e-6));
    CHECK(rel_close(a.alpha, b.alpha, 1e-12));
    CHECK(rel_close(a.A_skew, b.A_skew, 1e-6));
    CHECK(rel_close(a.A_kurt, b.A_kurt, 1e-6));
    CHECK(rel_close(a.A_cov, b.A_cov, 1e-6));

    const auto low = decimate(base, {0.3, 0.0, 90.0, false}).mesh;
    const auto low_rot = transformed(low, Affine::rotation(quat_from_euler_xyz_deg({17, 41, -63})));
    SimilarityConfig cfg{4000, 7, true};
    const auto s0 = compute_similarity(base, low, cfg);
    const auto s1 = compute_similarity(rot, low_rot, cfg);
    // Bounding box diagonals differ under rotation; compare raw distance scale separately.
    CHECK(rel_close(s0.D * bounding_box(base).diagonal(), s1.D * bounding_box(rot).diagonal(), 1e-6));
    CHECK(rel_close(s0.dN, s1.dN, 1e-6));
    CHECK(rel_close(s0.dTheta, s1.dTheta, 1e-6));
}

TEST_CASE("degenerate metrics input") {
    CHECK_THROWS_AS(compute_shape_metrics(prim::single_triangle()), MathError);
    CHECK_THROWS_AS(compute_shape_metrics(TriangleMesh{}), ValidationError);
}

TEST_CASE("shape ratios") {
    const auto cube = shape_profile(prim::unit_cube());
    const auto same = compute_shape_ratios(cube, cube);
    for (double v : same.values()) CHECK(v == 1.0);
    CHECK(same.flagged.empty());

    auto half = cube;
    half.summary.volume *= 0.5;
    CHECK(compute_shape_ratios(cube, half).R_V == 0.5);

    // Cube has zero area spread; a decimated sphere does not.
    const auto sphere = shape_profile(prim::icosphere(2));
    const auto r = compute_shape_ratios(cube, sphere);
    CHECK(r.flagged.size() == 3);
    CHECK(r.R_cov == 0.0);
}

TEST_CASE("ratios against an independent recomputation") {
    const auto high = prim::box({1, 1, 1}, 4);
    const auto low = decimate(high, {0.5, 0.0, 90.0, false}).mesh;
    const auto r = compute_shape_ratios(shape_profile(high), shape_profile(low));
    CHECK(rel_close(r.R_V, oracle::volume(low) / oracle::volume(high), 1e-9));
    CHECK(rel_close(r.R_A, oracle::area(low) / oracle::area(high), 1e-9));
    const auto phi = [](const TriangleMesh& m) {
        return std::cbrt(std::numbers::pi) * std::pow(6.0 * oracle::volume(m), 2.0 / 3.0) / oracle::area(m);
    };
    CHECK(rel_close(r.R_phi, phi(low) / phi(high), 1e-9));
    const double alpha_ratio = (double(low.faces.size()) / low.vertices.size()) /
                               (double(high.faces.size()) / high.vertices.size());
    CHECK(rel_close(r.R_alpha, alpha_ratio, 1e-12));
}

TEST_CASE("closest point BVH equals brute force") {
    const auto m = prim::torus(2, 0.6, 24, 12);
    const TriangleBvh bvh(m);
    Rng rng = make_rng(3);
    for (int i = 0; i < 500; ++i) {
        const Vec3 p{6 * unit_double(rng) - 3, 6 * unit_double(rng) - 3, 3 * unit_double(rng) - 1.5};
        const auto a = bvh.closest(p);
        const auto b = closest_point_brute_force(m, p);
        CHECK(a.dist_sq == b.dist_sq);
        CHECK(a.face == b.face);
    }
}

TEST_CASE("similarity of a mesh with itself") {
    const auto m = prim::icosphere(2);
    const auto s = compute_similarity(m, m, {2000, 1, true});
    CHECK(s.D < 1e-12);
    CHECK(s.dN < 1e-6);
    CHECK(s.dTheta == 0.0);
    CHECK_FALSE(s.open_mesh);
}

TEST_CASE("cube vs octahedron dihedral deviation") {
    const auto s = compute_similarity(prim::unit_cube(), prim::octahedron(), {500, 1, true});
    CHECK(s.dTheta == doctest::Approx(std::abs(90.0 - std::acos(-1.0 / 3.0) * 180.0 / std::numbers::pi)));
    CHECK(s.dTheta == doctest::Approx(19.47).epsilon(1e-3));
}

TEST_CASE("open mesh flags dTheta") {
    const auto s = compute_similarity(prim::single_triangle(), prim::single_triangle(), {100, 1, true});
    CHECK(s.open_mesh);
    CHECK(s.dTheta == 0.0);
}

TEST_CASE("distance matches the dense oracle") {
    const auto cube = prim::unit_cube();
    auto bent = cube;
    // Move vertex (1,1,1) outward by 1% of the diagonal.
    for (auto& v : bent.vertices) {
        if (v.x == 1 && v.y == 1 && v.z == 1) v += Vec3{1, 1, 1} * (0.01 * std::sqrt(3.0) / std::sqrt(3.0));
    }
    const auto s = compute_similarity(cube, bent, {10000, 5, true});
    const double expected = oracle::dense_distance(cube, bent, 40);
    CHECK(s.D > 0.0);
    CHECK(std::abs(s.D - expected) / expected < 0.05);
}

TEST_CASE("similarity parallel equals serial reference bitwise") {
    const auto high = prim::bumpy_sphere(3, 0.1, 5);
    const auto low = decimate(high, {0.2, 0.5, 45.0, false}).mesh;
    SimilarityConfig cfg{3000, 11, true};
    const auto a = compute_similarity(high, low, cfg);
    cfg.parallel = false;
    const auto b = compute_similarity(high, low, cfg);
    const auto c = compute_similarity_reference(high, low, cfg);
    CHECK(a.values() == b.values());
    CHECK(a.values() == c.values());
    CHECK(compute_similarity(high, low, cfg).values() == b.values());
}

TEST_CASE("similarity is scale invariant") {
    const auto high = prim::bumpy_sphere(3, 0.1, 3);
    const auto low = decimate(high, {0.2, 0.0, 90.0, false}).mesh;
    const auto ref = compute_similarity(high, low, {3000, 2, true}).values();
    for (double s : {0.01, 100.0}) {
        const auto v = compute_similarity(scaled(high, s), scaled(low, s), {3000, 2, true}).values();
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(rel_close(v[i], ref[i], 1e-6));
    }
}

TEST_CASE("edge ties do not depend on scale") {
    // Parts of the low cap lie past the high rim, where a cap face and a side face
    // are equally close.
    const auto high = prim::cylinder(0.5, 2.0, 24, 4);
    const auto low = decimate(high, {0.35, 0.5, 45.0, false}).mesh;
    const auto ref = compute_similarity(high, low).values();
    for (double s : {0.01, 100.0}) {
        const auto v = compute_similarity(scaled(high, s), scaled(low, s)).values();
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(rel_close(v[i], ref[i], 1e-6));
    }
    const Vec3 rim{0.51, 0.0, 0.0};
    const TriangleBvh bvh(high);
    CHECK(bvh.closest(rim).face == closest_point_brute_force(high, rim).face);
}

TEST_CASE("similarity argument checks") {
    const auto m = prim::unit_cube();
    CHECK_THROWS_AS(compute_similarity(m, m, {99, 1, true}), ValidationError);
    CHECK_THROWS_AS(compute_similarity(m, TriangleMesh{}, {100, 1, true}), ValidationError);
}

TEST_CASE("sampling is stratified and seeded") {
    const auto m = prim::box({1, 2, 3}, 2);
    const auto a = sample_surface(m, 1000, 9);
    const auto b = sample_surface(m, 1000, 9);
    REQUIRE(a.size() == 1000);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].point == b[i].point);
    const auto c = sample_surface(m, 1000, 10);
    CHECK_FALSE(c[0].point == a[0].point);
}
