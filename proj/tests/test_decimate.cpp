#include <doctest.h>

#include <set>

#include "dtwin/decimate.hpp"
#include "dtwin/error.hpp"
#include "dtwin/metrics.hpp"
#include "dtwin/primitives.hpp"
#include "oracles.hpp"

using namespace dtwin;
namespace prim = dtwin::primitives;

TEST_CASE("icosphere half reduction") {
    const auto sphere = prim::icosphere(3);
    const auto r = decimate(sphere, {0.5, 0.0, 90.0, false});
    CHECK(r.faces_before == 1280);
    CHECK(r.faces_after >= 576);
    CHECK(r.faces_after <= 704);
    CHECK_FALSE(r.infeasible);
    const double v0 = oracle::volume(sphere), v1 = oracle::volume(r.mesh);
    CHECK(std::abs(v1 - v0) / v0 < 0.02);
    CHECK(compute_similarity(sphere, r.mesh).D < 0.01);
    CHECK_NOTHROW(validate(r.mesh));
    CHECK(is_watertight(r.mesh));
}

TEST_CASE("ratio one is identity") {
    const auto m = prim::bumpy_sphere(2, 0.1, 3);
    const auto r = decimate(m, {1.0, 1.0, 15.0, true});
    CHECK(r.mesh == m);
    CHECK_FALSE(r.infeasible);
}

TEST_CASE("tetrahedron is infeasible") {
    const auto r = decimate(prim::tetrahedron(), {0.5, 0.0, 90.0, false});
    CHECK(r.mesh == prim::tetrahedron());
    CHECK(r.infeasible);
}

TEST_CASE("monotone face counts and distance") {
    const auto sphere = prim::icosphere(3);
    std::size_t prev_faces = SIZE_MAX;
    double prev_d = -1.0;
    for (double ratio : {0.8, 0.4, 0.2, 0.1}) {
        DecimationParams p;
        p.target_ratio = ratio;
        const auto r = decimate(sphere, p);
        CHECK(r.faces_after <= prev_faces);
        const double d = compute_similarity(sphere, r.mesh).D;
        CHECK(d >= prev_d);
        prev_faces = r.faces_after;
        prev_d = d;
    }
}

TEST_CASE("every grid combo produces a valid mesh in range") {
    const auto part = prim::synthetic_part(3);
    for (const auto& p : default_grid().combos) {
        const auto r = decimate(part, p);
        CAPTURE(p.label());
        CHECK_NOTHROW(validate(r.mesh));
        CHECK(r.faces_after <= r.faces_before);
        CHECK(r.faces_after >= 4);
        for (std::size_t f = 0; f < r.mesh.faces.size(); ++f) CHECK(triangle_area(r.mesh, f) > 0.0);
        if (!r.infeasible) {
            CHECK(double(r.faces_after) <= 1.1 * p.target_ratio * r.faces_before);
        }
    }
}

TEST_CASE("decimation is deterministic") {
    const auto m = prim::synthetic_part(11);
    const DecimationParams p{0.2, 0.5, 45.0, true};
    CHECK(decimate(m, p).mesh == decimate(m, p).mesh);
}

TEST_CASE("preserve boundary keeps boundary vertices") {
    // Open grid: a subdivided box with its top removed.
    auto m = prim::box({1, 1, 1}, 6);
    std::vector<Face> kept;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const auto& face = m.faces[f];
        if (m.vertices[face[0]].z > 0.99 && m.vertices[face[1]].z > 0.99 && m.vertices[face[2]].z > 0.99) continue;
        kept.push_back(face);
    }
    m.faces = kept;
    std::set<std::pair<double, double>> rim;
    for (const auto& f : m.faces) {
        for (auto i : f) {
            if (m.vertices[i].z > 0.99) rim.insert({m.vertices[i].x, m.vertices[i].y});
        }
    }
    CHECK(rim.size() == 24);
    const auto r = decimate(m, {0.2, 0.0, 90.0, true});
    std::set<std::pair<double, double>> rim_after;
    for (const auto& f : r.mesh.faces) {
        for (auto i : f) {
            const auto& v = r.mesh.vertices[i];
            if (v.z > 0.99) rim_after.insert({v.x, v.y});
        }
    }
    CHECK(rim_after == rim);
}

TEST_CASE("normal limit restrains collapses") {
    const auto m = prim::synthetic_part(5);
    const auto loose = decimate(m, {0.05, 0.0, 90.0, false});
    const auto tight = decimate(m, {0.05, 0.0, 15.0, false});
    CHECK(tight.faces_after >= loose.faces_after);
}

TEST_CASE("grid shape") {
    const auto g = default_grid();
    CHECK(g.size() == 108);
    std::set<std::string> labels;
    for (const auto& p : g.combos) labels.insert(p.label());
    CHECK(labels.size() == 108);
    CHECK(g.combos[0] == DecimationParams{0.05, 0.0, 15.0, false});
    CHECK(g.combos[1] == DecimationParams{0.05, 0.0, 15.0, true});
    CHECK(g.combos.back() == DecimationParams{0.75, 1.0, 90.0, true});
    const auto small = make_grid({{0.2, 0.5}, {0.0}, {90.0}, {false, true}});
    CHECK(small.size() == 4);
}

TEST_CASE("param validation and encoding") {
    CHECK_THROWS_AS((DecimationParams{0.0, 0.0, 90.0, false}.validate()), ValidationError);
    CHECK_THROWS_AS((DecimationParams{1.5, 0.0, 90.0, false}.validate()), ValidationError);
    CHECK_THROWS_AS((DecimationParams{0.5, 0.3, 90.0, false}.validate()), ValidationError);
    CHECK_THROWS_AS((DecimationParams{0.5, 0.0, 30.0, false}.validate()), ValidationError);
    const auto e = encode_params({0.35, 0.5, 90.0, true});
    CHECK(e == std::array<double, 4>{0.35, 1.0, 2.0, 1.0});
}
