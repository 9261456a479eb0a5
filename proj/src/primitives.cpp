#include "dtwin/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

namespace dtwin::primitives {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::uint32_t u32(std::size_t i) { return static_cast<std::uint32_t>(i); }

}  // namespace

TriangleMesh unit_cube() {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    m.faces = {{0, 2, 1}, {0, 3, 2},   // z = 0
               {4, 5, 6}, {4, 6, 7},   // z = 1
               {0, 1, 5}, {0, 5, 4},   // y = 0
               {3, 7, 6}, {3, 6, 2},   // y = 1
               {0, 4, 7}, {0, 7, 3},   // x = 0
               {1, 2, 6}, {1, 6, 5}};  // x = 1
    return m;
}

TriangleMesh box(const Vec3& size, int subdivisions) {
    const int n = subdivisions < 1 ? 1 : subdivisions;
    TriangleMesh m;
    std::map<std::tuple<int, int, int>, std::uint32_t> lattice;
    auto vertex = [&](int i, int j, int k) {
        auto [it, inserted] = lattice.try_emplace({i, j, k}, u32(m.vertices.size()));
        if (inserted) {
            m.vertices.push_back({size.x * i / n, size.y * j / n, size.z * k / n});
        }
        return it->second;
    };
    // Each face: fixed axis, fixed value, two running axes ordered so (u x v) points outward.
    struct FaceSpec {
        int fixed;
        int value;
        int u;
        int v;
    };
    const FaceSpec specs[] = {{2, 0, 1, 0}, {2, n, 0, 1}, {1, 0, 0, 2},
                              {1, n, 2, 0}, {0, 0, 2, 1}, {0, n, 1, 2}};
    for (const auto& s : specs) {
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                auto corner = [&](int da, int db) {
                    int c[3];
                    c[s.fixed] = s.value;
                    c[s.u] = a + da;
                    c[s.v] = b + db;
                    return vertex(c[0], c[1], c[2]);
                };
                const auto p00 = corner(0, 0), p10 = corner(1, 0), p11 = corner(1, 1),
                           p01 = corner(0, 1);
                m.faces.push_back({p00, p10, p11});
                m.faces.push_back({p00, p11, p01});
            }
        }
    }
    return m;
}

TriangleMesh tetrahedron() {
    TriangleMesh m;
    const double s = 1.0 / std::sqrt(8.0);
    m.vertices = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return m;
}

TriangleMesh octahedron() {
    TriangleMesh m;
    m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

TriangleMesh icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : m.vertices) v = normalized(v);
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto [it, inserted] = midpoint.try_emplace(key, u32(m.vertices.size()));
            if (inserted) m.vertices.push_back(normalized(m.vertices[a] + m.vertices[b]));
            return it->second;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            const auto ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& v : m.vertices) v *= radius;
    return m;
}

TriangleMesh cylinder(double radius, double height, int segments, int stacks) {
    TriangleMesh m;
    const int st = stacks < 1 ? 1 : stacks;
    for (int k = 0; k <= st; ++k) {
        const double z = height * k / st;
        for (int i = 0; i < segments; ++i) {
            const double a = two_pi * i / segments;
            m.vertices.push_back({radius * std::cos(a), radius * std::sin(a), z});
        }
    }
    auto ring = [&](int k, int i) { return u32(k * segments + (i % segments)); };
    for (int k = 0; k < st; ++k) {
        for (int i = 0; i < segments; ++i) {
            m.faces.push_back({ring(k, i), ring(k, i + 1), ring(k + 1, i + 1)});
            m.faces.push_back({ring(k, i), ring(k + 1, i + 1), ring(k + 1, i)});
        }
    }
    const auto bottom = u32(m.vertices.size());
    m.vertices.push_back({0, 0, 0});
    const auto top = u32(m.vertices.size());
    m.vertices.push_back({0, 0, height});
    for (int i = 0; i < segments; ++i) {
        m.faces.push_back({bottom, ring(0, i + 1), ring(0, i)});
        m.faces.push_back({top, ring(st, i), ring(st, i + 1)});
    }
    return m;
}

TriangleMesh cone(double radius, double height, int segments) {
    TriangleMesh m;
    for (int i = 0; i < segments; ++i) {
        const double a = two_pi * i / segments;
        m.vertices.push_back({radius * std::cos(a), radius * std::sin(a), 0.0});
    }
    const auto apex = u32(m.vertices.size());
    m.vertices.push_back({0, 0, height});
    const auto base = u32(m.vertices.size());
    m.vertices.push_back({0, 0, 0});
    for (int i = 0; i < segments; ++i) {
        const auto a = u32(i), b = u32((i + 1) % segments);
        m.faces.push_back({a, b, apex});
        m.faces.push_back({base, b, a});
    }
    return m;
}

TriangleMesh torus(double major_radius, double minor_radius, int major_segments, int minor_segments) {
    TriangleMesh m;
    for (int i = 0; i < major_segments; ++i) {
        const double u = two_pi * i / major_segments;
        for (int j = 0; j < minor_segments; ++j) {
            const double v = two_pi * j / minor_segments;
            const double r = major_radius + minor_radius * std::cos(v);
            m.vertices.push_back({r * std::cos(u), r * std::sin(u), minor_radius * std::sin(v)});
        }
    }
    auto idx = [&](int i, int j) {
        return u32((i % major_segments) * minor_segments + (j % minor_segments));
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            m.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
            m.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return m;
}

TriangleMesh bumpy_sphere(int subdivisions, double amplitude, int lobes) {
    TriangleMesh m = icosphere(subdivisions, 1.0);
    for (auto& v : m.vertices) {
        const double r = 1.0 + amplitude * std::sin(lobes * v.x) * std::sin(lobes * v.y) *
                                   std::cos(lobes * v.z);
        v *= r;
    }
    return m;
}

TriangleMesh single_triangle() {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}};
    return m;
}

namespace {

// Small deterministic hash so members of the family differ without a global RNG.
double unit_hash(int index, int salt) {
    std::uint64_t x = static_cast<std::uint64_t>(index) * 0x9E3779B97F4A7C15ull +
                      static_cast<std::uint64_t>(salt) * 0xBF58476D1CE4E5B9ull + 0x94D049BB133111EBull;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

std::string synthetic_part_name(int index) {
    static const char* kinds[] = {"plate", "shaft", "nut", "ring", "knob", "ball", "housing", "pin"};
    return std::string(kinds[index % 8]) + "_" + std::to_string(index);
}

TriangleMesh synthetic_part(int index) {
    const double h1 = unit_hash(index, 1), h2 = unit_hash(index, 2), h3 = unit_hash(index, 3);
    switch (index % 8) {
        case 0:  // plate
            return box({1.0 + 2.0 * h1, 0.6 + h2, 0.1 + 0.3 * h3}, 3 + static_cast<int>(4 * h1));
        case 1:  // shaft
            return cylinder(0.1 + 0.2 * h1, 1.0 + 2.0 * h2, 16 + static_cast<int>(24 * h3),
                            3 + static_cast<int>(6 * h1));
        case 2:  // nut
            return cylinder(0.3 + 0.2 * h1, 0.2 + 0.2 * h2, 6, 2 + static_cast<int>(4 * h3));
        case 3:  // ring
            return torus(1.0, 0.15 + 0.25 * h1, 18 + static_cast<int>(18 * h2),
                         8 + static_cast<int>(8 * h3));
        case 4:  // knob
            return bumpy_sphere(h1 > 0.5 ? 3 : 2, 0.05 + 0.15 * h2,
                                2 + static_cast<int>(3 * h3));
        case 5:  // ball
            return icosphere(2 + (h1 > 0.5 ? 1 : 0), 0.5 + h2);
        case 6:  // housing
            return box({1.0 + h1, 1.0 + h2, 1.0 + h3}, 2 + static_cast<int>(5 * h2));
        default:  // pin
            return cone(0.2 + 0.3 * h1, 0.5 + 1.5 * h2, 12 + static_cast<int>(36 * h3));
    }
}

}  // namespace dtwin::primitives
