#include "dtwin/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "dtwin/error.hpp"

namespace dtwin {

void validate(const TriangleMesh& mesh, std::string_view context) {
    const auto n = mesh.vertices.size();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (auto idx : face) {
            if (idx >= n) {
                throw ValidationError(std::string(context) + ": face " + std::to_string(f) +
                                      " index " + std::to_string(idx) + " out of range (" +
                                      std::to_string(n) + " vertices)");
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw ValidationError(std::string(context) + ": face " + std::to_string(f) +
                                  " repeats a vertex");
        }
    }
    for (const auto& v : mesh.vertices) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
            throw ValidationError(std::string(context) + ": non-finite vertex coordinate");
        }
    }
    if (!mesh.normals.empty()) {
        if (mesh.normals.size() != n) {
            throw ValidationError(std::string(context) + ": normal count differs from vertex count");
        }
        for (const auto& nrm : mesh.normals) {
            if (std::abs(norm(nrm) - 1.0) > 1e-6) {
                throw ValidationError(std::string(context) + ": normal is not unit length");
            }
        }
    }
}

Aabb bounding_box(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) return {};
    Aabb box{mesh.vertices.front(), mesh.vertices.front()};
    for (const auto& v : mesh.vertices) {
        box.min = component_min(box.min, v);
        box.max = component_max(box.max, v);
    }
    return box;
}

double triangle_area(const TriangleMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    return 0.5 * norm(cross(mesh.vertices[f[1]] - a, mesh.vertices[f[2]] - a));
}

Vec3 face_normal(const TriangleMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    return normalized(cross(mesh.vertices[f[1]] - a, mesh.vertices[f[2]] - a));
}

std::vector<double> face_areas(const TriangleMesh& mesh) {
    std::vector<double> areas(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) areas[f] = triangle_area(mesh, f);
    return areas;
}

double signed_volume(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) return 0.0;
    Vec3 c;
    for (const auto& v : mesh.vertices) c += v;
    c = c / static_cast<double>(mesh.vertices.size());
    double six_v = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3 a = mesh.vertices[f[0]] - c;
        const Vec3 b = mesh.vertices[f[1]] - c;
        const Vec3 d = mesh.vertices[f[2]] - c;
        six_v += dot(a, cross(b, d));
    }
    return six_v / 6.0;
}

bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.faces.empty()) return false;
    std::unordered_map<std::uint64_t, int> edge_use;
    edge_use.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int i = 0; i < 3; ++i) {
            std::uint64_t a = f[i], b = f[(i + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_use[(a << 32) | b];
        }
    }
    return std::all_of(edge_use.begin(), edge_use.end(),
                       [](const auto& kv) { return kv.second == 2; });
}

MeshSummary mesh_summary(const TriangleMesh& mesh) {
    if (mesh.faces.empty() || mesh.vertices.empty()) {
        throw ValidationError("mesh_summary: empty mesh");
    }
    MeshSummary s;
    s.vertex_count = mesh.vertices.size();
    s.face_count = mesh.faces.size();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) s.area += triangle_area(mesh, f);
    s.volume = std::abs(signed_volume(mesh));
    s.bbox = bounding_box(mesh);
    s.watertight = is_watertight(mesh);
    return s;
}

namespace {

std::vector<std::int64_t> quantized_coordinates(const TriangleMesh& mesh) {
    const double quantum = 1e-9 * bounding_box(mesh).diagonal();
    std::vector<std::int64_t> q;
    q.reserve(mesh.vertices.size() * 3);
    for (const auto& v : mesh.vertices) {
        for (int i = 0; i < 3; ++i) {
            q.push_back(quantum > 0.0 ? std::llround(v[i] / quantum) : 0);
        }
    }
    return q;
}

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ull;
    void add(std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
};

}  // namespace

std::uint64_t canonical_hash(const TriangleMesh& mesh) {
    Fnv1a fnv;
    fnv.add(mesh.vertices.size());
    fnv.add(mesh.faces.size());
    for (auto q : quantized_coordinates(mesh)) fnv.add(static_cast<std::uint64_t>(q));
    for (const auto& f : mesh.faces) {
        for (auto idx : f) fnv.add(idx);
    }
    return fnv.h;
}

bool canonically_equal(const TriangleMesh& a, const TriangleMesh& b) {
    if (a.vertices.size() != b.vertices.size() || a.faces != b.faces) return false;
    // The quantum is relative, so a scaled copy would otherwise compare equal.
    const double da = bounding_box(a).diagonal(), db = bounding_box(b).diagonal();
    if (std::fabs(da - db) > 1e-9 * std::max(da, db)) return false;
    return quantized_coordinates(a) == quantized_coordinates(b);
}

TriangleMesh transformed(const TriangleMesh& mesh, const Affine& xf) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = xf.apply(v);
    out.normals.clear();
    return out;
}

TriangleMesh scaled(const TriangleMesh& mesh, double s) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v *= s;
    return out;
}

namespace {

bool parse_double(std::string_view tok, double& out) {
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_index(std::string_view tok, long& out) {
    const auto slash = tok.find('/');
    if (slash != std::string_view::npos) tok = tok.substr(0, slash);
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end && !tok.empty();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace

TriangleMesh parse_obj(std::istream& in, std::string_view source_name) {
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    const std::string src(source_name);
    std::vector<std::pair<std::vector<long>, int>> raw_faces;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (toks[0] == "v") {
            if (toks.size() < 4) throw ParseError(src + ": vertex needs 3 coordinates", line_no, 1);
            Vec3 v;
            for (int i = 0; i < 3; ++i) {
                if (!parse_double(toks[1 + i], v[i])) {
                    throw ParseError(src + ": bad vertex coordinate '" + std::string(toks[1 + i]) + "'",
                                     line_no, 1);
                }
            }
            mesh.vertices.push_back(v);
        } else if (toks[0] == "f") {
            if (toks.size() < 4) throw ParseError(src + ": face needs at least 3 indices", line_no, 1);
            std::vector<long> idx;
            for (std::size_t i = 1; i < toks.size(); ++i) {
                long k = 0;
                if (!parse_index(toks[i], k) || k == 0) {
                    throw ParseError(src + ": bad face index '" + std::string(toks[i]) + "'", line_no, 1);
                }
                // Negative indices are relative to the vertices read so far.
                idx.push_back(k > 0 ? k - 1 : static_cast<long>(mesh.vertices.size()) + k);
            }
            raw_faces.emplace_back(std::move(idx), line_no);
        }
    }
    const long n = static_cast<long>(mesh.vertices.size());
    for (const auto& [idx, ln] : raw_faces) {
        for (long k : idx) {
            if (k < 0 || k >= n) {
                throw ValidationError(src + ": face index out of range at line " + std::to_string(ln));
            }
        }
        for (std::size_t i = 1; i + 1 < idx.size(); ++i) {
            mesh.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[i]),
                                  static_cast<std::uint32_t>(idx[i + 1])});
        }
    }
    validate(mesh, src);
    return mesh;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file: " + path.string());
    return parse_obj(in, path.string());
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file: " + path.string());
    write_obj(out, mesh);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dtwin
