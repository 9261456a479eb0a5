#include "dtwin/model.hpp"

#include <functional>
#include <set>
#include <unordered_map>

#include "dtwin/error.hpp"
#include "dtwin/json_io.hpp"

namespace dtwin {

namespace fs = std::filesystem;

namespace {

using MeshCache = std::map<fs::path, MeshPtr>;

Part parse_part(const json& j, const fs::path& base_dir, MeshCache& cache, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": part must be an object");
    if (!j.contains("id") || !j.at("id").is_string()) {
        throw ValidationError(where + ": part is missing a string id");
    }
    Part p;
    p.id = j.at("id").get<std::string>();
    const std::string at = where + "/" + p.id;
    try {
        if (j.contains("transform")) p.transform = j.at("transform").get<Transform>();
    } catch (const ValidationError& e) {
        throw ValidationError(at + ": " + e.what());
    }
    const bool has_mesh = j.contains("mesh");
    const bool has_children = j.contains("children");
    if (has_mesh && has_children) {
        throw ValidationError(at + ": part content exclusive (mesh and children both present)");
    }
    if (!has_mesh && !has_children) {
        throw ValidationError(at + ": part content missing (needs mesh or children)");
    }
    if (has_mesh) {
        if (!j.at("mesh").is_string()) throw ValidationError(at + ": mesh must be a path string");
        p.mesh_path = j.at("mesh").get<std::string>();
        const fs::path full = fs::weakly_canonical(base_dir / p.mesh_path);
        auto it = cache.find(full);
        if (it == cache.end()) {
            if (!fs::exists(full)) throw IoError(at + ": mesh file not found: " + full.string());
            try {
                it = cache.emplace(full, std::make_shared<const TriangleMesh>(read_obj(full))).first;
            } catch (const ValidationError& e) {
                throw ValidationError(at + ": " + e.what());
            }
        }
        p.mesh = it->second;
        p.fallback = j.value("fallback", false);
    } else {
        const auto& kids = j.at("children");
        if (!kids.is_array()) throw ValidationError(at + ": children must be an array");
        for (const auto& c : kids) p.children.push_back(parse_part(c, base_dir, cache, at));
    }
    return p;
}

template <typename Fn>
void visit_parts(const std::vector<Part>& parts, Fn&& fn) {
    for (const auto& p : parts) {
        fn(p);
        visit_parts(p.children, fn);
    }
}

}  // namespace

void validate_model(const Model& model) {
    std::set<std::string> ids;
    std::function<void(const Part&)> check = [&](const Part& p) {
        if (!ids.insert(p.id).second) throw ValidationError("duplicate part id: " + p.id);
        if (p.has_mesh() && !p.children.empty()) {
            throw ValidationError(p.id + ": part content exclusive (mesh and children both present)");
        }
        if (!p.transform.valid()) throw ValidationError(p.id + ": transform scale must be > 0");
        if (p.has_mesh()) validate(*p.mesh, p.id);
        for (const auto& c : p.children) check(c);
    };
    if (!model.transform.valid()) throw ValidationError(model.name + ": transform scale must be > 0");
    for (const auto& r : model.roots) check(r);
}

Model load_model(const fs::path& manifest_path) {
    const json j = read_json_file(manifest_path);
    const std::string where = manifest_path.string();
    if (!j.is_object()) throw ValidationError(where + ": manifest must be an object");
    Model m;
    m.name = j.value("name", manifest_path.stem().string());
    try {
        if (j.contains("transform")) m.transform = j.at("transform").get<Transform>();
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    if (!j.contains("parts") || !j.at("parts").is_array()) {
        throw ValidationError(where + ": manifest needs a 'parts' array");
    }
    MeshCache cache;
    const fs::path base = manifest_path.parent_path();
    for (const auto& pj : j.at("parts")) m.roots.push_back(parse_part(pj, base, cache, where));
    try {
        validate_model(m);
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return m;
}

namespace {

std::string file_safe(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("part") : out;
}

}  // namespace

void save_model(const Model& model, const fs::path& dir, const std::string& file_name) {
    std::map<const TriangleMesh*, std::string> written;
    std::set<std::string> used_names;
    std::function<json(const Part&)> emit = [&](const Part& p) {
        json pj{{"id", p.id}, {"transform", p.transform}};
        if (p.has_mesh()) {
            auto it = written.find(p.mesh.get());
            if (it == written.end()) {
                std::string stem = file_safe(p.id);
                std::string name = stem;
                for (int k = 1; !used_names.insert(name).second; ++k) name = stem + "_" + std::to_string(k);
                const std::string rel = "meshes/" + name + ".obj";
                write_obj(dir / rel, *p.mesh);
                it = written.emplace(p.mesh.get(), rel).first;
            }
            pj["mesh"] = it->second;
            if (p.fallback) pj["fallback"] = true;
        } else {
            json kids = json::array();
            for (const auto& c : p.children) kids.push_back(emit(c));
            pj["children"] = std::move(kids);
        }
        return pj;
    };
    json parts = json::array();
    for (const auto& r : model.roots) parts.push_back(emit(r));
    write_json_file(dir / file_name,
                    json{{"name", model.name}, {"transform", model.transform}, {"parts", std::move(parts)}});
}

std::vector<const Part*> mesh_parts(const Model& model) {
    std::vector<const Part*> out;
    visit_parts(model.roots, [&](const Part& p) {
        if (p.has_mesh()) out.push_back(&p);
    });
    return out;
}

const Part* find_part(const Model& model, const std::string& id) {
    const Part* found = nullptr;
    visit_parts(model.roots, [&](const Part& p) {
        if (!found && p.id == id) found = &p;
    });
    return found;
}

std::size_t part_count(const Model& model) {
    std::size_t n = 0;
    visit_parts(model.roots, [&](const Part&) { ++n; });
    return n;
}

std::size_t mesh_part_count(const Model& model) { return mesh_parts(model).size(); }

std::size_t stored_mesh_count(const Model& model) {
    std::set<const TriangleMesh*> meshes;
    for (const Part* p : mesh_parts(model)) meshes.insert(p->mesh.get());
    return meshes.size();
}

Affine world_transform(const Model& model, const std::string& id) {
    std::function<bool(const std::vector<Part>&, const Affine&, Affine&)> walk =
        [&](const std::vector<Part>& parts, const Affine& parent, Affine& out) {
            for (const auto& p : parts) {
                const Affine here = parent * p.transform.to_affine();
                if (p.id == id) {
                    out = here;
                    return true;
                }
                if (walk(p.children, here, out)) return true;
            }
            return false;
        };
    Affine out;
    if (!walk(model.roots, model.transform.to_affine(), out)) {
        throw ValidationError("unknown part: " + id);
    }
    return out;
}

std::vector<DuplicateGroup> find_duplicates(const Model& model) {
    std::vector<DuplicateGroup> groups;
    std::vector<const TriangleMesh*> representative;
    std::unordered_multimap<std::uint64_t, std::size_t> by_hash;
    for (const Part* p : mesh_parts(model)) {
        const auto h = canonical_hash(*p->mesh);
        std::size_t match = groups.size();
        auto [lo, hi] = by_hash.equal_range(h);
        for (auto it = lo; it != hi; ++it) {
            const auto* rep = representative[it->second];
            if (rep == p->mesh.get() || canonically_equal(*rep, *p->mesh)) {
                match = std::min(match, it->second);
            }
        }
        if (match == groups.size()) {
            by_hash.emplace(h, groups.size());
            groups.push_back({p->id, {}});
            representative.push_back(p->mesh.get());
        } else {
            groups[match].duplicates.emplace_back(p->id, p->transform);
        }
    }
    return groups;
}

Model rebuild_model(const Model& model, const std::map<std::string, ReducedMesh>& reduced,
                    const std::vector<DuplicateGroup>& groups) {
    std::map<std::string, std::pair<MeshPtr, bool>> replacement;
    for (const auto& g : groups) {
        auto it = reduced.find(g.original);
        if (it == reduced.end() || (!it->second.mesh && !it->second.fallback)) {
            throw ValidationError("rebuild_model: missing reduced mesh for group original " + g.original);
        }
        MeshPtr mesh = it->second.mesh;
        if (!mesh) {
            const Part* orig = find_part(model, g.original);
            if (orig == nullptr || !orig->has_mesh()) {
                throw ValidationError("rebuild_model: unknown group original " + g.original);
            }
            mesh = orig->mesh;
        }
        replacement[g.original] = {mesh, it->second.fallback};
        for (const auto& [dup_id, xf] : g.duplicates) replacement[dup_id] = {mesh, it->second.fallback};
    }
    Model out = model;
    std::function<void(Part&)> apply = [&](Part& p) {
        if (p.has_mesh()) {
            auto it = replacement.find(p.id);
            if (it != replacement.end()) {
                p.mesh = it->second.first;
                p.fallback = it->second.second;
            }
        }
        for (auto& c : p.children) apply(c);
    };
    for (auto& r : out.roots) apply(r);
    return out;
}

}  // namespace dtwin
