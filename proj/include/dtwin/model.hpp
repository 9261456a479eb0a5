#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dtwin/geometry.hpp"
#include "dtwin/mesh.hpp"

namespace dtwin {

using MeshPtr = std::shared_ptr<const TriangleMesh>;

/// A node of the model hierarchy. Either mesh-bearing (a leaf) or child-bearing, never both.
struct Part {
    std::string id;
    Transform transform;
    MeshPtr mesh;           // set on leaves
    std::string mesh_path;  // manifest-relative path the mesh was loaded from
    std::vector<Part> children;
    bool fallback = false;  // leaf kept its high-poly mesh after failed reduction

    bool has_mesh() const { return mesh != nullptr; }
};

struct Model {
    std::string name;
    Transform transform;
    std::vector<Part> roots;
};

/// Loads a JSON manifest and the OBJ files it references. Files referenced by
/// several parts are read once and shared.
Model load_model(const std::filesystem::path& manifest_path);

/// Writes `<dir>/<file_name>` plus one OBJ per distinct mesh under `<dir>/meshes/`.
void save_model(const Model& model, const std::filesystem::path& dir,
                const std::string& file_name = "model.json");

/// Checks the Part invariants; throws ValidationError naming the offending part.
void validate_model(const Model& model);

/// Mesh-bearing parts in document (pre-order) order.
std::vector<const Part*> mesh_parts(const Model& model);
const Part* find_part(const Model& model, const std::string& id);
std::size_t part_count(const Model& model);
std::size_t mesh_part_count(const Model& model);
/// Number of distinct mesh objects referenced by the model.
std::size_t stored_mesh_count(const Model& model);
/// Model transform composed with every ancestor of `id`. Throws if `id` is unknown.
Affine world_transform(const Model& model, const std::string& id);

struct DuplicateGroup {
    std::string original;
    std::vector<std::pair<std::string, Transform>> duplicates;

    std::size_t size() const { return 1 + duplicates.size(); }
};

/// Partitions mesh-bearing parts by identical mesh. The first part in document
/// order is the group original.
std::vector<DuplicateGroup> find_duplicates(const Model& model);

/// Replacement for one group original. A null mesh with `fallback` set keeps the
/// high-poly mesh.
struct ReducedMesh {
    MeshPtr mesh;
    bool fallback = false;
};

/// Replaces the mesh of every group member by its original's reduced mesh; the
/// reduced mesh object is shared by the whole group. Transforms are untouched.
Model rebuild_model(const Model& model, const std::map<std::string, ReducedMesh>& reduced,
                    const std::vector<DuplicateGroup>& groups);

}  // namespace dtwin
