#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dtwin/data.hpp"
#include "dtwin/json_io.hpp"
#include "dtwin/model.hpp"

namespace dtwin {

inline constexpr int scenario_schema_version = 1;

/// Structural or reference problem found by a checker. `path` locates it
/// ("instances/source/interactions/power", "steps/1.2", ...).
struct Issue {
    std::string path;
    std::string code;
    std::string message;

    friend bool operator==(const Issue&, const Issue&) = default;
};

json issue_to_json(const Issue& i);

enum class InteractionType {
    button,
    dial,
    snap_connector,
    text_display,
    dynamic_text_display,
    image_display,
    graph_display,
    rotation
};

const char* interaction_type_name(InteractionType t);
/// Throws ValidationError for unknown names.
InteractionType parse_interaction_type(const std::string& s);
bool is_display(InteractionType t);

/// Leaf attached to an instance or one of its parts.
struct Interaction {
    std::string id;    // unique within its instance
    std::string part;  // owning part id, empty for the instance itself
    InteractionType type = InteractionType::button;
    Transform transform;
    json parameters = json::object();  // kept verbatim
    std::vector<std::string> data_bindings;

    /// Named states for buttons and dials, empty otherwise.
    std::vector<std::string> states() const;
    std::set<std::string> tags() const;  // snap connectors

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Problems with the type-specific parameters (codes missing_parameter and
/// invalid_parameter), reported at `path`. Empty when complete.
std::vector<Issue> interaction_parameter_problems(const Interaction& i, const std::string& path);

struct ModelInstance {
    std::string id;
    std::string model;  // manifest path relative to the scenario file
    Transform transform;
    std::map<std::string, Transform> part_overrides;
    std::vector<Interaction> interactions;

    const Interaction* find_interaction(const std::string& id) const;

    friend bool operator==(const ModelInstance&, const ModelInstance&) = default;
};

struct ChannelDecl {
    std::string name;
    std::string unit;
    friend bool operator==(const ChannelDecl&, const ChannelDecl&) = default;
};

struct DerivedDecl {
    std::string name;
    std::string expression;
    std::string unit;
    friend bool operator==(const DerivedDecl&, const DerivedDecl&) = default;
};

/// Source descriptor. Paths are relative to the scenario file.
struct SourceDecl {
    std::variant<TimeSeriesSpec, TabularSpec, SensorStreamSpec> spec;

    const char* kind() const;
    /// Channels this source writes.
    std::vector<std::string> channels() const;
};

struct Scenario {
    int schema_version = scenario_schema_version;
    std::string name;
    std::string environment;  // id of the instance acting as the room/bench, may be empty
    std::string process;      // process document path, may be empty
    std::vector<ModelInstance> instances;
    std::vector<ChannelDecl> channels;
    std::map<std::string, double> constants;
    std::vector<DerivedDecl> derived;
    std::vector<SourceDecl> sources;

    // Not serialized.
    std::filesystem::path base_dir;
    std::map<std::string, std::shared_ptr<const Model>> models;  // by manifest path

    const ModelInstance* find_instance(const std::string& id) const;
    ModelInstance* find_instance(const std::string& id);
    /// Resolves "instance.interaction".
    const Interaction* find_interaction(const std::string& ref) const;
    /// Every channel name the data section defines (declared, sourced or derived).
    std::set<std::string> channel_names() const;
    std::shared_ptr<const Model> model_of(const ModelInstance& inst) const;
};

/// Splits "instance.interaction" at the first dot.
std::pair<std::string, std::string> split_ref(const std::string& ref);

json scenario_to_json(const Scenario& s);
/// Schema check only; no files are read.
Scenario scenario_from_json(const json& j);

/// Parses and resolves every model link. Throws ValidationError
/// "unresolved model link" naming the instance when a manifest cannot be loaded.
Scenario load_scenario(const std::filesystem::path& path);
/// Writes only the scenario file; linked geometry is never touched.
void save_scenario(const Scenario& s, const std::filesystem::path& path);

/// Loads (or reuses) the manifest and appends an instance. Throws on duplicate id.
ModelInstance& instantiate_model(Scenario& s, const std::string& manifest, const std::string& id,
                                 const Transform& transform = {});
/// owner is "instance" or "instance/part". Throws ValidationError for an unknown owner,
/// a duplicate id or incomplete parameters.
void add_interaction(Scenario& s, const std::string& owner, Interaction interaction);

/// Empty iff links resolve, ids are unique, overrides and owners exist, interaction
/// parameters are complete and data bindings name known channels.
std::vector<Issue> validate_scenario(const Scenario& s);

/// Snap connectors mate iff their tag sets intersect.
bool snap_compatible(const Interaction& a, const Interaction& b);

/// Registers channels, constants, derived channels, sources and display interactions.
/// Display ids are "instance.interaction".
void configure_engine(const Scenario& s, DataEngine& engine);

}  // namespace dtwin
