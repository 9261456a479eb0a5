#include "dtwin/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "dtwin/error.hpp"

namespace dtwin {

namespace {

namespace fs = std::filesystem;

constexpr InteractionType all_types[] = {
    InteractionType::button,       InteractionType::dial,          InteractionType::snap_connector,
    InteractionType::text_display, InteractionType::dynamic_text_display, InteractionType::image_display,
    InteractionType::graph_display, InteractionType::rotation};

bool has_string(const json& p, const char* key) { return p.contains(key) && p.at(key).is_string(); }

bool string_list(const json& v) {
    if (!v.is_array()) return false;
    return std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
}

template <class T>
T get_or_throw(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": '" + std::string(key) + "' has the wrong type");
    }
}

json source_to_json(const SourceDecl& s) {
    return std::visit(
        [](const auto& spec) -> json {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, TimeSeriesSpec>) {
                return {{"kind", "time_series_csv"},
                        {"path", spec.path.generic_string()},
                        {"time_column", spec.time_column},
                        {"value_columns", spec.value_columns},
                        {"schedule", spec.schedule}};
            } else if constexpr (std::is_same_v<T, TabularSpec>) {
                return {{"kind", "tabular"}, {"path", spec.path.generic_string()}, {"columns", spec.columns}};
            } else {
                return {{"kind", "sensor_stream"},
                        {"replay", spec.replay.generic_string()},
                        {"channel_map", spec.channel_map}};
            }
        },
        s.spec);
}

SourceDecl source_from_json(const json& j, const std::string& where) {
    const auto kind = get_or_throw<std::string>(j, "kind", where);
    if (kind == "time_series_csv") {
        TimeSeriesSpec t;
        t.path = get_or_throw<std::string>(j, "path", where);
        t.time_column = j.value("time_column", "time");
        t.value_columns = get_or_throw<std::vector<std::string>>(j, "value_columns", where);
        t.schedule = get_or_throw<double>(j, "schedule", where);
        if (!(t.schedule > 0.0)) throw ValidationError(where + ": schedule must be > 0");
        if (t.value_columns.empty()) throw ValidationError(where + ": value_columns is empty");
        return {t};
    }
    if (kind == "tabular") {
        TabularSpec t;
        t.path = get_or_throw<std::string>(j, "path", where);
        t.columns = get_or_throw<std::vector<std::string>>(j, "columns", where);
        if (t.columns.empty()) throw ValidationError(where + ": columns is empty");
        return {t};
    }
    if (kind == "sensor_stream") {
        SensorStreamSpec t;
        t.replay = get_or_throw<std::string>(j, "replay", where);
        t.channel_map = get_or_throw<std::map<std::string, std::string>>(j, "channel_map", where);
        return {t};
    }
    throw ValidationError(where + ": unknown source kind '" + kind + "'");
}

json interaction_to_json(const Interaction& i) {
    json j = {{"id", i.id}, {"type", interaction_type_name(i.type)}, {"transform", i.transform},
              {"parameters", i.parameters}};
    if (!i.part.empty()) j["part"] = i.part;
    if (!i.data_bindings.empty()) j["data_bindings"] = i.data_bindings;
    return j;
}

Interaction interaction_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": interaction must be an object");
    Interaction i;
    i.id = get_or_throw<std::string>(j, "id", where);
    const std::string at = where + "/" + i.id;
    i.type = parse_interaction_type(get_or_throw<std::string>(j, "type", at));
    i.part = j.value("part", "");
    if (j.contains("transform")) {
        try {
            i.transform = j.at("transform").get<Transform>();
        } catch (const json::exception& e) {
            throw ValidationError(at + ": " + e.what());
        }
    }
    if (j.contains("parameters")) {
        if (!j.at("parameters").is_object()) throw ValidationError(at + ": parameters must be an object");
        i.parameters = j.at("parameters");
    }
    if (j.contains("data_bindings")) i.data_bindings = get_or_throw<std::vector<std::string>>(j, "data_bindings", at);
    return i;
}

bool model_has_part(const Model& m, const std::string& id) { return find_part(m, id) != nullptr; }

}  // namespace

json issue_to_json(const Issue& i) { return {{"path", i.path}, {"code", i.code}, {"message", i.message}}; }

const char* interaction_type_name(InteractionType t) {
    switch (t) {
        case InteractionType::button: return "button";
        case InteractionType::dial: return "dial";
        case InteractionType::snap_connector: return "snap_connector";
        case InteractionType::text_display: return "text_display";
        case InteractionType::dynamic_text_display: return "dynamic_text_display";
        case InteractionType::image_display: return "image_display";
        case InteractionType::graph_display: return "graph_display";
        case InteractionType::rotation: return "rotation";
    }
    return "?";
}

InteractionType parse_interaction_type(const std::string& s) {
    for (auto t : all_types) {
        if (s == interaction_type_name(t)) return t;
    }
    throw ValidationError("unknown interaction type '" + s + "'");
}

bool is_display(InteractionType t) {
    return t == InteractionType::text_display || t == InteractionType::dynamic_text_display ||
           t == InteractionType::image_display || t == InteractionType::graph_display;
}

std::vector<std::string> Interaction::states() const {
    if (type != InteractionType::button && type != InteractionType::dial) return {};
    if (!parameters.contains("states") || !string_list(parameters.at("states"))) return {};
    return parameters.at("states").get<std::vector<std::string>>();
}

std::set<std::string> Interaction::tags() const {
    if (type != InteractionType::snap_connector || !parameters.contains("tags") ||
        !string_list(parameters.at("tags"))) {
        return {};
    }
    const auto v = parameters.at("tags").get<std::vector<std::string>>();
    return {v.begin(), v.end()};
}

std::vector<Issue> interaction_parameter_problems(const Interaction& i, const std::string& path) {
    std::vector<Issue> out;
    const json& p = i.parameters;
    auto missing = [&](const std::string& m) { out.push_back({path, "missing_parameter", m}); };
    auto invalid = [&](const std::string& m) { out.push_back({path, "invalid_parameter", m}); };
    const auto bindings = i.data_bindings.size();

    switch (i.type) {
        case InteractionType::button:
        case InteractionType::dial: {
            const std::size_t need = i.type == InteractionType::dial ? 2 : 1;
            if (!p.contains("states")) {
                missing(std::string(interaction_type_name(i.type)) + " needs 'states'");
                break;
            }
            if (!string_list(p.at("states"))) {
                invalid("'states' must be a list of names");
                break;
            }
            const auto st = p.at("states").get<std::vector<std::string>>();
            const std::set<std::string> uniq(st.begin(), st.end());
            if (st.size() < need) {
                invalid(std::string(interaction_type_name(i.type)) + " needs at least " + std::to_string(need) +
                        " states, has " + std::to_string(st.size()));
            } else if (uniq.size() != st.size() || uniq.count("")) {
                invalid("'states' must be distinct non-empty names");
            }
            break;
        }
        case InteractionType::snap_connector:
            if (!p.contains("tags")) {
                missing("snap_connector needs 'tags'");
            } else if (!string_list(p.at("tags")) || p.at("tags").empty()) {
                invalid("'tags' must be a non-empty list of names");
            }
            break;
        case InteractionType::text_display:
            if (!has_string(p, "text")) missing("text_display needs a 'text' string");
            break;
        case InteractionType::dynamic_text_display:
            if (bindings != 1) missing("dynamic_text_display needs exactly one data binding");
            break;
        case InteractionType::image_display:
            if (!has_string(p, "path")) missing("image_display needs a 'path' string");
            break;
        case InteractionType::graph_display:
            if (bindings == 0) missing("graph_display needs at least one data binding");
            if (p.contains("graph_kind")) {
                if (!p.at("graph_kind").is_string()) {
                    invalid("'graph_kind' must be line or bar");
                } else {
                    try {
                        parse_graph_kind(p.at("graph_kind").get<std::string>());
                    } catch (const ValidationError& e) {
                        invalid(e.what());
                    }
                }
            }
            break;
        case InteractionType::rotation: {
            if (!p.contains("axis")) {
                missing("rotation needs an 'axis'");
            } else {
                const json& a = p.at("axis");
                if (!a.is_array() || a.size() != 3 ||
                    !std::all_of(a.begin(), a.end(), [](const json& e) { return e.is_number(); })) {
                    invalid("'axis' must be three numbers");
                } else {
                    const double n = std::sqrt(a[0].get<double>() * a[0].get<double>() +
                                               a[1].get<double>() * a[1].get<double>() +
                                               a[2].get<double>() * a[2].get<double>());
                    if (std::fabs(n - 1.0) > 1e-6) invalid("'axis' must be a unit vector");
                }
            }
            const bool speed = p.contains("speed_deg_s");
            if (speed && !p.at("speed_deg_s").is_number()) invalid("'speed_deg_s' must be a number");
            if (speed && bindings > 0) invalid("rotation takes either 'speed_deg_s' or a bound channel, not both");
            if (!speed && bindings == 0) missing("rotation needs 'speed_deg_s' or a bound speed channel");
            if (bindings > 1) invalid("rotation binds at most one channel");
            break;
        }
    }
    return out;
}

const Interaction* ModelInstance::find_interaction(const std::string& id) const {
    for (const auto& i : interactions) {
        if (i.id == id) return &i;
    }
    return nullptr;
}

const char* SourceDecl::kind() const {
    switch (spec.index()) {
        case 0: return "time_series_csv";
        case 1: return "tabular";
        default: return "sensor_stream";
    }
}

std::vector<std::string> SourceDecl::channels() const {
    if (const auto* t = std::get_if<TimeSeriesSpec>(&spec)) return t->value_columns;
    if (const auto* t = std::get_if<TabularSpec>(&spec)) return t->columns;
    std::vector<std::string> out;
    for (const auto& [sensor, ch] : std::get<SensorStreamSpec>(spec).channel_map) out.push_back(ch);
    return out;
}

const ModelInstance* Scenario::find_instance(const std::string& id) const {
    for (const auto& i : instances) {
        if (i.id == id) return &i;
    }
    return nullptr;
}

ModelInstance* Scenario::find_instance(const std::string& id) {
    for (auto& i : instances) {
        if (i.id == id) return &i;
    }
    return nullptr;
}

std::pair<std::string, std::string> split_ref(const std::string& ref) {
    const auto dot = ref.find('.');
    if (dot == std::string::npos) return {ref, ""};
    return {ref.substr(0, dot), ref.substr(dot + 1)};
}

const Interaction* Scenario::find_interaction(const std::string& ref) const {
    const auto [inst, inter] = split_ref(ref);
    const auto* i = find_instance(inst);
    return i ? i->find_interaction(inter) : nullptr;
}

std::set<std::string> Scenario::channel_names() const {
    std::set<std::string> out;
    for (const auto& c : channels) out.insert(c.name);
    for (const auto& d : derived) out.insert(d.name);
    for (const auto& s : sources) {
        for (const auto& c : s.channels()) out.insert(c);
    }
    return out;
}

std::shared_ptr<const Model> Scenario::model_of(const ModelInstance& inst) const {
    const auto it = models.find(inst.model);
    return it == models.end() ? nullptr : it->second;
}

json scenario_to_json(const Scenario& s) {
    json instances = json::array();
    for (const auto& inst : s.instances) {
        json ov = json::object();
        for (const auto& [part, t] : inst.part_overrides) ov[part] = t;
        json inter = json::array();
        for (const auto& i : inst.interactions) inter.push_back(interaction_to_json(i));
        instances.push_back({{"id", inst.id},
                             {"model", inst.model},
                             {"transform", inst.transform},
                             {"part_overrides", ov},
                             {"interactions", inter}});
    }
    json channels = json::array();
    for (const auto& c : s.channels) channels.push_back({{"name", c.name}, {"unit", c.unit}});
    json derived = json::array();
    for (const auto& d : s.derived) derived.push_back({{"name", d.name}, {"expression", d.expression}, {"unit", d.unit}});
    json sources = json::array();
    for (const auto& src : s.sources) sources.push_back(source_to_json(src));
    json j = {{"schema_version", s.schema_version},
              {"name", s.name},
              {"instances", instances},
              {"data", {{"channels", channels}, {"constants", s.constants}, {"derived", derived}, {"sources", sources}}}};
    if (!s.environment.empty()) j["environment"] = s.environment;
    if (!s.process.empty()) j["process"] = s.process;
    return j;
}

Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
    Scenario s;
    s.schema_version = get_or_throw<int>(j, "schema_version", "scenario");
    if (s.schema_version != scenario_schema_version) {
        throw ValidationError("unsupported scenario schema_version " + std::to_string(s.schema_version));
    }
    s.name = j.value("name", "");
    s.environment = j.value("environment", "");
    s.process = j.value("process", "");
    if (!j.contains("instances") || !j.at("instances").is_array()) {
        throw ValidationError("scenario needs an 'instances' array");
    }
    for (const auto& ij : j.at("instances")) {
        if (!ij.is_object()) throw ValidationError("instances: entry must be an object");
        ModelInstance inst;
        inst.id = get_or_throw<std::string>(ij, "id", "instances");
        const std::string where = "instances/" + inst.id;
        inst.model = get_or_throw<std::string>(ij, "model", where);
        try {
            if (ij.contains("transform")) inst.transform = ij.at("transform").get<Transform>();
            if (ij.contains("part_overrides")) {
                for (const auto& [part, t] : ij.at("part_overrides").items()) inst.part_overrides[part] = t.get<Transform>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (ij.contains("interactions")) {
            if (!ij.at("interactions").is_array()) throw ValidationError(where + ": interactions must be an array");
            for (const auto& x : ij.at("interactions")) {
                inst.interactions.push_back(interaction_from_json(x, where + "/interactions"));
            }
        }
        s.instances.push_back(std::move(inst));
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.contains("channels")) {
            for (const auto& c : d.at("channels")) {
                s.channels.push_back({get_or_throw<std::string>(c, "name", "data/channels"), c.value("unit", "")});
            }
        }
        if (d.contains("constants")) {
            for (const auto& [k, v] : d.at("constants").items()) {
                if (!v.is_number()) throw ValidationError("data/constants/" + k + ": must be a number");
                s.constants[k] = v.get<double>();
            }
        }
        if (d.contains("derived")) {
            for (const auto& c : d.at("derived")) {
                s.derived.push_back({get_or_throw<std::string>(c, "name", "data/derived"),
                                     get_or_throw<std::string>(c, "expression", "data/derived"), c.value("unit", "")});
            }
        }
        if (d.contains("sources")) {
            int k = 0;
            for (const auto& c : d.at("sources")) s.sources.push_back(source_from_json(c, "data/sources/" + std::to_string(k++)));
        }
    }
    return s;
}

Scenario load_scenario(const fs::path& path) {
    Scenario s = scenario_from_json(read_json_file(path));
    s.base_dir = path.parent_path();
    for (const auto& inst : s.instances) {
        if (s.models.count(inst.model)) continue;
        try {
            s.models[inst.model] = std::make_shared<const Model>(load_model(s.base_dir / inst.model));
        } catch (const Error& e) {
            throw ValidationError("unresolved model link for instance '" + inst.id + "': " + inst.model + " (" +
                                  e.what() + ")");
        }
    }
    return s;
}

void save_scenario(const Scenario& s, const fs::path& path) { write_json_file(path, scenario_to_json(s)); }

ModelInstance& instantiate_model(Scenario& s, const std::string& manifest, const std::string& id,
                                 const Transform& transform) {
    if (id.empty() || id.find('.') != std::string::npos || id.find('/') != std::string::npos) {
        throw ValidationError("instance id '" + id + "' must be non-empty without '.' or '/'");
    }
    if (s.find_instance(id)) throw ValidationError("duplicate instance id '" + id + "'");
    if (!transform.valid()) throw ValidationError("instance '" + id + "': transform scale must be > 0");
    if (!s.models.count(manifest)) {
        try {
            s.models[manifest] = std::make_shared<const Model>(load_model(s.base_dir / manifest));
        } catch (const Error& e) {
            throw ValidationError("unresolved model link for instance '" + id + "': " + manifest + " (" + e.what() + ")");
        }
    }
    s.instances.push_back({id, manifest, transform, {}, {}});
    return s.instances.back();
}

void add_interaction(Scenario& s, const std::string& owner, Interaction interaction) {
    const auto slash = owner.find('/');
    const std::string inst_id = owner.substr(0, slash);
    const std::string part = slash == std::string::npos ? "" : owner.substr(slash + 1);
    ModelInstance* inst = s.find_instance(inst_id);
    if (!inst) throw ValidationError("unknown owner '" + owner + "'");
    if (!part.empty()) {
        const auto m = s.model_of(*inst);
        if (!m || !model_has_part(*m, part)) throw ValidationError("unknown owner '" + owner + "'");
    }
    if (interaction.id.empty() || interaction.id.find('.') != std::string::npos) {
        throw ValidationError("interaction id '" + interaction.id + "' must be non-empty without '.'");
    }
    if (inst->find_interaction(interaction.id)) {
        throw ValidationError("duplicate interaction id '" + interaction.id + "' on '" + inst_id + "'");
    }
    interaction.part = part;
    const auto problems = interaction_parameter_problems(interaction, owner + "/" + interaction.id);
    if (!problems.empty()) throw ValidationError(owner + "/" + interaction.id + ": " + problems.front().message);
    inst->interactions.push_back(std::move(interaction));
}

std::vector<Issue> validate_scenario(const Scenario& s) {
    std::vector<Issue> out;
    const auto channels = s.channel_names();
    std::set<std::string> ids;
    for (const auto& inst : s.instances) {
        const std::string where = "instances/" + inst.id;
        if (!ids.insert(inst.id).second) out.push_back({where, "duplicate_id", "instance id '" + inst.id + "' repeated"});
        if (inst.id.find('.') != std::string::npos) {
            out.push_back({where, "invalid_id", "instance ids cannot contain '.'"});
        }
        const auto model = s.model_of(inst);
        if (!model) out.push_back({where, "unresolved_link", "unresolved model link: " + inst.model});
        for (const auto& [part, t] : inst.part_overrides) {
            if (model && !model_has_part(*model, part)) {
                out.push_back({where + "/part_overrides/" + part, "unknown_part",
                               "override names part '" + part + "' absent from " + inst.model});
            }
        }
        std::set<std::string> iids;
        for (const auto& i : inst.interactions) {
            const std::string at = where + "/interactions/" + i.id;
            if (!iids.insert(i.id).second) {
                out.push_back({at, "duplicate_id", "interaction id '" + i.id + "' repeated on '" + inst.id + "'"});
            }
            if (!i.part.empty() && model && !model_has_part(*model, i.part)) {
                out.push_back({at, "unknown_owner", "owner part '" + inst.id + "/" + i.part + "' does not exist"});
            }
            for (auto& p : interaction_parameter_problems(i, at)) out.push_back(std::move(p));
            for (const auto& b : i.data_bindings) {
                if (!channels.count(b)) out.push_back({at, "unknown_channel", "data binding '" + b + "' is not a channel"});
            }
        }
    }
    if (!s.environment.empty() && !s.find_instance(s.environment)) {
        out.push_back({"environment", "unknown_instance", "environment instance '" + s.environment + "' not found"});
    }

    // channel definitions: one writer per channel
    std::map<std::string, std::string> writer;
    auto claim = [&](const std::string& ch, const std::string& who) {
        const auto [it, fresh] = writer.emplace(ch, who);
        if (!fresh) out.push_back({who, "duplicate_channel", "channel '" + ch + "' already written by " + it->second});
    };
    for (std::size_t k = 0; k < s.sources.size(); ++k) {
        const std::string where = "data/sources/" + std::to_string(k);
        for (const auto& c : s.sources[k].channels()) claim(c, where);
        fs::path file;
        if (const auto* t = std::get_if<TimeSeriesSpec>(&s.sources[k].spec)) file = t->path;
        if (const auto* t = std::get_if<TabularSpec>(&s.sources[k].spec)) file = t->path;
        if (const auto* t = std::get_if<SensorStreamSpec>(&s.sources[k].spec)) file = t->replay;
        if (!fs::exists(s.base_dir / file)) {
            out.push_back({where, "unresolved_link", "source file not found: " + file.generic_string()});
        }
    }
    for (const auto& d : s.derived) claim(d.name, "data/derived/" + d.name);
    for (const auto& [name, v] : s.constants) {
        if (channels.count(name)) out.push_back({"data/constants/" + name, "duplicate_channel", "'" + name + "' is both a constant and a channel"});
    }

    DataEngine probe;
    bool ok = true;
    for (const auto& c : channels) {
        if (!s.constants.count(c)) probe.add_channel(c);
    }
    for (const auto& [k, v] : s.constants) {
        if (!channels.count(k)) probe.set_constant(k, v);
    }
    for (const auto& d : s.derived) {
        try {
            probe.add_derived(d.name, d.expression);
        } catch (const ValidationError& e) {
            out.push_back({"data/derived/" + d.name, "expression", e.what()});
            ok = false;
        }
    }
    if (ok) {
        try {
            probe.bind();
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            out.push_back({"data/derived", msg.find("cycle") != std::string::npos ? "cycle" : "unknown_channel", msg});
        }
    }
    return out;
}

bool snap_compatible(const Interaction& a, const Interaction& b) {
    if (a.type != InteractionType::snap_connector || b.type != InteractionType::snap_connector) return false;
    const auto ta = a.tags();
    const auto tb = b.tags();
    return std::any_of(ta.begin(), ta.end(), [&](const std::string& t) { return tb.count(t) != 0; });
}

void configure_engine(const Scenario& s, DataEngine& engine) {
    std::map<std::string, std::string> units;
    for (const auto& c : s.channels) units[c.name] = c.unit;
    for (const auto& c : s.channels) engine.add_channel(c.name, c.unit);
    for (const auto& [k, v] : s.constants) engine.set_constant(k, v);
    for (const auto& src : s.sources) {
        for (const auto& c : src.channels()) engine.add_channel(c, units.count(c) ? units[c] : "");
        if (const auto* t = std::get_if<TimeSeriesSpec>(&src.spec)) {
            TimeSeriesSpec spec = *t;
            spec.path = s.base_dir / t->path;
            engine.add_timeseries(parse_timeseries_csv(spec));
        } else if (const auto* t = std::get_if<TabularSpec>(&src.spec)) {
            engine.add_tabular(TabularSource::load({s.base_dir / t->path, t->columns}));
        } else {
            const auto& sensor = std::get<SensorStreamSpec>(src.spec);
            engine.add_sensor_replay(read_sensor_replay(s.base_dir / sensor.replay), sensor.channel_map);
        }
    }
    for (const auto& d : s.derived) engine.add_derived(d.name, d.expression, d.unit);
    for (const auto& inst : s.instances) {
        for (const auto& i : inst.interactions) {
            if (!is_display(i.type)) continue;
            DisplayBinding b;
            b.id = inst.id + "." + i.id;
            switch (i.type) {
                case InteractionType::text_display:
                    b.kind = DisplayKind::text;
                    b.text = i.parameters.value("text", "");
                    break;
                case InteractionType::dynamic_text_display:
                    b.kind = DisplayKind::dynamic_text;
                    b.channel = i.data_bindings.empty() ? "" : i.data_bindings.front();
                    break;
                case InteractionType::image_display:
                    b.kind = DisplayKind::image;
                    b.path = i.parameters.value("path", "");
                    break;
                default:
                    b.kind = DisplayKind::graph;
                    b.channels = i.data_bindings;
                    b.graph_kind = parse_graph_kind(i.parameters.value("graph_kind", "line"));
                    break;
            }
            engine.add_display(std::move(b));
        }
    }
    engine.bind();
}

}  // namespace dtwin
