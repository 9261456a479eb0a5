#include "dtwin/player.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dtwin/error.hpp"

namespace dtwin {

namespace {

std::string issues_text(const std::vector<Issue>& issues) {
    std::string s = "session cannot start: " + std::to_string(issues.size()) + " issue(s)";
    for (const auto& i : issues) s += "\n  " + i.path + " [" + i.code + "] " + i.message;
    return s;
}

const char* kind_name(UserEvent::Kind k) {
    switch (k) {
        case UserEvent::Kind::set_state: return "set_state";
        case UserEvent::Kind::connect: return "connect";
        case UserEvent::Kind::disconnect: return "disconnect";
        case UserEvent::Kind::press: return "press";
        case UserEvent::Kind::record_reading: return "record_reading";
    }
    return "?";
}

}  // namespace

SessionError::SessionError(std::vector<Issue> issues) : ValidationError(issues_text(issues)), issues_(std::move(issues)) {}

json event_to_json(const UserEvent& e) {
    json j = {{"kind", kind_name(e.kind)}};
    switch (e.kind) {
        case UserEvent::Kind::set_state:
            j["ref"] = e.ref;
            j["state"] = e.value;
            break;
        case UserEvent::Kind::connect:
            j["ref"] = e.ref;
            j["peer"] = e.value;
            break;
        case UserEvent::Kind::disconnect:
        case UserEvent::Kind::press: j["ref"] = e.ref; break;
        case UserEvent::Kind::record_reading: j["channels"] = e.channels; break;
    }
    return j;
}

UserEvent event_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ValidationError("event needs a string 'kind'");
    }
    const auto kind = j.at("kind").get<std::string>();
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string()) throw ValidationError(kind + " event needs a string '" + key + "'");
        return j.at(key).get<std::string>();
    };
    if (kind == "set_state") return UserEvent::set_state(str("ref"), str("state"));
    if (kind == "connect") return UserEvent::connect(str("ref"), str("peer"));
    if (kind == "disconnect") return {UserEvent::Kind::disconnect, str("ref"), {}, {}};
    if (kind == "press") return UserEvent::press(str("ref"));
    if (kind == "record_reading") {
        if (!j.contains("channels") || !j.at("channels").is_array()) {
            throw ValidationError("record_reading event needs a 'channels' list");
        }
        try {
            return UserEvent::record(j.at("channels").get<std::vector<std::string>>());
        } catch (const json::exception&) {
            throw ValidationError("record_reading channels must be strings");
        }
    }
    throw ValidationError("unknown event kind '" + kind + "'");
}

Session Session::create(Scenario scenario, ProcessModel process) {
    auto issues = validate_scenario(scenario);
    for (auto& i : check_scenario(process, scenario)) issues.push_back(std::move(i));
    if (!issues.empty()) throw SessionError(std::move(issues));

    Session s;
    s.scenario_ = std::move(scenario);
    s.process_ = std::move(process);
    s.engine_ = std::make_unique<DataEngine>();
    configure_engine(s.scenario_, *s.engine_);
    for (const auto& inst : s.scenario_.instances) {
        for (const auto& i : inst.interactions) {
            InteractionState st;
            st.type = i.type;
            const auto states = i.states();
            if (!states.empty()) st.state = states.front();
            s.states_[inst.id + "." + i.id] = st;
        }
    }
    s.refresh_displays(s.engine_->tick(0.0));
    s.advance();
    return s;
}

std::optional<std::string> Session::current() const {
    if (eligible_.empty()) return std::nullopt;
    return eligible_.front();
}

bool Session::satisfied(const Step& s) const {
    if (s.completion.kind == Condition::Kind::wait) {
        const auto it = entered_at_.find(s.id);
        return it != entered_at_.end() && clock_ - it->second >= s.completion.seconds - 1e-9;
    }
    for (const auto& req : s.completion.all) {
        const auto it = states_.find(req.ref);
        if (it == states_.end()) return false;
        const auto& st = it->second;
        if (st.type == InteractionType::snap_connector) {
            if (req.state == "connected") {
                if (st.state.empty()) return false;
            } else if (req.state == "disconnected") {
                if (!st.state.empty()) return false;
            } else if (st.state != req.state) {
                return false;
            }
        } else if (st.state != req.state) {
            return false;
        }
    }
    return true;
}

void Session::advance() {
    // Steps eligible before this call are being completed by the triggering change;
    // anything that becomes eligible afterwards and already holds is pre-satisfied.
    std::set<std::string> before(eligible_.begin(), eligible_.end());
    for (;;) {
        eligible_ = eligible_steps(process_, completed_);
        bool progressed = false;
        for (const auto& id : eligible_) {
            if (!entered_at_.count(id)) entered_at_[id] = clock_;
            const Step* s = process_.find(id);
            if (!satisfied(*s)) continue;
            completed_.insert(id);
            completions_.push_back({id, clock_, !before.count(id)});
            progressed = true;
        }
        if (!progressed) break;
        // mark procedures whose children are now all done
        for (std::size_t k = 0; k < process_.steps.size(); ++k) {
            const auto& st = process_.steps[k];
            if (st.is_procedure() && !completed_.count(st.id) && step_complete(process_, static_cast<int>(k), completed_)) {
                completed_.insert(st.id);
                completions_.push_back({st.id, clock_, false});
            }
        }
    }
}

void Session::apply(const UserEvent& e) {
    auto lookup = [&](const std::string& ref) -> std::pair<const Interaction*, InteractionState*> {
        const auto* inter = scenario_.find_interaction(ref);
        const auto it = states_.find(ref);
        if (!inter || it == states_.end()) throw ValidationError("unknown interaction '" + ref + "'");
        return {inter, &it->second};
    };
    switch (e.kind) {
        case UserEvent::Kind::set_state: {
            auto [inter, st] = lookup(e.ref);
            const auto states = inter->states();
            if (states.empty()) throw ValidationError("'" + e.ref + "' has no named states");
            if (std::find(states.begin(), states.end(), e.value) == states.end()) {
                throw ValidationError("invalid state '" + e.value + "' for '" + e.ref + "'");
            }
            st->state = e.value;
            break;
        }
        case UserEvent::Kind::press: {
            auto [inter, st] = lookup(e.ref);
            if (inter->type != InteractionType::button) throw ValidationError("'" + e.ref + "' is not a button");
            const auto states = inter->states();
            const auto pos = std::find(states.begin(), states.end(), st->state) - states.begin();
            st->state = states[static_cast<std::size_t>(pos + 1) % states.size()];
            ++st->presses;
            break;
        }
        case UserEvent::Kind::connect: {
            auto [a, sa] = lookup(e.ref);
            auto [b, sb] = lookup(e.value);
            if (a->type != InteractionType::snap_connector || b->type != InteractionType::snap_connector) {
                throw ValidationError("connect needs two snap connectors");
            }
            if (a == b) throw ValidationError("cannot connect '" + e.ref + "' to itself");
            if (!snap_compatible(*a, *b)) {
                throw ValidationError("incompatible snap tags between '" + e.ref + "' and '" + e.value + "'");
            }
            for (auto* side : {sa, sb}) {
                if (!side->state.empty()) states_.at(side->state).state.clear();
            }
            sa->state = e.value;
            sb->state = e.ref;
            break;
        }
        case UserEvent::Kind::disconnect: {
            auto [a, sa] = lookup(e.ref);
            if (a->type != InteractionType::snap_connector) throw ValidationError("'" + e.ref + "' is not a snap connector");
            if (!sa->state.empty()) states_.at(sa->state).state.clear();
            sa->state.clear();
            break;
        }
        case UserEvent::Kind::record_reading: {
            if (e.channels.empty()) throw ValidationError("record_reading needs at least one channel");
            Reading r;
            r.time = clock_;
            r.step = current().value_or("");
            for (const auto& c : e.channels) {
                if (!engine_->has_channel(c)) throw ValidationError("unknown channel '" + c + "'");
                r.values[c] = engine_->channel(c).value;
            }
            readings_.push_back(std::move(r));
            break;
        }
    }
    ++events_applied_;
    advance();
}

void Session::post(UserEvent event) {
    std::lock_guard lock(queue_->mutex);
    queue_->events.push_back(std::move(event));
}

void Session::drain_queue() {
    std::deque<UserEvent> pending;
    {
        std::lock_guard lock(queue_->mutex);
        pending.swap(queue_->events);
    }
    for (const auto& e : pending) apply(e);
}

void Session::refresh_displays(const TickResult& r) {
    for (const auto& p : r.payloads) {
        const auto it = states_.find(p.at("id").get<std::string>());
        if (it != states_.end()) it->second.display = p;
    }
}

void Session::tick(double dt) {
    if (!(dt > 0.0)) throw ValidationError("tick needs dt > 0");
    drain_queue();
    clock_ += dt;
    refresh_displays(engine_->tick(clock_));
    for (const auto& inst : scenario_.instances) {
        for (const auto& i : inst.interactions) {
            if (i.type != InteractionType::rotation) continue;
            double speed = 0.0;
            if (!i.data_bindings.empty()) {
                speed = engine_->channel(i.data_bindings.front()).value.value_or(0.0);
            } else {
                speed = i.parameters.value("speed_deg_s", 0.0);
            }
            auto& st = states_.at(inst.id + "." + i.id);
            st.angle = std::fmod(st.angle + speed * dt, 360.0);
            if (st.angle < 0.0) st.angle += 360.0;
        }
    }
    advance();
}

json Session::progress_report() const {
    json completed = json::array();
    for (const auto& c : completions_) {
        completed.push_back({{"id", c.id}, {"at", c.at}, {"pre_satisfied", c.pre_satisfied}});
    }
    json pending = json::array();
    const auto cur = current();
    if (cur) pending.push_back(*cur);
    for (const auto& s : process_.steps) {
        if (!completed_.count(s.id) && (!cur || s.id != *cur)) pending.push_back(s.id);
    }
    json interactions = json::object();
    for (const auto& [ref, st] : states_) {
        json j = {{"type", interaction_type_name(st.type)}};
        switch (st.type) {
            case InteractionType::button:
                j["state"] = st.state;
                j["presses"] = st.presses;
                break;
            case InteractionType::dial: j["state"] = st.state; break;
            case InteractionType::snap_connector:
                j["connected_to"] = st.state.empty() ? json(nullptr) : json(st.state);
                break;
            case InteractionType::rotation: j["angle_deg"] = st.angle; break;
            default: j["display"] = st.display; break;
        }
        interactions[ref] = j;
    }
    json readings = json::array();
    for (const auto& r : readings_) {
        json values = json::object();
        for (const auto& [k, v] : r.values) values[k] = v ? json(*v) : json(nullptr);
        readings.push_back({{"time", r.time}, {"step", r.step}, {"values", values}});
    }
    json channels = json::object();
    for (const auto& [name, ch] : engine_->channels()) {
        channels[name] = {{"value", ch.value ? json(*ch.value) : json(nullptr)},
                          {"unit", ch.unit},
                          {"samples", ch.history.size()}};
    }
    return {{"clock", clock_},
            {"done", done()},
            {"current", cur ? json(*cur) : json(nullptr)},
            {"eligible", eligible_},
            {"completed", completed},
            {"pending", pending},
            {"interactions", interactions},
            {"readings", readings},
            {"channels", channels},
            {"events_applied", events_applied_}};
}

void run_script(Session& session, std::istream& script, const ScriptOptions& options) {
    if (!(options.max_dt > 0.0)) throw ValidationError("max_dt must be > 0");
    std::string line;
    int n = 0;
    while (std::getline(script, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("script: ") + e.what(), n, 1);
        }
        if (!j.is_object() || !j.contains("at") || !j.at("at").is_number()) {
            throw ValidationError("script line " + std::to_string(n) + ": needs a numeric 'at'");
        }
        const double at = j.at("at").get<double>();
        if (at < session.clock() - 1e-12) {
            throw ValidationError("script line " + std::to_string(n) + ": time goes backwards");
        }
        while (session.clock() < at - 1e-12) session.tick(std::min(options.max_dt, at - session.clock()));
        if (j.contains("event")) {
            try {
                session.apply(event_from_json(j.at("event")));
            } catch (const ValidationError& e) {
                throw ValidationError("script line " + std::to_string(n) + ": " + e.what());
            }
        }
    }
}

}  // namespace dtwin
