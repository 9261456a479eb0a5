#pragma once

#include <deque>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtwin/data.hpp"
#include "dtwin/error.hpp"
#include "dtwin/process.hpp"
#include "dtwin/scenario.hpp"

namespace dtwin {

/// Raised when a session cannot start; carries every outstanding issue.
class SessionError : public ValidationError {
public:
    explicit SessionError(std::vector<Issue> issues);
    const std::vector<Issue>& issues() const noexcept { return issues_; }

private:
    std::vector<Issue> issues_;
};

struct UserEvent {
    enum class Kind { set_state, connect, disconnect, press, record_reading };
    Kind kind = Kind::set_state;
    std::string ref;   // instance.interaction
    std::string value;  // state for set_state, peer ref for connect
    std::vector<std::string> channels;  // record_reading

    static UserEvent set_state(std::string ref, std::string state) { return {Kind::set_state, std::move(ref), std::move(state), {}}; }
    static UserEvent connect(std::string a, std::string b) { return {Kind::connect, std::move(a), std::move(b), {}}; }
    static UserEvent press(std::string ref) { return {Kind::press, std::move(ref), {}, {}}; }
    static UserEvent record(std::vector<std::string> ch) { return {Kind::record_reading, {}, {}, std::move(ch)}; }
};

json event_to_json(const UserEvent& e);
UserEvent event_from_json(const json& j);

struct InteractionState {
    InteractionType type = InteractionType::button;
    std::string state;  // button/dial state, or connected peer ref ("" when free)
    double angle = 0.0;  // rotation, degrees in [0, 360)
    int presses = 0;
    json display;  // last payload for displays
};

struct Completion {
    std::string id;
    double at = 0.0;
    bool pre_satisfied = false;  // condition already held when the step became eligible
};

struct Reading {
    double time = 0.0;
    std::string step;
    std::map<std::string, std::optional<double>> values;
};

class Session {
public:
    /// Refuses to start (SessionError) while the scenario or the process check has issues.
    static Session create(Scenario scenario, ProcessModel process);

    /// Throws ValidationError for unknown refs, illegal states or incompatible connectors.
    void apply(const UserEvent& event);
    /// Queues an event from any thread; queued events are applied at the start of the next tick.
    void post(UserEvent event);
    /// dt > 0. Advances the clock, the data engine, rotations and waits.
    void tick(double dt);

    bool done() const { return eligible_.empty(); }
    std::optional<std::string> current() const;
    const std::vector<std::string>& eligible() const { return eligible_; }
    const std::set<std::string>& completed() const { return completed_; }
    const std::vector<Completion>& completions() const { return completions_; }
    double clock() const { return clock_; }
    const std::map<std::string, InteractionState>& states() const { return states_; }
    const std::vector<Reading>& readings() const { return readings_; }
    const DataEngine& engine() const { return *engine_; }
    const Scenario& scenario() const { return scenario_; }
    const ProcessModel& process() const { return process_; }

    json progress_report() const;

private:
    Session() = default;
    bool satisfied(const Step& s) const;
    void advance();
    void refresh_displays(const TickResult& r);
    void drain_queue();

    Scenario scenario_;
    ProcessModel process_;
    std::unique_ptr<DataEngine> engine_;
    std::map<std::string, InteractionState> states_;
    std::set<std::string> completed_;
    std::vector<Completion> completions_;
    std::vector<std::string> eligible_;
    std::map<std::string, double> entered_at_;
    std::vector<Reading> readings_;
    std::size_t events_applied_ = 0;
    double clock_ = 0.0;

    struct Queue {
        std::mutex mutex;
        std::deque<UserEvent> events;
    };
    std::unique_ptr<Queue> queue_ = std::make_unique<Queue>();
};

struct ScriptOptions {
    double max_dt = 1.0;  // longest single tick while catching up to an event time
};

/// JSON lines `{"at": t, "event": {...}}`; a line without "event" only advances the
/// clock. Blank lines are skipped. Times must not decrease.
void run_script(Session& session, std::istream& script, const ScriptOptions& options = {});

}  // namespace dtwin
