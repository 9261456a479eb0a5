#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dtwin/json_io.hpp"
#include "dtwin/scenario.hpp"

namespace dtwin {

struct StateRequirement {
    std::string ref;  // instance.interaction
    std::string state;
    friend bool operator==(const StateRequirement&, const StateRequirement&) = default;
};

struct Condition {
    enum class Kind { states, wait };
    Kind kind = Kind::states;
    std::vector<StateRequirement> all;  // conjunction
    double seconds = 0.0;
    friend bool operator==(const Condition&, const Condition&) = default;
};

struct Step {
    enum class Kind { procedure, instruction };
    Kind kind = Kind::instruction;
    std::string id;
    std::string description;
    int line = 0;
    int parent = -1;            // index into ProcessModel::steps
    std::vector<int> children;  // procedures only
    bool ordered = true;        // procedures only
    std::optional<std::string> next;
    bool explicit_next = false;  // written with NEXT rather than synthesized
    // instructions only
    std::string action, target, target2;
    Condition completion;

    bool is_procedure() const { return kind == Kind::procedure; }
    /// Interaction refs the instruction watches: those named by its condition.
    std::vector<std::string> monitored() const;
};

struct ProcessModel {
    std::vector<Step> steps;  // document order
    std::vector<int> roots;   // top level, an implicit ordered sequence

    int index_of(const std::string& id) const;  // -1 if absent
    const Step* find(const std::string& id) const;
    std::optional<std::string> entry() const;
};

/// Line-oriented grammar with two-space indentation:
///   PROCEDURE <id> "<desc>" [ORDERED|UNORDERED]
///   INSTRUCTION <id> "<desc>"
///   ACTION|TARGET|TARGET2 <equipment>
///   COMPLETE WHEN <inst>.<interaction> = <state> (AND ...)*  |  COMPLETE AFTER <n> SECONDS
///   NEXT <id>   (optional, overrides the synthesized link)
/// '#' starts a comment line. Throws ParseError with line and column.
ProcessModel parse_process(std::string_view text);
ProcessModel load_process(const std::filesystem::path& path);
/// Canonical form; parse(print(p)) prints identically.
std::string print_process(const ProcessModel& p);
json process_to_json(const ProcessModel& p);

/// Empty iff every equipment and interaction reference resolves, every required state
/// is legal for its interaction, next links exist and next chains are acyclic.
std::vector<Issue> check_scenario(const ProcessModel& process, const Scenario& scenario);

/// A procedure is complete when all its children are.
bool step_complete(const ProcessModel& p, int index, const std::set<std::string>& completed);
/// Instructions that may be worked on now, document order.
std::vector<std::string> eligible_steps(const ProcessModel& p, const std::set<std::string>& completed);
/// First eligible instruction once `current` is also complete; nullopt when done.
/// Throws ValidationError for an unknown id.
std::optional<std::string> next_step(const ProcessModel& p, const std::string& current,
                                     std::set<std::string> completed);

}  // namespace dtwin
