#include <doctest.h>

#include "dtwin/error.hpp"
#include "dtwin/process.hpp"
#include "mutations.hpp"

using namespace dtwin;

namespace {

const std::filesystem::path case_dir = std::filesystem::path(DTWIN_FIXTURE_DIR) / "case_study";

const char* two_step = R"(PROCEDURE 1 "Assemble Electrical Lab" ORDERED
  INSTRUCTION 1.1 "Use a cable to connect DC motor +ve to 120V source -ve"
    ACTION connect1
    TARGET motor
    TARGET2 source
    COMPLETE WHEN connect1.end_a = motor.pos AND connect1.end_b = source.neg
  INSTRUCTION 1.2 "wait"
    COMPLETE AFTER 10 SECONDS
)";

int parse_error_line(const std::string& text) {
    try {
        parse_process(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_CASE("parse an ordered procedure") {
    const auto p = parse_process(two_step);
    REQUIRE(p.steps.size() == 3);
    const Step& proc = p.steps[0];
    CHECK(proc.is_procedure());
    CHECK(proc.description == "Assemble Electrical Lab");
    CHECK(proc.children.size() == 2);
    const Step* i1 = p.find("1.1");
    CHECK(i1->action == "connect1");
    CHECK(i1->target == "motor");
    CHECK(i1->target2 == "source");
    CHECK(i1->description == "Use a cable to connect DC motor +ve to 120V source -ve");
    CHECK(i1->next == std::optional<std::string>("1.2"));
    CHECK(i1->monitored() == std::vector<std::string>{"connect1.end_a", "connect1.end_b"});
    CHECK(p.find("1.2")->completion.kind == Condition::Kind::wait);
    CHECK(p.find("1.2")->completion.seconds == 10.0);
    CHECK(!p.find("1.2")->next);
    CHECK(p.entry() == std::optional<std::string>("1"));
    const auto j = process_to_json(p);
    CHECK(j["steps"][0]["children"][0]["target_object2"] == "source");
}

TEST_CASE("parse errors carry line and column") {
    CHECK_THROWS_WITH_AS(parse_process("PROCEDURE 1 \"p\"\n  INSTRUCTION 1.1 \"x\"\n    ACTION a\n"),
                         doctest::Contains("missing completion"), ParseError);
    CHECK(parse_error_line("PROCEDURE 1 \"p\"\n  INSTRUCTION 1.1 \"x\"\n    COMPLETE AFTER 1 SECONDS\n  INSTRUCTION 1.1 \"y\"\n    COMPLETE AFTER 1 SECONDS\n") == 4);
    try {
        parse_process("PROCEDURE 1 \"p\"\n  INSTRUCTION 1.1 \"x\"\n    VERB a\n");
        FAIL("expected");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("unknown keyword 'VERB'") != std::string::npos);
        CHECK(e.line() == 3);
        CHECK(e.column() == 5);
    }
    CHECK(parse_error_line("PROCEDURE 1 \"p\"\n   INSTRUCTION 1.1 \"x\"\n") == 2);       // odd indent
    CHECK(parse_error_line("PROCEDURE 1 \"p\"\n\tINSTRUCTION 1.1 \"x\"\n") == 2);       // tab
    CHECK(parse_error_line("PROCEDURE 1 \"p\"\n") == 1);                                  // empty procedure
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n  COMPLETE AFTER 0 SECONDS\n") == 2);  // non-positive wait
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n  COMPLETE WHEN a.b = \n") == 2);
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n  COMPLETE WHEN ab = on\n") == 2);
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n  COMPLETE WHEN a.b = on OR c.d = off\n") == 2);
    CHECK(parse_error_line("INSTRUCTION 1 \"x\n") == 1);
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n  COMPLETE AFTER 1 SECONDS\n  INSTRUCTION 2 \"y\"\n") == 3);
    CHECK(parse_error_line("INSTRUCTION 1 \"x\"\n    ACTION a\n") == 2);
    CHECK(parse_error_line("PROCEDURE 1 \"p\"\n  ACTION a\n") == 2);
    CHECK(parse_process("# only a comment\n\n").steps.empty());
}

TEST_CASE("canonical printer round trip") {
    const auto p = load_process(case_dir / "lab.proc");
    const auto text = print_process(p);
    CHECK(print_process(parse_process(text)) == text);
    CHECK(process_to_json(parse_process(text)) == process_to_json(p));
    const auto q = parse_process("INSTRUCTION a \"say \\\"hi\\\"\"\n  COMPLETE WHEN x.y = \"two words\"\n  NEXT a\n");
    CHECK(q.steps[0].description == "say \"hi\"");
    CHECK(print_process(parse_process(print_process(q))) == print_process(q));
    CHECK(print_process(q).find("NEXT a") != std::string::npos);
}

TEST_CASE("next step") {
    const auto p = parse_process(R"(PROCEDURE 1 "chain" ORDERED
  INSTRUCTION 1.1 "a"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION 1.2 "b"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION 1.3 "c"
    COMPLETE AFTER 1 SECONDS
PROCEDURE 2 "free" UNORDERED
  INSTRUCTION A "a"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION B "b"
    COMPLETE AFTER 1 SECONDS
)");
    CHECK(next_step(p, "1.1", {}) == std::optional<std::string>("1.2"));
    CHECK(next_step(p, "1.3", {"1.1", "1.2"}) == std::optional<std::string>("A"));
    CHECK(eligible_steps(p, {"1.1", "1.2", "1.3"}) == std::vector<std::string>{"A", "B"});
    CHECK(next_step(p, "A", {"1.1", "1.2", "1.3"}) == std::optional<std::string>("B"));
    CHECK(!next_step(p, "B", {"1.1", "1.2", "1.3", "A"}));
    CHECK_THROWS_AS(next_step(p, "9", {}), ValidationError);

    // completion notifications out of order never skip an ordered child
    std::set<std::string> done;
    std::vector<std::string> visited;
    done.insert("1.3");
    for (int k = 0; k < 3; ++k) {
        const auto e = eligible_steps(p, done);
        visited.push_back(e.front());
        done.insert(e.front());
    }
    CHECK(visited == std::vector<std::string>{"1.1", "1.2", "A"});
}

TEST_CASE("checker on the case study") {
    const auto sc = load_scenario(case_dir / "scenario.json");
    const auto p = load_process(case_dir / "lab.proc");
    CHECK(check_scenario(p, sc).empty());

    auto text = print_process(p);
    {
        auto t = text;
        t.replace(t.find("TARGET voltmeter"), 16, "TARGET Voltmeter2");
        const auto issues = check_scenario(parse_process(t), sc);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].code == "unresolved_reference");
        CHECK(issues[0].message.find("Voltmeter2") != std::string::npos);
    }
    {
        auto t = text;
        t.replace(t.find("source.power = on"), 17, "source.power = medium");
        const auto issues = check_scenario(parse_process(t), sc);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].code == "invalid_state");
    }
    {
        auto t = text + "INSTRUCTION 3 \"x\"\n  COMPLETE WHEN bench.wiring = on\n  NEXT 7\n";
        const auto issues = check_scenario(parse_process(t), sc);
        REQUIRE(issues.size() == 2);
        CHECK(issues[0].code == "dangling_next");
        CHECK(issues[1].code == "invalid_state");  // displays have no named states
    }
    {
        const auto cyc = parse_process("INSTRUCTION a \"x\"\n  COMPLETE AFTER 1 SECONDS\n  NEXT b\nINSTRUCTION b \"y\"\n  COMPLETE AFTER 1 SECONDS\n  NEXT a\n");
        const auto issues = check_scenario(cyc, sc);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].code == "next_cycle");
    }
}

TEST_CASE("seeded mutation corpus is fully detected") {
    const auto sc = load_scenario(case_dir / "scenario.json");
    const auto p = load_process(case_dir / "lab.proc");
    const auto mutants = mutation::corpus(sc, p, 10);
    REQUIRE(mutants.size() == 30);
    for (const auto& m : mutants) {
        INFO(m.label);
        const auto issues = mutation::diagnose(m);
        CHECK(!issues.empty());
        for (const auto& i : issues) {
            INFO(i.path << " " << i.message);
            CHECK(mutation::attributable(i, m));
        }
    }
}
