#include <doctest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "dtwin/error.hpp"
#include "dtwin/player.hpp"

using namespace dtwin;

namespace {

const std::filesystem::path case_dir = std::filesystem::path(DTWIN_FIXTURE_DIR) / "case_study";

Session case_session() {
    return Session::create(load_scenario(case_dir / "scenario.json"), load_process(case_dir / "lab.proc"));
}

json run_case_script() {
    auto s = case_session();
    std::ifstream in(case_dir / "script.jsonl");
    run_script(s, in);
    return s.progress_report();
}

}  // namespace

TEST_CASE("fresh session") {
    auto s = case_session();
    CHECK(s.current() == std::optional<std::string>("1.1"));
    CHECK(s.clock() == 0.0);
    const auto r = s.progress_report();
    CHECK(r["completed"].empty());
    CHECK(r["pending"][0] == "1.1");
    CHECK(r["interactions"]["source.power"]["state"] == "off");
    CHECK(r["interactions"]["connect1.end_a"]["connected_to"].is_null());
    CHECK(r["interactions"]["motor.spin"]["angle_deg"] == 0.0);
}

TEST_CASE("session refuses to start with outstanding issues") {
    auto sc = load_scenario(case_dir / "scenario.json");
    auto text = print_process(load_process(case_dir / "lab.proc"));
    text.replace(text.find("TARGET voltmeter"), 16, "TARGET Voltmeter2");
    try {
        Session::create(sc, parse_process(text));
        FAIL("expected SessionError");
    } catch (const SessionError& e) {
        REQUIRE(e.issues().size() == 1);
        CHECK(std::string(e.what()).find("Voltmeter2") != std::string::npos);
    }
    auto empty = Session::create(sc, parse_process(""));
    CHECK(empty.done());
}

TEST_CASE("events advance only the current instruction") {
    auto s = case_session();
    s.apply(UserEvent::set_state("source.power", "on"));  // belongs to a later step
    CHECK(s.current() == std::optional<std::string>("1.1"));
    CHECK(s.progress_report()["interactions"]["source.power"]["state"] == "on");
    CHECK_THROWS_AS(s.apply(UserEvent::set_state("source.power", "medium")), ValidationError);
    CHECK_THROWS_AS(s.apply(UserEvent::set_state("source.nothing", "on")), ValidationError);

    s.apply(UserEvent::connect("connect1.end_a", "source.pos"));
    CHECK(s.current() == std::optional<std::string>("1.1"));
    s.apply(UserEvent::connect("ammeter.pos", "connect1.end_b"));  // peer stored on both sides
    CHECK(s.current() == std::optional<std::string>("1.2"));
    CHECK(s.progress_report()["interactions"]["ammeter.pos"]["connected_to"] == "connect1.end_b");
    CHECK(s.completed().count("1.1"));
}

TEST_CASE("pre-satisfied steps complete on entry and are flagged") {
    auto s = case_session();
    s.apply(UserEvent::set_state("source.power", "on"));
    const char* wires[][3] = {{"connect1", "source.pos", "ammeter.pos"},   {"connect2", "ammeter.neg", "motor.pos"},
                              {"connect3", "motor.neg", "source.neg"},     {"connect4", "voltmeter.pos", "motor.sense_pos"},
                              {"connect5", "voltmeter.neg", "motor.sense_neg"}, {"connect6", "source.earth", "bench.earth"}};
    for (const auto& w : wires) {
        s.apply(UserEvent::connect(std::string(w[0]) + ".end_a", w[1]));
        s.apply(UserEvent::connect(std::string(w[0]) + ".end_b", w[2]));
    }
    CHECK(s.current() == std::optional<std::string>("2.2"));
    const auto& c = s.completions();
    const auto it = std::find_if(c.begin(), c.end(), [](const Completion& x) { return x.id == "2.1"; });
    REQUIRE(it != c.end());
    CHECK(it->pre_satisfied);
    CHECK(!c.front().pre_satisfied);
}

TEST_CASE("incompatible connectors are refused") {
    auto sc = load_scenario(case_dir / "scenario.json");
    add_interaction(sc, "bench", {"bnc", "", InteractionType::snap_connector, {}, {{"tags", {"bnc"}}}, {}});
    auto s = Session::create(sc, load_process(case_dir / "lab.proc"));
    CHECK_THROWS_WITH_AS(s.apply(UserEvent::connect("connect1.end_a", "bench.bnc")), doctest::Contains("incompatible"),
                         ValidationError);
    CHECK_THROWS_AS(s.apply(UserEvent::connect("connect1.end_a", "source.power")), ValidationError);
    // reconnecting releases the old peer
    s.apply(UserEvent::connect("connect1.end_a", "source.pos"));
    s.apply(UserEvent::connect("connect1.end_a", "source.neg"));
    const auto r = s.progress_report();
    CHECK(r["interactions"]["source.pos"]["connected_to"].is_null());
    CHECK(r["interactions"]["source.neg"]["connected_to"] == "connect1.end_a");
}

TEST_CASE("rotation and waits") {
    auto sc = load_scenario(case_dir / "scenario.json");
    add_interaction(sc, "motor", {"fan", "", InteractionType::rotation, {}, {{"axis", {0, 0, 1}}, {"speed_deg_s", 90}}, {}});
    const auto proc = parse_process("INSTRUCTION w \"wait ten seconds\"\n  COMPLETE AFTER 10 SECONDS\n");
    auto s = Session::create(sc, proc);
    s.tick(1.0);
    CHECK(s.states().at("motor.fan").angle == 90.0);
    CHECK(s.states().at("motor.spin").angle == 45.0);  // speed sampled after the 5 V slot lands
    CHECK(!s.done());
    auto s2 = Session::create(sc, proc);
    s2.tick(10.0);
    CHECK(s2.done());
    CHECK_THROWS_AS(s2.tick(0.0), ValidationError);

    auto quiet = sc;
    quiet.sources.clear();
    auto s3 = Session::create(quiet, proc);
    s3.tick(3.0);
    CHECK(s3.states().at("motor.spin").angle == 0.0);  // no speed data
    CHECK(s3.states().at("motor.fan").angle == 270.0);
}

TEST_CASE("case study playthrough") {
    const auto r = run_case_script();
    CHECK(r["done"] == true);
    CHECK(r["pending"].empty());
    REQUIRE(r["readings"].size() == 8);
    for (int k = 0; k < 8; ++k) {
        const double v = 5.0 * (k + 1);
        CHECK(r["readings"][k]["values"]["supply_voltage"] == v);
        CHECK(r["readings"][k]["values"]["current"] == v / 2.0);
    }
    CHECK(r["interactions"]["bench.sweep_plot"]["display"]["series"][0]["points"].size() == 8);
    CHECK(r["interactions"]["ammeter.readout"]["display"]["display"] == "20 A");
    CHECK(r["interactions"]["motor.spin"]["angle_deg"] == 180.0);  // 18 * (2.5 + ... + 20) = 1620 deg
    CHECK(r["completed"].size() == 12);
    CHECK(run_case_script() == r);  // replay determinism
}

TEST_CASE("script and event errors") {
    auto s = case_session();
    std::stringstream back("{\"at\": 2}\n{\"at\": 1}\n");
    CHECK_THROWS_WITH_AS(run_script(s, back), doctest::Contains("backwards"), ValidationError);
    std::stringstream junk("{\"at\": 3, \"event\": {\"kind\": \"dance\"}}\n");
    CHECK_THROWS_WITH_AS(run_script(s, junk), doctest::Contains("dance"), ValidationError);
    std::stringstream bad("not json\n");
    CHECK_THROWS_AS(run_script(s, bad), ParseError);
    const auto e = UserEvent::connect("a.b", "c.d");
    const auto back2 = event_from_json(event_to_json(e));
    CHECK(back2.kind == e.kind);
    CHECK(back2.value == "c.d");
}

TEST_CASE("events posted from another thread are applied on the next tick") {
    auto s = case_session();
    std::thread t([&] { s.post(UserEvent::connect("connect1.end_a", "source.pos")); });
    t.join();
    s.post(UserEvent::connect("connect1.end_b", "ammeter.pos"));
    CHECK(s.current() == std::optional<std::string>("1.1"));
    s.tick(0.5);
    CHECK(s.current() == std::optional<std::string>("1.2"));
}
