#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dtwin/error.hpp"
#include "dtwin/scenario.hpp"
#include "tmpdir.hpp"

using namespace dtwin;

namespace {

const std::filesystem::path case_dir = std::filesystem::path(DTWIN_FIXTURE_DIR) / "case_study";

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_code(const std::vector<Issue>& v, const std::string& code) {
    return std::any_of(v.begin(), v.end(), [&](const Issue& i) { return i.code == code; });
}

}  // namespace

TEST_CASE("case study scenario loads with every instance") {
    const auto sc = load_scenario(case_dir / "scenario.json");
    CHECK(sc.instances.size() == 11);
    int cables = 0;
    for (const auto& i : sc.instances) cables += i.model == "models/cable/model.json";
    CHECK(cables == 6);
    for (const char* id : {"bench", "source", "motor", "ammeter", "voltmeter"}) CHECK(sc.find_instance(id));
    CHECK(sc.models.size() == 6);  // the six cables share one manifest
    CHECK(validate_scenario(sc).empty());
    CHECK(sc.find_interaction("source.power")->states() == std::vector<std::string>{"off", "on"});
    CHECK(sc.channel_names() == std::set<std::string>{"current", "motor_speed", "supply_voltage"});
}

TEST_CASE("scenario save and load round trip") {
    const auto sc = load_scenario(case_dir / "scenario.json");
    TempDir dir;
    std::filesystem::copy(case_dir, dir.path(), std::filesystem::copy_options::recursive);
    const auto before = slurp(dir.path() / "models/motor/meshes/body.obj");
    save_scenario(sc, dir.path() / "scenario.json");
    const auto back = load_scenario(dir.path() / "scenario.json");
    CHECK(scenario_to_json(back) == scenario_to_json(sc));
    CHECK(back.instances == sc.instances);
    CHECK(slurp(dir.path() / "models/motor/meshes/body.obj") == before);

    // transforms survive to full precision
    Scenario s2 = back;
    s2.base_dir = dir.path();
    auto& inst = instantiate_model(s2, "models/cable/model.json", "spare", {{0.1234567890123, -2.5e-7, 3}, {10, 20, 30}, {1, 2, 0.5}});
    CHECK(inst.transform.position.x == 0.1234567890123);
    save_scenario(s2, dir.path() / "s2.json");
    const auto s3 = load_scenario(dir.path() / "s2.json");
    CHECK(s3.find_instance("spare")->transform == s2.find_instance("spare")->transform);
    CHECK(s3.models.size() == 6);
}

TEST_CASE("missing manifest is an unresolved model link naming the instance") {
    TempDir dir;
    std::filesystem::copy(case_dir, dir.path(), std::filesystem::copy_options::recursive);
    auto j = read_json_file(dir.path() / "scenario.json");
    j["instances"][2]["model"] = "models/nowhere/model.json";
    write_json_file(dir.path() / "scenario.json", j);
    CHECK_THROWS_WITH_AS(load_scenario(dir.path() / "scenario.json"),
                         doctest::Contains("unresolved model link for instance 'motor'"), ValidationError);
}

TEST_CASE("schema violations") {
    CHECK_THROWS_AS(scenario_from_json(json::array()), ValidationError);
    CHECK_THROWS_AS(scenario_from_json(json{{"schema_version", 2}, {"instances", json::array()}}), ValidationError);
    CHECK_THROWS_AS(scenario_from_json(json{{"schema_version", 1}}), ValidationError);
    json bad_type = {{"schema_version", 1},
                     {"instances", {{{"id", "a"}, {"model", "m.json"}, {"interactions", {{{"id", "x"}, {"type", "lever"}}}}}}}};
    CHECK_THROWS_WITH_AS(scenario_from_json(bad_type), doctest::Contains("lever"), ValidationError);
    json bad_schedule = {{"schema_version", 1},
                         {"instances", json::array()},
                         {"data", {{"sources", {{{"kind", "time_series_csv"}, {"path", "x.csv"}, {"value_columns", {"v"}}, {"schedule", 0}}}}}}};
    CHECK_THROWS_AS(scenario_from_json(bad_schedule), ValidationError);
}

TEST_CASE("instantiate and add interactions") {
    auto sc = load_scenario(case_dir / "scenario.json");
    const auto links_before = sc.models.size();
    instantiate_model(sc, "models/cable/model.json", "connect7");
    instantiate_model(sc, "models/cable/model.json", "connect8");
    CHECK(sc.models.size() == links_before);
    CHECK(sc.find_instance("connect7")->model == sc.find_instance("connect8")->model);
    CHECK_THROWS_WITH_AS(instantiate_model(sc, "models/cable/model.json", "connect7"), doctest::Contains("duplicate"),
                         ValidationError);

    Interaction dial{"range", "", InteractionType::dial, {}, {{"states", {"off", "on"}}}, {}};
    CHECK_NOTHROW(add_interaction(sc, "source", dial));
    Interaction one{"single", "", InteractionType::dial, {}, {{"states", {"off"}}}, {}};
    CHECK_THROWS_WITH_AS(add_interaction(sc, "source", one), doctest::Contains("at least 2"), ValidationError);
    Interaction stateless{"bare", "", InteractionType::dial, {}, json::object(), {}};
    CHECK_THROWS_WITH_AS(add_interaction(sc, "source", stateless), doctest::Contains("states"), ValidationError);
    Interaction rot{"spin2", "", InteractionType::rotation, {}, {{"axis", {0, 0, 1}}}, {"motor_speed"}};
    CHECK_NOTHROW(add_interaction(sc, "motor/shaft", rot));
    CHECK(sc.find_interaction("motor.spin2")->part == "shaft");
    CHECK_THROWS_WITH_AS(add_interaction(sc, "motor/flywheel", rot), doctest::Contains("unknown owner"), ValidationError);
    CHECK_THROWS_WITH_AS(add_interaction(sc, "generator", rot), doctest::Contains("unknown owner"), ValidationError);
    CHECK_THROWS_AS(add_interaction(sc, "source", dial), ValidationError);  // duplicate id
    Interaction skew{"skew", "", InteractionType::rotation, {}, {{"axis", {1, 1, 0}}, {"speed_deg_s", 10}}, {}};
    CHECK_THROWS_WITH_AS(add_interaction(sc, "motor", skew), doctest::Contains("unit"), ValidationError);
    CHECK(validate_scenario(sc).empty());
}

TEST_CASE("parameter completeness per type") {
    auto problems = [](InteractionType t, json p, std::vector<std::string> b = {}) {
        return interaction_parameter_problems({"x", "", t, {}, std::move(p), std::move(b)}, "p").size();
    };
    CHECK(problems(InteractionType::button, {{"states", {"up"}}}) == 0);
    CHECK(problems(InteractionType::button, json::object()) == 1);
    CHECK(problems(InteractionType::dial, {{"states", {"a", "a"}}}) == 1);
    CHECK(problems(InteractionType::snap_connector, {{"tags", json::array()}}) == 1);
    CHECK(problems(InteractionType::snap_connector, {{"tags", {"t"}}}) == 0);
    CHECK(problems(InteractionType::text_display, json::object()) == 1);
    CHECK(problems(InteractionType::dynamic_text_display, json::object()) == 1);
    CHECK(problems(InteractionType::dynamic_text_display, json::object(), {"v"}) == 0);
    CHECK(problems(InteractionType::image_display, {{"path", "a.png"}}) == 0);
    CHECK(problems(InteractionType::graph_display, {{"graph_kind", "pie"}}, {"v"}) == 1);
    CHECK(problems(InteractionType::rotation, {{"axis", {0, 0, 1}}, {"speed_deg_s", 90}}) == 0);
    CHECK(problems(InteractionType::rotation, {{"axis", {0, 0, 1}}}) == 1);
    CHECK(problems(InteractionType::rotation, {{"axis", {0, 0, 1}}, {"speed_deg_s", 90}}, {"v"}) == 1);
}

TEST_CASE("validation diagnostics") {
    const auto base = load_scenario(case_dir / "scenario.json");
    {
        auto sc = base;
        sc.find_instance("motor")->part_overrides["flywheel"] = Transform{};
        const auto issues = validate_scenario(sc);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].code == "unknown_part");
        CHECK(issues[0].path == "instances/motor/part_overrides/flywheel");
    }
    {
        auto sc = base;
        auto& list = sc.find_instance("source")->interactions;
        list.push_back(list.front());
        const auto issues = validate_scenario(sc);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].code == "duplicate_id");
    }
    {
        auto sc = base;
        sc.find_instance("ammeter")->interactions.back().data_bindings = {"amps"};
        CHECK(has_code(validate_scenario(sc), "unknown_channel"));
    }
    {
        auto sc = base;
        sc.derived.push_back({"a", "b + 1", ""});
        sc.derived.push_back({"b", "a + 1", ""});
        CHECK(has_code(validate_scenario(sc), "cycle"));
    }
    {
        auto sc = base;
        sc.models.erase("models/cable/model.json");
        const auto issues = validate_scenario(sc);
        CHECK(issues.size() == 6);
        CHECK(has_code(issues, "unresolved_link"));
    }
    {
        auto sc = base;
        std::get<TimeSeriesSpec>(sc.sources[0].spec).path = "data/missing.csv";
        CHECK(has_code(validate_scenario(sc), "unresolved_link"));
    }
}

TEST_CASE("snap compatibility is tag intersection") {
    Interaction a{"a", "", InteractionType::snap_connector, {}, {{"tags", {"banana", "4mm"}}}, {}};
    Interaction b{"b", "", InteractionType::snap_connector, {}, {{"tags", {"4mm"}}}, {}};
    Interaction c{"c", "", InteractionType::snap_connector, {}, {{"tags", {"bnc"}}}, {}};
    CHECK(snap_compatible(a, b));
    CHECK(!snap_compatible(a, c));
    CHECK(!snap_compatible(a, Interaction{}));
}

TEST_CASE("engine configured from the scenario") {
    const auto sc = load_scenario(case_dir / "scenario.json");
    DataEngine eng;
    configure_engine(sc, eng);
    CHECK(eng.derived_order() == std::vector<std::string>{"current", "motor_speed"});
    CHECK(eng.displays().size() == 7);
    for (int t = 0; t <= 8; ++t) eng.tick(t);
    CHECK(*eng.channel("current").value == 20.0);
    CHECK(*eng.channel("motor_speed").value == 360.0);
    CHECK(eng.channel("supply_voltage").unit == "V");
}
