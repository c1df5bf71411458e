#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "droope.hpp"

using namespace droope;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.what();
    }
    return {};
}

Json minimal() {
    return Json::parse(R"({
        "name": "tiny",
        "buses": [{"id": 1, "kind": "slack", "v_set": 1.0}, {"id": 2, "kind": "pq"}],
        "branches": [{"from": 1, "to": 2, "x": 0.1}],
        "loads": [{"bus": 2, "p": 0.2, "q": 0.05}],
        "devices": [{"name": "g", "bus": 1, "kind": "sg", "p_dispatch": 0.2}]
    })");
}

}  // namespace

TEST(Scenario, RoundTripOfEveryBuiltin) {
    for (const auto& name : builtin_scenario_names()) {
        const Scenario s = builtin_scenario(name);
        const std::string text = serialize_scenario(s);
        const Scenario back = parse_scenario(text);
        EXPECT_TRUE(back == s) << name;
        EXPECT_EQ(serialize_scenario(back), text) << name;
    }
}

TEST(Scenario, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "droope_roundtrip.json";
    const Scenario s = builtin_scenario("9bus-caseC");
    {
        std::ofstream os(path);
        os << serialize_scenario(s);
    }
    EXPECT_TRUE(load_scenario_file(path.string()) == s);
    EXPECT_TRUE(resolve_scenario(path.string()) == s);
    std::filesystem::remove(path);
    EXPECT_THROW(load_scenario_file(path.string()), ScenarioError);
}

TEST(Scenario, DefaultsAreFilledIn) {
    const Scenario s = scenario_from_json(minimal());
    EXPECT_EQ(s.sim.dt, 1e-3);
    EXPECT_EQ(s.sim.rocof_window, 0.1);
    EXPECT_EQ(s.devices[0].sg.h, 3.01);
    EXPECT_EQ(s.devices[0].sg.t_sv, 0.2);
    EXPECT_EQ(s.network.bases.system_mva, 100.0);
    EXPECT_TRUE(s.events.empty());
    const Json echoed = scenario_to_json(s);
    EXPECT_EQ(echoed["devices"][0]["sg"]["t_ch"], 0.3);
    EXPECT_EQ(echoed["sim"]["t_end"], 20.0);
}

TEST(Scenario, EmptyEventListRunsSteady) {
    Json j = minimal();
    j["events"] = Json::array();
    j["sim"] = {{"t_end", 0.5}};
    const Scenario s = scenario_from_json(j);
    const SimulationTrace trace = run_case(s);
    const auto& f = trace.devices[0].f_hz;
    EXPECT_NEAR(*std::min_element(f.begin(), f.end()), kNominalHz, 1e-9);
    EXPECT_NEAR(*std::max_element(f.begin(), f.end()), kNominalHz, 1e-9);
}

TEST(Scenario, UnknownKeysAreRejectedWithPath) {
    Json j = minimal();
    j["devices"][0]["sg"] = {{"h", 3.0}, {"inertia", 2.0}};
    EXPECT_NE(error_of(j.dump()).find("devices[0].sg.inertia: unknown key"), std::string::npos) << error_of(j.dump());

    j = minimal();
    j["frobnicate"] = true;
    EXPECT_NE(error_of(j.dump()).find("frobnicate: unknown key"), std::string::npos);

    j = minimal();
    j["devices"][0]["gfm"] = {{"x", 0.15}};
    EXPECT_NE(error_of(j.dump()).find("devices[0].gfm"), std::string::npos);
}

TEST(Scenario, MissingAndMistypedFields) {
    Json j = minimal();
    j.erase("buses");
    EXPECT_NE(error_of(j.dump()).find("buses: missing required field"), std::string::npos);

    j = minimal();
    j["branches"][0].erase("x");
    EXPECT_NE(error_of(j.dump()).find("branches[0].x: missing required field"), std::string::npos);

    j = minimal();
    j["loads"][0]["p"] = "lots";
    EXPECT_NE(error_of(j.dump()).find("loads[0].p: expected a number"), std::string::npos);

    j = minimal();
    j["buses"][1]["kind"] = "swing";
    EXPECT_NE(error_of(j.dump()).find("buses[1].kind"), std::string::npos);
}

TEST(Scenario, SemanticChecks) {
    Json j = minimal();
    j["devices"][0]["bus"] = 7;
    EXPECT_FALSE(error_of(j.dump()).empty());

    j = minimal();
    j["devices"][0]["bus"] = 2;  // pq bus
    EXPECT_NE(error_of(j.dump()).find("no voltage setpoint"), std::string::npos);

    j = minimal();
    j["events"] = Json::array({{{"kind", "load_step"}, {"t", 1.0}, {"bus", 9}}});
    EXPECT_NE(error_of(j.dump()).find("events[0].bus"), std::string::npos);

    j = minimal();
    j["events"] = Json::array({{{"kind", "trip"}, {"t", 1.0}, {"bus", 2}}});
    EXPECT_NE(error_of(j.dump()).find("events[0].kind"), std::string::npos);

    j = minimal();
    j["devices"][0]["sg"] = {{"h", -1.0}};
    EXPECT_NE(error_of(j.dump()).find("devices[0]"), std::string::npos);
}

TEST(Scenario, MalformedJsonIsLocated) {
    const std::string msg = error_of("{\n  \"name\": \"x\",\n  \"buses\": [\n}");
    EXPECT_NE(msg.find("malformed scenario"), std::string::npos);
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}

TEST(Scenario, UnlimitedExciterCeilingRoundTrips) {
    Json j = minimal();
    j["devices"][0]["sg"] = {{"vr_max", "inf"}};
    EXPECT_TRUE(std::isinf(scenario_from_json(j).devices[0].sg.vr_max));
    j["devices"][0]["sg"] = {{"vr_max", 4.5}};
    EXPECT_EQ(scenario_from_json(j).devices[0].sg.vr_max, 4.5);
}

TEST(Builtins, ThreeBusCaseA) {
    const Scenario s = builtin_scenario("3bus-caseA");
    ASSERT_EQ(s.devices.size(), 2u);
    EXPECT_EQ(s.devices[0].kind, DeviceKind::sg);
    EXPECT_EQ(s.devices[0].p_dispatch, 0.73);
    EXPECT_EQ(s.devices[1].kind, DeviceKind::gfm_droop_e);
    EXPECT_EQ(s.devices[1].p_dispatch, 0.05);
    EXPECT_EQ(s.devices[1].gfm.x, 0.15);
    EXPECT_EQ(s.devices[1].gfm.r, 0.005);
}

TEST(Builtins, NineBusCaseC) {
    const Scenario s = builtin_scenario("9bus-caseC");
    ASSERT_EQ(s.devices.size(), 3u);
    EXPECT_EQ(s.devices[0].kind, DeviceKind::gfm_droop_e);
    EXPECT_EQ(s.devices[1].kind, DeviceKind::sg);
    EXPECT_EQ(s.devices[2].kind, DeviceKind::gfm_droop_e);
    const double mw[3] = {71.5, 163.0, 85.0};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(s.devices[i].rating_mva(), 200.0);
        EXPECT_NEAR(s.devices[i].p_dispatch * s.devices[i].rating_mva(), mw[i], 1e-12);
    }
    EXPECT_TRUE(s.devices[0].sharing.has_value());
}

TEST(Builtins, UnknownNameIsAnError) {
    EXPECT_THROW(builtin_scenario("3bus-caseD"), ScenarioError);
    EXPECT_THROW(resolve_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST(Builtins, TraceCsvIsDeterministic) {
    Scenario s = builtin_scenario("3bus-caseB");
    s.sim.t_end = 2.0;
    std::ostringstream a, b;
    write_trace_csv(a, run_case(s));
    write_trace_csv(b, run_case(s));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().find('\r'), std::string::npos);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
              "t,dev_sg1_f_hz,dev_sg1_p_pu_dev,dev_sg1_p_pu_sys,dev_gfm3_f_hz,dev_gfm3_p_pu_dev,dev_gfm3_p_pu_sys,"
              "bus_1_v,bus_1_theta,bus_2_v,bus_2_theta,bus_3_v,bus_3_theta");
}
