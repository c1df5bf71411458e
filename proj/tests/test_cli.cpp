#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "droope.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("droope_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Outcome run(const std::string& args) const {
        const fs::path out = dir_ / "stdout.txt";
        const fs::path err = dir_ / "stderr.txt";
        const std::string cmd = std::string("\"") + DROOPE_CLI_PATH + "\" " + args + " >\"" + out.string() +
                                "\" 2>\"" + err.string() + "\"";
        const int status = std::system(cmd.c_str());
        Outcome r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, ReportTableIMatchesLibrary) {
    const Outcome r = run("report --tables I --out \"" + dir_.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    std::ostringstream expected;
    droope::write_headroom_markdown(expected, droope::reference_headroom_table());
    EXPECT_EQ(slurp(dir_ / "table_I.md"), expected.str());
    std::ostringstream csv;
    droope::write_headroom_csv(csv, droope::reference_headroom_table());
    EXPECT_EQ(slurp(dir_ / "table_I.csv"), csv.str());
}

TEST_F(Cli, SimulateWritesTraceAndStats) {
    const Outcome r = run("simulate 3bus-caseC --t-end 4 --out \"" + dir_.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("nadir_hz="), std::string::npos);
    const auto stats = nlohmann::json::parse(slurp(dir_ / "3bus-caseC_stats.json"));
    EXPECT_TRUE(stats["stats"]["nadir_hz"].is_number());
    EXPECT_TRUE(stats["stats"]["peak_rocof_hz_s"].is_number());
    EXPECT_LT(stats["stats"]["nadir_hz"].get<double>(), 60.0);
    const std::string trace = slurp(dir_ / "3bus-caseC_trace.csv");
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4002);
}

TEST_F(Cli, EigSweepCoversTheGrid) {
    const Outcome r = run("eig-sweep 3bus-caseA --from 0.01 --to 0.99 --step 0.01 --jobs 2 --out \"" + dir_.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(dir_ / "3bus-caseA_modes.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("p_set,mode,re,im", 0), 0u);
    std::set<std::string> dispatches;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        dispatches.insert(line.substr(0, line.find(',')));
        ++rows;
    }
    EXPECT_GE(dispatches.size(), 99u);
    EXPECT_EQ(rows, 99u * 11u);
}

TEST_F(Cli, DroopCurveHasSheddingColumn) {
    const Outcome r = run("droop-curve --pset 0.2,0.73 --out \"" + dir_.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir_ / "droop_curve.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "p_set,p,f_droop_e_hz,f_static_hz,ufls_hz");
    EXPECT_NE(csv.find("0.2,0.2,60,60,59\n"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 101);
}

TEST_F(Cli, OutputIsDeterministic) {
    const fs::path a = dir_ / "a";
    const fs::path b = dir_ / "b";
    ASSERT_EQ(run("simulate 3bus-caseB --t-end 2 --out \"" + a.string() + "\"").code, 0);
    ASSERT_EQ(run("simulate 3bus-caseB --t-end 2 --out \"" + b.string() + "\"").code, 0);
    EXPECT_EQ(slurp(a / "3bus-caseB_trace.csv"), slurp(b / "3bus-caseB_trace.csv"));
    EXPECT_EQ(slurp(a / "3bus-caseB_stats.json"), slurp(b / "3bus-caseB_stats.json"));
}

TEST_F(Cli, DumpedScenarioRunsFromFile) {
    const Outcome dump = run("dump-scenario 3bus-caseA --out \"" + dir_.string() + "\"");
    ASSERT_EQ(dump.code, 0) << dump.err;
    const fs::path file = dir_ / "3bus-caseA.json";
    EXPECT_TRUE(droope::load_scenario_file(file.string()) == droope::builtin_scenario("3bus-caseA"));
    const Outcome pf = run("powerflow \"" + file.string() + "\"");
    ASSERT_EQ(pf.code, 0) << pf.err;
    EXPECT_NE(pf.out.find("bus,v_pu,theta_rad\n1,1.02,0\n"), std::string::npos) << pf.out;
}

TEST_F(Cli, InputErrorsExitTwoWithJson) {
    for (const std::string args : {"simulate no-such-scenario", "report --tables IX", "simulate", "bogus-command",
                                   "droop-curve --pset 0.2,abc"}) {
        const Outcome r = run(args);
        EXPECT_EQ(r.code, 2) << args;
        const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
        EXPECT_EQ(j["error"]["kind"], "input") << args;
        EXPECT_EQ(j["error"]["exit_code"], 2) << args;
    }
}

TEST_F(Cli, NumericErrorsExitThree) {
    droope::Scenario s = droope::builtin_scenario("3bus-caseA");
    s.network.loads[0].p = 40.0;
    const fs::path file = dir_ / "heavy.json";
    std::ofstream(file) << droope::serialize_scenario(s);
    const Outcome r = run("powerflow \"" + file.string() + "\"");
    EXPECT_EQ(r.code, 3);
    const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
    EXPECT_EQ(j["error"]["kind"], "numeric");
}
