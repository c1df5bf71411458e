// Batch front end: power flow, load-step simulation, dispatch eigen-sweeps,
// droop curves and the comparison tables.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "droope.hpp"

namespace fs = std::filesystem;
using namespace droope;

namespace {

// DROOPE_LOG: "quiet" (default), "info" or "debug".
int log_level() {
    static const int level = [] {
        const char* v = std::getenv("DROOPE_LOG");
        if (!v) return 0;
        const std::string s(v);
        if (s == "debug") return 2;
        if (s == "info") return 1;
        return 0;
    }();
    return level;
}

void log(int level, const std::string& msg) {
    if (log_level() >= level) std::cerr << "[droope] " << msg << '\n';
}

struct Common {
    std::string scenario;
    std::string out = ".";
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<double> rocof_window;
    unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scenario) {
    auto* opt = cmd->add_option("--scenario,scenario", c.scenario, "built-in name or JSON path");
    if (needs_scenario) opt->required();
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--dt", c.dt, "integration step, s");
    cmd->add_option("--t-end", c.t_end, "simulation end time, s");
    cmd->add_option("--rocof-window", c.rocof_window, "ROCOF window, s");
    cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

Scenario load(const Common& c) {
    Scenario s = resolve_scenario(c.scenario);
    if (c.dt) s.sim.dt = *c.dt;
    if (c.t_end) s.sim.t_end = *c.t_end;
    if (c.rocof_window) s.sim.rocof_window = *c.rocof_window;
    s.validate();
    log(1, "scenario " + s.name);
    return s;
}

fs::path out_file(const Common& c, const std::string& name) {
    fs::create_directories(c.out);
    return fs::path(c.out) / name;
}

// Single writer per file; LF endings regardless of platform.
void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os << content;
    log(1, "wrote " + path.string());
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ArgumentError("not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ArgumentError("empty list");
    return out;
}

nlohmann::ordered_json stats_json(const FrequencyStats& st) {
    return {{"source", st.source},         {"nadir_hz", st.nadir},       {"nadir_time_s", st.nadir_time},
            {"peak_rocof_hz_s", st.peak_rocof}, {"rocof_window_s", st.window}, {"settling_hz", st.settling},
            {"settled", st.settled}};
}

void cmd_powerflow(const Common& c) {
    const Scenario s = load(c);
    const auto pf = solve_power_flow(s.network, device_dispatch(s.devices, s.network.bases.system_mva));
    std::ostringstream os;
    os << "bus,v_pu,theta_rad\n";
    for (std::size_t k = 0; k < s.network.size(); ++k)
        os << s.network.buses[k].id << ',' << format_double(pf.v(static_cast<Eigen::Index>(k))) << ','
           << format_double(pf.theta(static_cast<Eigen::Index>(k))) << '\n';
    os << "device,bus,p_sys,q_sys,p_dev,q_dev\n";
    for (std::size_t i = 0; i < s.devices.size(); ++i) {
        const auto& d = s.devices[i];
        const Complex sys = pf.injections[i];
        const double scale = s.network.bases.system_mva / d.rating_mva();
        os << d.name << ',' << d.bus << ',' << format_double(sys.real()) << ',' << format_double(sys.imag()) << ','
           << format_double(sys.real() * scale) << ',' << format_double(sys.imag() * scale) << '\n';
    }
    std::cout << os.str();
    if (c.out != ".") write_file(out_file(c, s.name + "_powerflow.csv"), os.str());
}

void cmd_simulate(const Common& c) {
    const Scenario s = load(c);
    const auto t0 = std::chrono::steady_clock::now();
    const SimulationTrace trace = run_case(s);
    log(1, "simulated " + std::to_string(s.sim.t_end) + " s in " +
               std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_file(out_file(c, s.name + "_trace.csv"), csv.str());
    const CaseRow row = summarize_case(s, trace);
    nlohmann::ordered_json j;
    j["scenario"] = s.name;
    j["stats"] = stats_json(row.stats);
    j["inertia_s"] = row.inertia;
    for (std::size_t i = 0; i < row.devices.size(); ++i)
        j["devices"].push_back({{"name", row.devices[i]}, {"p_initial", row.p_initial[i]}, {"p_final", row.p_final[i]}});
    for (const auto& e : trace.events)
        j["events"].push_back({{"t", e.t}, {"kind", to_string(e.kind)}, {"device", e.device}});
    j["max_power_balance_pu"] = row.max_power_balance;
    write_file(out_file(c, s.name + "_stats.json"), j.dump(2) + "\n");
    std::cout << s.name << " nadir_hz=" << format_double(row.stats.nadir)
              << " peak_rocof_hz_s=" << format_double(row.stats.peak_rocof)
              << " settling_hz=" << format_double(row.stats.settling) << '\n';
}

void cmd_sweep(const Common& c, double from, double to, double step) {
    const Scenario s = load(c);
    const auto grid = dispatch_grid(from, to, step);
    const SweepResult sweep = dispatch_sweep(s.network, s.devices, s.swept_device(), s.reference_device(), grid, c.jobs);
    std::size_t failed = 0;
    for (const auto& p : sweep.points)
        if (!p.ok) {
            ++failed;
            log(1, "dispatch " + format_double(p.p_set) + " failed: " + p.failure);
        }
    std::ostringstream csv;
    write_modal_csv(csv, sweep);
    write_file(out_file(c, s.name + "_modes.csv"), csv.str());
    std::cout << s.name << " sweep points=" << grid.size() << " failed=" << failed << '\n';
}

void cmd_droop_curve(const Common& c, const std::string& pset) {
    std::ostringstream csv;
    write_droop_curve_csv(csv, parse_list(pset));
    write_file(out_file(c, "droop_curve.csv"), csv.str());
}

void cmd_report(const Common& c, const std::string& tables) {
    std::stringstream ss(tables);
    std::string t;
    while (std::getline(ss, t, ',')) {
        std::ostringstream md;
        std::ostringstream csv;
        if (t == "I") {
            const auto rows = reference_headroom_table();
            write_headroom_markdown(md, rows);
            write_headroom_csv(csv, rows);
        } else if (t == "V" || t == "VII") {
            const std::vector<std::string> names =
                t == "V" ? std::vector<std::string>{"3bus-caseA", "3bus-caseB", "3bus-caseC"}
                         : std::vector<std::string>{"9bus-caseA", "9bus-caseB", "9bus-caseC"};
            std::vector<CaseRow> rows(names.size());
            std::vector<std::thread> workers;
            std::vector<std::string> errors(names.size());
            auto work = [&](std::size_t i) {
                try {
                    Common local = c;
                    local.scenario = names[i];
                    const Scenario s = load(local);
                    rows[i] = summarize_case(s, run_case(s));
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            };
            if (c.jobs > 1) {
                for (std::size_t i = 0; i < names.size(); ++i) workers.emplace_back(work, i);
                for (auto& w : workers) w.join();
            } else {
                for (std::size_t i = 0; i < names.size(); ++i) work(i);
            }
            for (const auto& e : errors)
                if (!e.empty()) throw NumericError(e);
            if (t == "V") write_case_table_markdown(md, rows);
            else write_inertia_table_markdown(md, rows);
            write_case_csv(csv, rows);
        } else {
            throw ArgumentError("unknown table '" + t + "' (expected I, V or VII)");
        }
        std::cout << "Table " << t << "\n" << md.str() << '\n';
        write_file(out_file(c, "table_" + t + ".md"), md.str());
        write_file(out_file(c, "table_" + t + ".csv"), csv.str());
    }
}

void cmd_dump(const Common& c) {
    const Scenario s = resolve_scenario(c.scenario);
    const std::string text = serialize_scenario(s);
    if (c.out == ".") std::cout << text;
    else write_file(out_file(c, s.name + ".json"), text);
}

int fail(const char* kind, const std::string& message, int code) {
    nlohmann::ordered_json j;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Droop-e grid-forming inverter studies"};
    app.require_subcommand(1);
    Common c;
    double from = 0.01, to = 0.99, step = 0.01;
    std::string pset = "0.2,0.73";
    std::string tables = "I,V,VII";

    auto* pf = app.add_subcommand("powerflow", "solve the scenario power flow");
    add_common(pf, c, true);
    auto* sim = app.add_subcommand("simulate", "run the scenario events and write trace CSV and statistics");
    add_common(sim, c, true);
    auto* sweep = app.add_subcommand("eig-sweep", "modal analysis over the inverter dispatch");
    add_common(sweep, c, true);
    sweep->add_option("--from", from);
    sweep->add_option("--to", to);
    sweep->add_option("--step", step);
    auto* curve = app.add_subcommand("droop-curve", "frequency-power curves of the exponential and static laws");
    add_common(curve, c, false);
    curve->add_option("--pset", pset, "comma-separated dispatches");
    auto* report = app.add_subcommand("report", "regenerate the comparison tables from fresh runs");
    add_common(report, c, false);
    report->add_option("--tables", tables, "comma-separated subset of I,V,VII");
    auto* dump = app.add_subcommand("dump-scenario", "print the canonical JSON of a scenario");
    add_common(dump, c, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("input", e.what(), 2);
    }

    try {
        if (*pf) cmd_powerflow(c);
        else if (*sim) cmd_simulate(c);
        else if (*sweep) cmd_sweep(c, from, to, step);
        else if (*curve) cmd_droop_curve(c, pset);
        else if (*report) cmd_report(c, tables);
        else if (*dump) cmd_dump(c);
    } catch (const InputError& e) {
        return fail("input", e.what(), 2);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), 3);
    } catch (const fs::filesystem_error& e) {
        return fail("input", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 3);
    }
    return 0;
}
