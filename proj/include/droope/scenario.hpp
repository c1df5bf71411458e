#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "droope/metrics.hpp"
#include "droope/system.hpp"
#include "droope/timedomain.hpp"

namespace droope {

using Json = nlohmann::ordered_json;

struct SimSettings {
    double dt = 1e-3;
    double t_end = 20.0;
    double rocof_window = 0.1;
    std::string frequency = "weighted";  // a device name, or "weighted" for the rating-weighted mean

    bool operator==(const SimSettings&) const = default;
};

/// Inverter dispatch sweep: the swept device and the one whose angle is held
/// fixed. Empty names pick the first droop-e inverter and the slack-bus device.
struct SweepSettings {
    std::string device;
    std::string reference;

    bool operator==(const SweepSettings&) const = default;
};

struct Scenario {
    std::string name;
    std::string description;
    NetworkModel network;
    std::vector<DeviceSpec> devices;
    std::vector<Event> events;
    SimSettings sim;
    SweepSettings sweep;
    Json notes = Json::object();  // free-form documentation, never interpreted

    std::size_t device_index(const std::string& dev) const {
        for (std::size_t i = 0; i < devices.size(); ++i)
            if (devices[i].name == dev) return i;
        throw ScenarioError("scenario has no device named '" + dev + "'");
    }

    std::size_t swept_device() const {
        if (!sweep.device.empty()) return device_index(sweep.device);
        for (std::size_t i = 0; i < devices.size(); ++i)
            if (devices[i].kind == DeviceKind::gfm_droop_e) return i;
        for (std::size_t i = 0; i < devices.size(); ++i)
            if (devices[i].is_gfm()) return i;
        throw ScenarioError("scenario has no inverter to sweep");
    }

    std::size_t reference_device() const {
        if (!sweep.reference.empty()) return device_index(sweep.reference);
        const int slack = network.buses[network.slack_index()].id;
        for (std::size_t i = 0; i < devices.size(); ++i)
            if (devices[i].bus == slack) return i;
        return 0;
    }

    /// Time of the first load step, or zero for a steady run.
    double event_time() const {
        double t = 0.0;
        bool found = false;
        for (const auto& e : events)
            if (e.kind == EventKind::load_step && (!found || e.t < t)) {
                t = e.t;
                found = true;
            }
        return t;
    }

    void validate() const {
        network.validate();
        if (devices.empty()) throw ScenarioError("devices: at least one device is required");
        for (std::size_t i = 0; i < devices.size(); ++i) {
            const auto& d = devices[i];
            try {
                d.validate();
                (void)network.index_of(d.bus);
            } catch (const InputError& e) {
                throw ScenarioError("devices[" + std::to_string(i) + "]: " + e.what());
            }
            const auto& bus = network.buses[network.index_of(d.bus)];
            if (bus.kind == BusKind::pq)
                throw ScenarioError("devices[" + std::to_string(i) + "]: bus " + std::to_string(d.bus) +
                                    " hosts a device but has no voltage setpoint");
        }
        (void)DynamicSystem(network, devices);
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& e = events[i];
            const std::string where = "events[" + std::to_string(i) + "]";
            if (e.kind != EventKind::load_step) throw ScenarioError(where + ": only load_step events can be scheduled");
            if (e.t < 0.0) throw ScenarioError(where + ".t: must be non-negative");
            try {
                (void)network.index_of(e.bus);
            } catch (const InputError& err) {
                throw ScenarioError(where + ".bus: " + err.what());
            }
        }
        if (!(sim.dt > 0.0)) throw ScenarioError("sim.dt: must be positive");
        if (!(sim.t_end > 0.0)) throw ScenarioError("sim.t_end: must be positive");
        if (!(sim.rocof_window >= sim.dt)) throw ScenarioError("sim.rocof_window: must be at least one time step");
        if (sim.frequency != "weighted") (void)device_index(sim.frequency);
        if (!sweep.device.empty()) (void)device_index(sweep.device);
        if (!sweep.reference.empty()) (void)device_index(sweep.reference);
    }

    bool operator==(const Scenario&) const = default;
};

// ---------------------------------------------------------------------------
// JSON encoding
// ---------------------------------------------------------------------------

namespace detail {

/// Reads the members of one JSON object, remembering which keys were used so
/// that leftovers can be reported.
class ObjectReader {
  public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& where, const std::string& what) {
        throw ScenarioError((where.empty() ? std::string("scenario") : where) + ": " + what);
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key, bool required = true) {
        used_.insert(key);
        if (!j_.contains(key)) {
            if (required) fail(at(key), "missing required field");
            static const Json null_value;
            return null_value;
        }
        return j_.at(key);
    }

    void number(const std::string& key, double& out, bool required = false) {
        const Json& v = raw(key, required);
        if (v.is_null() && !required) return;
        if (!v.is_number()) fail(at(key), "expected a number");
        out = v.get<double>();
    }

    void integer(const std::string& key, int& out, bool required = false) {
        const Json& v = raw(key, required);
        if (v.is_null() && !required) return;
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        out = v.get<int>();
    }

    void string(const std::string& key, std::string& out, bool required = false) {
        const Json& v = raw(key, required);
        if (v.is_null() && !required) return;
        if (!v.is_string()) fail(at(key), "expected a string");
        out = v.get<std::string>();
    }

    const Json& array(const std::string& key, bool required = false) {
        const Json& v = raw(key, required);
        if (v.is_null() && !required) return v;
        if (!v.is_array()) fail(at(key), "expected an array");
        return v;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!used_.count(key)) fail(at(key), "unknown key");
    }

  private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline BusKind parse_bus_kind(const std::string& s, const std::string& where) {
    if (s == "slack") return BusKind::slack;
    if (s == "pv") return BusKind::pv;
    if (s == "pq") return BusKind::pq;
    ObjectReader::fail(where, "bus kind must be slack, pv or pq (got '" + s + "')");
}

inline const char* to_string(BusKind k) {
    switch (k) {
        case BusKind::slack: return "slack";
        case BusKind::pv: return "pv";
        case BusKind::pq: return "pq";
    }
    return "?";
}

inline DeviceKind parse_device_kind(const std::string& s, const std::string& where) {
    if (s == "sg") return DeviceKind::sg;
    if (s == "gfm_droop_e") return DeviceKind::gfm_droop_e;
    if (s == "gfm_static") return DeviceKind::gfm_static;
    ObjectReader::fail(where, "device kind must be sg, gfm_droop_e or gfm_static (got '" + s + "')");
}

inline void read_sg(const Json& j, const std::string& path, SgParams& p) {
    ObjectReader r(j, path);
    r.number("h", p.h);
    r.number("xd", p.xd);
    r.number("xd_prime", p.xd_p);
    r.number("xq", p.xq);
    r.number("xq_prime", p.xq_p);
    r.number("td0_prime", p.td0_p);
    r.number("tq0_prime", p.tq0_p);
    r.number("rs", p.rs);
    r.number("ka", p.ka);
    r.number("ta", p.ta);
    r.number("ke", p.ke);
    r.number("te", p.te);
    r.number("kf", p.kf);
    r.number("tf", p.tf);
    r.number("sat_gamma", p.sat_gamma);
    r.number("sat_epsilon", p.sat_epsilon);
    r.number("droop", p.droop);
    r.number("t_sv", p.t_sv);
    r.number("t_ch", p.t_ch);
    const Json& vr = r.raw("vr_max", false);
    if (!vr.is_null()) {
        if (vr.is_string() && vr.get<std::string>() == "inf") p.vr_max = std::numeric_limits<double>::infinity();
        else if (vr.is_number()) p.vr_max = vr.get<double>();
        else ObjectReader::fail(r.at("vr_max"), "expected a number or \"inf\"");
    }
    r.number("rating_mva", p.rating_mva);
    r.finish();
}

inline Json write_sg(const SgParams& p) {
    Json j;
    j["h"] = p.h;
    j["xd"] = p.xd;
    j["xd_prime"] = p.xd_p;
    j["xq"] = p.xq;
    j["xq_prime"] = p.xq_p;
    j["td0_prime"] = p.td0_p;
    j["tq0_prime"] = p.tq0_p;
    j["rs"] = p.rs;
    j["ka"] = p.ka;
    j["ta"] = p.ta;
    j["ke"] = p.ke;
    j["te"] = p.te;
    j["kf"] = p.kf;
    j["tf"] = p.tf;
    j["sat_gamma"] = p.sat_gamma;
    j["sat_epsilon"] = p.sat_epsilon;
    j["droop"] = p.droop;
    j["t_sv"] = p.t_sv;
    j["t_ch"] = p.t_ch;
    if (std::isinf(p.vr_max)) j["vr_max"] = "inf";
    else j["vr_max"] = p.vr_max;
    j["rating_mva"] = p.rating_mva;
    return j;
}

inline void read_gfm(const Json& j, const std::string& path, GfmParams& p) {
    ObjectReader r(j, path);
    r.number("omega_b", p.omega_b);
    r.number("t_fil", p.t_fil);
    r.number("r", p.r);
    r.number("x", p.x);
    r.number("rating_mva", p.rating_mva);
    r.finish();
}

inline Json write_gfm(const GfmParams& p) {
    Json j;
    j["omega_b"] = p.omega_b;
    j["t_fil"] = p.t_fil;
    j["r"] = p.r;
    j["x"] = p.x;
    j["rating_mva"] = p.rating_mva;
    return j;
}

inline DeviceSpec read_device(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    DeviceSpec d;
    r.string("name", d.name, true);
    r.integer("bus", d.bus, true);
    std::string kind;
    r.string("kind", kind, true);
    d.kind = parse_device_kind(kind, r.at("kind"));
    r.number("p_dispatch", d.p_dispatch, true);
    if (d.is_gfm()) {
        if (r.has("sg")) ObjectReader::fail(r.at("sg"), "machine data given for an inverter");
        if (r.has("gfm")) read_gfm(r.raw("gfm"), r.at("gfm"), d.gfm);
        if (d.kind == DeviceKind::gfm_droop_e) {
            if (r.has("static_droop")) ObjectReader::fail(r.at("static_droop"), "only valid for gfm_static devices");
            if (r.has("droop_e")) {
                ObjectReader law(r.raw("droop_e"), r.at("droop_e"));
                law.number("alpha", d.droop_e.alpha);
                law.number("beta", d.droop_e.beta);
                law.finish();
            }
            if (r.has("power_sharing")) {
                ObjectReader ps(r.raw("power_sharing"), r.at("power_sharing"));
                PowerSharingParams p;
                ps.number("k", p.k);
                ps.number("eps_p", p.eps_p);
                ps.number("eps_dp", p.eps_dp);
                ps.number("d_static", p.d_static);
                ps.finish();
                d.sharing = p;
            }
        } else {
            if (r.has("droop_e")) ObjectReader::fail(r.at("droop_e"), "only valid for gfm_droop_e devices");
            if (r.has("power_sharing")) ObjectReader::fail(r.at("power_sharing"), "only valid for gfm_droop_e devices");
            if (r.has("static_droop")) {
                ObjectReader law(r.raw("static_droop"), r.at("static_droop"));
                law.number("d", d.static_droop.d);
                law.finish();
            }
        }
    } else {
        for (const char* k : {"gfm", "droop_e", "static_droop", "power_sharing"})
            if (r.has(k)) ObjectReader::fail(r.at(k), "inverter data given for a synchronous generator");
        if (r.has("sg")) read_sg(r.raw("sg"), r.at("sg"), d.sg);
    }
    r.finish();
    try {
        d.validate();
    } catch (const InputError& e) {
        ObjectReader::fail(path, e.what());
    }
    return d;
}

inline Json write_device(const DeviceSpec& d) {
    Json j;
    j["name"] = d.name;
    j["bus"] = d.bus;
    j["kind"] = to_string(d.kind);
    j["p_dispatch"] = d.p_dispatch;
    if (!d.is_gfm()) {
        j["sg"] = write_sg(d.sg);
        return j;
    }
    j["gfm"] = write_gfm(d.gfm);
    if (d.kind == DeviceKind::gfm_droop_e) {
        j["droop_e"] = {{"alpha", d.droop_e.alpha}, {"beta", d.droop_e.beta}};
        if (d.sharing)
            j["power_sharing"] = {{"k", d.sharing->k},
                                  {"eps_p", d.sharing->eps_p},
                                  {"eps_dp", d.sharing->eps_dp},
                                  {"d_static", d.sharing->d_static}};
    } else {
        j["static_droop"] = {{"d", d.static_droop.d}};
    }
    return j;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
    using detail::ObjectReader;
    ObjectReader r(j, "");
    Scenario s;
    r.string("name", s.name);
    r.string("description", s.description);

    if (r.has("bases")) {
        ObjectReader b(r.raw("bases"), "bases");
        b.number("system_mva", s.network.bases.system_mva);
        b.number("omega_b", s.network.bases.base_rad_per_s);
        b.finish();
    }

    const Json& buses = r.array("buses", true);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string path = "buses[" + std::to_string(i) + "]";
        ObjectReader br(buses[i], path);
        Bus bus;
        br.integer("id", bus.id, true);
        std::string kind;
        br.string("kind", kind, true);
        bus.kind = detail::parse_bus_kind(kind, br.at("kind"));
        if (br.has("v_set")) {
            double v = 0.0;
            br.number("v_set", v);
            bus.voltage_setpoint = v;
        }
        br.number("base_kv", bus.base_kv);
        br.finish();
        s.network.buses.push_back(bus);
    }

    const Json& branches = r.array("branches");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        ObjectReader br(branches[i], "branches[" + std::to_string(i) + "]");
        Branch b;
        br.integer("from", b.from, true);
        br.integer("to", b.to, true);
        br.number("x", b.reactance, true);
        br.number("r", b.resistance);
        br.finish();
        s.network.branches.push_back(b);
    }

    const Json& loads = r.array("loads");
    for (std::size_t i = 0; i < loads.size(); ++i) {
        ObjectReader lr(loads[i], "loads[" + std::to_string(i) + "]");
        ConstantPowerLoad l;
        lr.integer("bus", l.bus, true);
        lr.number("p", l.p, true);
        lr.number("q", l.q);
        lr.finish();
        s.network.loads.push_back(l);
    }

    const Json& devices = r.array("devices", true);
    for (std::size_t i = 0; i < devices.size(); ++i)
        s.devices.push_back(detail::read_device(devices[i], "devices[" + std::to_string(i) + "]"));

    const Json& events = r.array("events");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string path = "events[" + std::to_string(i) + "]";
        ObjectReader er(events[i], path);
        Event e;
        std::string kind;
        er.string("kind", kind, true);
        if (kind != "load_step") ObjectReader::fail(er.at("kind"), "only load_step events can be scheduled");
        er.number("t", e.t, true);
        er.integer("bus", e.bus, true);
        er.number("dp", e.dp);
        er.number("dq", e.dq);
        er.finish();
        s.events.push_back(e);
    }

    if (r.has("sim")) {
        ObjectReader sr(r.raw("sim"), "sim");
        sr.number("dt", s.sim.dt);
        sr.number("t_end", s.sim.t_end);
        sr.number("rocof_window", s.sim.rocof_window);
        sr.string("frequency", s.sim.frequency);
        sr.finish();
    }
    if (r.has("sweep")) {
        ObjectReader sw(r.raw("sweep"), "sweep");
        sw.string("device", s.sweep.device);
        sw.string("reference", s.sweep.reference);
        sw.finish();
    }
    if (r.has("notes")) {
        s.notes = r.raw("notes");
        if (!s.notes.is_object()) ObjectReader::fail("notes", "expected an object");
    }
    r.finish();
    s.validate();
    return s;
}

/// Canonical encoding with every default written out.
inline Json scenario_to_json(const Scenario& s) {
    Json j;
    j["name"] = s.name;
    j["description"] = s.description;
    j["bases"] = {{"system_mva", s.network.bases.system_mva}, {"omega_b", s.network.bases.base_rad_per_s}};
    j["buses"] = Json::array();
    for (const auto& b : s.network.buses) {
        Json jb;
        jb["id"] = b.id;
        jb["kind"] = detail::to_string(b.kind);
        if (b.voltage_setpoint) jb["v_set"] = *b.voltage_setpoint;
        jb["base_kv"] = b.base_kv;
        j["buses"].push_back(jb);
    }
    j["branches"] = Json::array();
    for (const auto& b : s.network.branches)
        j["branches"].push_back({{"from", b.from}, {"to", b.to}, {"r", b.resistance}, {"x", b.reactance}});
    j["loads"] = Json::array();
    for (const auto& l : s.network.loads) j["loads"].push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}});
    j["devices"] = Json::array();
    for (const auto& d : s.devices) j["devices"].push_back(detail::write_device(d));
    j["events"] = Json::array();
    for (const auto& e : s.events)
        j["events"].push_back({{"kind", "load_step"}, {"t", e.t}, {"bus", e.bus}, {"dp", e.dp}, {"dq", e.dq}});
    j["sim"] = {{"dt", s.sim.dt},
                {"t_end", s.sim.t_end},
                {"rocof_window", s.sim.rocof_window},
                {"frequency", s.sim.frequency}};
    j["sweep"] = {{"device", s.sweep.device}, {"reference", s.sweep.reference}};
    j["notes"] = s.notes;
    return j;
}

inline Scenario parse_scenario(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    }
    return scenario_from_json(j);
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const ScenarioError& e) {
        throw ScenarioError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Built-in systems
// ---------------------------------------------------------------------------

namespace detail {

inline Json emt_reference_notes() {
    // Switching-model inverter data; kept for documentation, unused by the
    // phasor model.
    return {{"emt_inverter",
             {{"Lf_pu", 0.15},
              {"Rf_pu", 0.005},
              {"Cf_pu", 2.5},
              {"Rcap_pu", 0.005},
              {"kCi", 1.19},
              {"kCp", 0.73},
              {"GC", 1.0},
              {"kVi", 1.16},
              {"kVp", 0.52},
              {"GV", 1.0}}}};
}

inline DeviceSpec inverter(std::string name, int bus, DeviceKind kind, double p, double mva) {
    DeviceSpec d;
    d.name = std::move(name);
    d.bus = bus;
    d.kind = kind;
    d.p_dispatch = p;
    d.gfm.rating_mva = mva;
    return d;
}

inline DeviceSpec generator(std::string name, int bus, double p, double mva) {
    DeviceSpec d;
    d.name = std::move(name);
    d.bus = bus;
    d.kind = DeviceKind::sg;
    d.p_dispatch = p;
    d.sg.rating_mva = mva;
    return d;
}

inline Scenario three_bus(const std::string& name, double p_sg, double p_gfm) {
    Scenario s;
    s.name = name;
    s.network.buses = {{1, BusKind::slack, 1.02, 18.0}, {2, BusKind::pq, std::nullopt, 18.0},
                       {3, BusKind::pv, 1.02, 18.0}};
    s.network.branches = {{1, 2, 0.05, 0.0}, {2, 3, 0.05, 0.0}};
    // 0.95 power factor load; reactive power is consumption-positive.
    s.network.loads = {{2, 0.75, 0.25}};
    s.devices = {generator("sg1", 1, p_sg, 100.0), inverter("gfm3", 3, DeviceKind::gfm_droop_e, p_gfm, 50.0)};
    s.events = {{1.0, EventKind::load_step, 2, 0.075, 0.025, {}}};
    s.sim.t_end = 20.0;
    s.sim.frequency = "sg1";
    s.sweep = {"gfm3", "sg1"};
    s.notes = emt_reference_notes();
    s.notes["load_step"] = "10% of the base load at bus 2, applied at t = 1 s";
    return s;
}

inline Scenario nine_bus(const std::string& name, DeviceKind outer) {
    Scenario s;
    s.name = name;
    s.network.buses = {{1, BusKind::pv, 1.04, 16.5},           {2, BusKind::slack, 1.025, 18.0},
                       {3, BusKind::pv, 1.025, 13.8},          {4, BusKind::pq, std::nullopt, 230.0},
                       {5, BusKind::pq, std::nullopt, 230.0}, {6, BusKind::pq, std::nullopt, 230.0},
                       {7, BusKind::pq, std::nullopt, 230.0}, {8, BusKind::pq, std::nullopt, 230.0},
                       {9, BusKind::pq, std::nullopt, 230.0}};
    s.network.branches = {{1, 4, 0.0576, 0.0},   {4, 5, 0.085, 0.010}, {5, 7, 0.161, 0.032},
                          {4, 6, 0.092, 0.017},  {6, 9, 0.170, 0.039}, {7, 8, 0.072, 0.0085},
                          {8, 9, 0.1008, 0.0119}, {2, 7, 0.0625, 0.0},  {3, 9, 0.0586, 0.0}};
    s.network.loads = {{5, 1.25, 0.5}, {6, 0.9, 0.3}, {8, 1.0, 0.35}};
    auto outer_device = [&](std::string n, int bus, double p) {
        return outer == DeviceKind::sg ? generator(std::move(n), bus, p, 200.0)
                                       : inverter(std::move(n), bus, outer, p, 200.0);
    };
    s.devices = {outer_device("g1", 1, 71.5 / 200.0), generator("g2", 2, 163.0 / 200.0, 200.0),
                 outer_device("g3", 3, 85.0 / 200.0)};
    if (outer == DeviceKind::gfm_droop_e)
        for (auto& d : s.devices)
            if (d.is_gfm()) d.sharing = PowerSharingParams{};
    s.events = {{1.0, EventKind::load_step, 6, 0.09, 0.03, {}}};
    s.sim.t_end = 20.0;
    s.sim.frequency = "weighted";
    s.sweep = {"", "g2"};
    s.notes = emt_reference_notes();
    s.notes["network"] = "nine-bus, three-machine system; series branch data only (no line charging)";
    s.notes["load_step"] = "10% of the bus 6 load, applied at t = 1 s";
    return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_scenario_names() {
    return {"3bus-caseA",   "3bus-caseB",   "3bus-caseC",   "3bus-sharing", "3bus-sharing-static",
            "9bus-caseA",   "9bus-caseB",   "9bus-caseC"};
}

inline Scenario builtin_scenario(const std::string& name) {
    using detail::nine_bus;
    using detail::three_bus;
    Scenario s;
    if (name == "3bus-caseA") {
        s = three_bus(name, 0.73, 0.05);
        s.description = "3-bus system, case A: inverter lightly loaded";
    } else if (name == "3bus-caseB") {
        s = three_bus(name, 0.50, 0.50);
        s.description = "3-bus system, case B: equal dispatch";
    } else if (name == "3bus-caseC") {
        s = three_bus(name, 0.27, 0.95);
        s.description = "3-bus system, case C: inverter near its rating";
    } else if (name == "3bus-sharing" || name == "3bus-sharing-static") {
        s = three_bus(name, 0.73, 0.05);
        s.events = {{1.0, EventKind::load_step, 2, 0.375, 0.125, {}}};
        s.sim.t_end = 30.0;
        s.notes["load_step"] = "50% of the base load at bus 2, applied at t = 1 s";
        if (name == "3bus-sharing") {
            s.devices[1].sharing = PowerSharingParams{};
            s.description = "3-bus system, case A dispatch, large load step with droop-e power sharing";
        } else {
            s.devices[1].kind = DeviceKind::gfm_static;
            s.description = "3-bus system, case A dispatch, large load step with a 5% static droop inverter";
        }
    } else if (name == "9bus-caseA") {
        s = nine_bus(name, DeviceKind::sg);
        s.description = "9-bus system, case A: three synchronous generators";
    } else if (name == "9bus-caseB") {
        s = nine_bus(name, DeviceKind::gfm_static);
        s.description = "9-bus system, case B: generators 1 and 3 replaced by 5% static droop inverters";
    } else if (name == "9bus-caseC") {
        s = nine_bus(name, DeviceKind::gfm_droop_e);
        s.description = "9-bus system, case C: generators 1 and 3 replaced by droop-e inverters with power sharing";
    } else {
        throw ScenarioError("unknown built-in scenario '" + name + "'");
    }
    s.validate();
    return s;
}

inline bool is_builtin_scenario(const std::string& name) {
    for (const auto& n : builtin_scenario_names())
        if (n == name) return true;
    return false;
}

/// A built-in name or a path to a JSON file.
inline Scenario resolve_scenario(const std::string& name_or_path) {
    return is_builtin_scenario(name_or_path) ? builtin_scenario(name_or_path) : load_scenario_file(name_or_path);
}

// ---------------------------------------------------------------------------
// Running a scenario
// ---------------------------------------------------------------------------

struct PreparedCase {
    DynamicSystem system;
    SystemPoint start;
    PowerFlowSolution power_flow;
};

inline PreparedCase prepare_case(const Scenario& s) {
    s.validate();
    PowerFlowSolution pf = solve_power_flow(s.network, device_dispatch(s.devices, s.network.bases.system_mva));
    DynamicSystem sys(s.network, s.devices);
    SystemPoint start = release_dynamics(sys, pf);
    return {std::move(sys), std::move(start), std::move(pf)};
}

inline SimulationTrace run_case(const Scenario& s) {
    PreparedCase c = prepare_case(s);
    SimulationOptions opts;
    opts.dt = s.sim.dt;
    opts.t_end = s.sim.t_end;
    Simulator sim(std::move(c.system), std::move(c.start), opts);
    return sim.run(s.events, s.sim.t_end);
}

/// The frequency series the scenario's statistics are taken from, Hz.
inline std::vector<double> scenario_frequency(const Scenario& s, const SimulationTrace& trace) {
    if (s.sim.frequency != "weighted") return trace.device(s.sim.frequency).f_hz;
    std::vector<std::vector<double>> series;
    std::vector<double> mva;
    for (const auto& d : s.devices) {
        series.push_back(trace.device(d.name).f_hz);
        mva.push_back(d.rating_mva());
    }
    return weighted_frequency(series, mva);
}

inline FrequencyStats scenario_stats(const Scenario& s, const SimulationTrace& trace) {
    const std::vector<double> f = scenario_frequency(s, trace);
    FrequencyStats st = frequency_stats(trace.t, f, s.event_time(), s.sim.rocof_window);
    st.source = s.sim.frequency;
    return st;
}

inline double scenario_inertia(const Scenario& s) {
    std::vector<double> h;
    std::vector<double> mva;
    for (const auto& d : s.devices) {
        h.push_back(d.inertia());
        mva.push_back(d.rating_mva());
    }
    return aggregate_inertia(h, mva);
}

}  // namespace droope
