#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "droope/metrics.hpp"
#include "droope/scenario.hpp"

namespace droope {

// Reference inputs for the headroom comparison.
inline constexpr double kHeadroomPSet = 0.2;
inline const std::vector<double> kHeadroomDeviations{0.25, 0.5, 0.75};
inline constexpr double kUflsHz = 59.0;

inline std::vector<HeadroomRow> reference_headroom_table() {
    return headroom_table(kHeadroomPSet, kHeadroomDeviations, DroopELaw{}, 0.05);
}

/// Result of one load-step case, as reported in the comparison tables.
struct CaseRow {
    std::string scenario;
    FrequencyStats stats;
    double inertia = 0.0;
    std::vector<std::string> devices;
    std::vector<double> p_initial;  // device base
    std::vector<double> p_final;
    double max_power_balance = 0.0;
    double wall_seconds = 0.0;

    double delta_p(std::size_t dev) const { return p_final[dev] - p_initial[dev]; }
};

inline CaseRow summarize_case(const Scenario& s, const SimulationTrace& trace) {
    CaseRow row;
    row.scenario = s.name;
    row.stats = scenario_stats(s, trace);
    row.inertia = scenario_inertia(s);
    for (const auto& d : trace.devices) {
        row.devices.push_back(d.name);
        row.p_initial.push_back(d.p_dev.front());
        row.p_final.push_back(d.p_dev.back());
    }
    for (double r : trace.power_balance) row.max_power_balance = std::max(row.max_power_balance, std::abs(r));
    return row;
}

/// Three-bus load-step cases: frequency statistics and device power changes.
inline void write_case_table_markdown(std::ostream& os, const std::vector<CaseRow>& rows) {
    os << "| Case | Nadir (Hz) | Peak ROCOF (Hz/s) | Settling (Hz) |";
    if (!rows.empty())
        for (const auto& d : rows.front().devices) os << " Delta P " << d << " (pu) |";
    os << "\n|---|---|---|---|";
    if (!rows.empty())
        for (std::size_t i = 0; i < rows.front().devices.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& r : rows) {
        os << "| " << r.scenario << " | " << fixed(r.stats.nadir, 2) << " | " << fixed(r.stats.peak_rocof, 2) << " | "
           << fixed(r.stats.settling, 2) << " |";
        for (std::size_t i = 0; i < r.devices.size(); ++i) os << ' ' << fixed(r.delta_p(i), 3) << " |";
        os << '\n';
    }
}

/// Multi-machine cases: frequency statistics and aggregate inertia.
inline void write_inertia_table_markdown(std::ostream& os, const std::vector<CaseRow>& rows) {
    os << "| Case | Nadir (Hz) | Peak ROCOF (Hz/s) | Settling (Hz) | Inertia (s) |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& r : rows)
        os << "| " << r.scenario << " | " << fixed(r.stats.nadir, 2) << " | " << fixed(r.stats.peak_rocof, 2) << " | "
           << fixed(r.stats.settling, 2) << " | " << fixed(r.inertia, 1) << " |\n";
}

inline void write_case_csv(std::ostream& os, const std::vector<CaseRow>& rows) {
    os << "case,nadir_hz,nadir_t,peak_rocof_hz_s,settling_hz,settled,inertia_s,device,p_initial,p_final\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.devices.size(); ++i)
            os << r.scenario << ',' << format_double(r.stats.nadir) << ',' << format_double(r.stats.nadir_time) << ','
               << format_double(r.stats.peak_rocof) << ',' << format_double(r.stats.settling) << ','
               << (r.stats.settled ? 1 : 0) << ',' << format_double(r.inertia) << ',' << r.devices[i] << ','
               << format_double(r.p_initial[i]) << ',' << format_double(r.p_final[i]) << '\n';
}

/// Frequency versus power for the exponential law at each p_set and the 5%
/// static droop through the same point, with the under-frequency load
/// shedding threshold as a constant column.
inline void write_droop_curve_csv(std::ostream& os, const std::vector<double>& p_set, const DroopELaw& law = {},
                                  double d_static = 0.05, double step = 0.01) {
    os << "p_set,p,f_droop_e_hz,f_static_hz,ufls_hz\n";
    const auto n = static_cast<long>(std::llround(1.0 / step));
    for (double ps : p_set) {
        if (ps < 0.0 || ps > 1.0) throw ArgumentError("p_set must lie in [0, 1]");
        for (long k = 0; k <= n; ++k) {
            const double p = static_cast<double>(k) * step;
            const double fe = kNominalHz + rad_per_sec_to_hz(droop_e_offset(ps, p, law, kNominalRadPerSec));
            const double fs = kNominalHz + rad_per_sec_to_hz(static_droop_offset(ps, p, d_static, kNominalRadPerSec));
            os << format_double(ps) << ',' << format_double(p) << ',' << format_double(fe) << ','
               << format_double(fs) << ',' << format_double(kUflsHz) << '\n';
        }
    }
}

}  // namespace droope
