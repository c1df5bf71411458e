#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "droope/devices.hpp"
#include "droope/format.hpp"
#include "droope/types.hpp"

namespace droope {

struct FrequencyStats {
    double nadir = 0.0;       // Hz
    double nadir_time = 0.0;  // s
    double peak_rocof = 0.0;  // Hz/s
    double settling = 0.0;    // Hz
    bool settled = false;     // final stretch flat to within the flatness limit
    double window = 0.1;      // s
    std::string source;       // which frequency the statistics describe
};

/// Largest |f(t + T_w) - f(t)| / T_w over a uniformly sampled series.
inline double peak_rocof(std::span<const double> f, double dt, double window) {
    if (!(window > 0.0) || !(dt > 0.0)) throw ArgumentError("ROCOF window and sample period must be positive");
    const auto lag = static_cast<std::size_t>(std::llround(window / dt));
    if (lag == 0 || f.size() <= lag) throw ArgumentError("series is shorter than the ROCOF window");
    const double span = static_cast<double>(lag) * dt;
    double peak = 0.0;
    for (std::size_t k = 0; k + lag < f.size(); ++k) peak = std::max(peak, std::abs(f[k + lag] - f[k]) / span);
    return peak;
}

/// MVA-weighted average of aligned frequency series.
inline std::vector<double> weighted_frequency(const std::vector<std::vector<double>>& f, std::span<const double> mva) {
    if (f.empty() || f.size() != mva.size()) throw ArgumentError("need one rating per frequency series");
    const std::size_t n = f.front().size();
    double total = 0.0;
    for (double s : mva) {
        if (!(s > 0.0)) throw ArgumentError("device ratings must be positive");
        total += s;
    }
    for (const auto& series : f)
        if (series.size() != n) throw ArgumentError("frequency series have mismatched lengths");
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) acc += mva[i] * f[i][k];
        out[k] = acc / total;
    }
    return out;
}

/// Rating-weighted inertia constant, seconds.
inline double aggregate_inertia(std::span<const double> h, std::span<const double> rating) {
    if (h.empty() || h.size() != rating.size()) throw ArgumentError("need one rating per inertia constant");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(rating[i] > 0.0)) throw ArgumentError("device ratings must be positive");
        num += h[i] * rating[i];
        den += rating[i];
    }
    return num / den;
}

/// Nadir, peak ROCOF and settling frequency of a trace.
///
/// Samples before `event_time` are excluded. Settling is the mean of the last
/// 5% of the series and is marked settled only if that stretch is flat to
/// `flatness` Hz peak-to-peak.
inline FrequencyStats frequency_stats(std::span<const double> t, std::span<const double> f, double event_time,
                                      double window, double flatness = 1e-3) {
    if (t.size() != f.size() || t.size() < 2) throw ArgumentError("time and frequency series must align");
    const double dt = t[1] - t[0];
    const auto first = static_cast<std::size_t>(
        std::lower_bound(t.begin(), t.end(), event_time - 0.5 * dt) - t.begin());
    if (first >= t.size()) throw ArgumentError("event time lies beyond the trace");
    FrequencyStats s;
    s.window = window;
    const auto post = f.subspan(first);
    const auto it = std::min_element(post.begin(), post.end());
    s.nadir = *it;
    s.nadir_time = t[first + static_cast<std::size_t>(it - post.begin())];
    s.peak_rocof = peak_rocof(post, dt, window);
    const std::size_t tail = std::max<std::size_t>(1, f.size() / 20);
    const auto last = f.last(tail);
    double sum = 0.0;
    for (double v : last) sum += v;
    s.settling = sum / static_cast<double>(tail);
    const auto [lo, hi] = std::minmax_element(last.begin(), last.end());
    s.settled = (*hi - *lo) < flatness;
    return s;
}

// ---------------------------------------------------------------------------
// Headroom comparison between the exponential and a static droop
// ---------------------------------------------------------------------------

struct HeadroomRow {
    double delta_f = 0.0;        // Hz
    double dp_droop_e = 0.0;     // pu device base
    double dp_static = 0.0;      // pu device base
    double dp_diff = 0.0;
    bool clamped = false;        // exponential response hit the device rating
};

/// Power increase of the exponential law for an under-frequency of delta_f.
/// Solves droop_e_offset(p_set, p) = -2 pi delta_f for p by bisection.
inline double droop_e_power_for_deviation(double p_set, double delta_f, const DroopELaw& law, double omega_b,
                                          bool* clamped = nullptr) {
    if (delta_f < 0.0) throw ArgumentError("frequency deviation must be non-negative");
    const double target = -hz_to_rad_per_sec(delta_f);
    auto r = [&](double p) { return droop_e_offset(p_set, p, law, omega_b) - target; };
    if (clamped) *clamped = false;
    if (r(1.0) > 0.0) {
        if (clamped) *clamped = true;
        return 1.0 - p_set;
    }
    double lo = p_set;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (r(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) - p_set;
}

inline std::vector<HeadroomRow> headroom_table(double p_set, std::span<const double> delta_f, const DroopELaw& law,
                                               double d_static, double omega_b = kNominalRadPerSec,
                                               double nominal_hz = kNominalHz) {
    if (!(d_static > 0.0)) throw ArgumentError("static droop must be positive");
    std::vector<HeadroomRow> rows;
    for (double df : delta_f) {
        HeadroomRow row;
        row.delta_f = df;
        row.dp_droop_e = droop_e_power_for_deviation(p_set, df, law, omega_b, &row.clamped);
        row.dp_static = df / (nominal_hz * d_static);
        row.dp_diff = row.dp_droop_e - row.dp_static;
        rows.push_back(row);
    }
    return rows;
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Markdown layout: ray, delta f, droop-e dp, static dp, difference.
inline void write_headroom_markdown(std::ostream& os, const std::vector<HeadroomRow>& rows) {
    os << "| Ray | Delta f (Hz) | Droop-e Delta p (pu) | Static 5% Delta p (pu) | Delta p diff (pu) |\n";
    os << "|---|---|---|---|---|\n";
    char ray = 'a';
    for (const auto& r : rows) {
        os << "| " << ray++ << " | " << fixed(r.delta_f, 2) << " | " << fixed(r.dp_droop_e, 2) << " | "
           << fixed(r.dp_static, 2) << " | " << fixed(r.dp_diff, 2) << (r.clamped ? " (clamped)" : "") << " |\n";
    }
}

inline void write_headroom_csv(std::ostream& os, const std::vector<HeadroomRow>& rows) {
    os << "delta_f_hz,dp_droop_e,dp_static,dp_diff,clamped\n";
    for (const auto& r : rows)
        os << format_double(r.delta_f) << ',' << format_double(r.dp_droop_e) << ',' << format_double(r.dp_static)
           << ',' << format_double(r.dp_diff) << ',' << (r.clamped ? 1 : 0) << '\n';
}

}  // namespace droope
