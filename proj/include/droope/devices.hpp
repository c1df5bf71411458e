#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "droope/types.hpp"

namespace droope {

// ---------------------------------------------------------------------------
// Synchronous generator: two-axis machine, IEEE Type-1 exciter, governor and
// no-reheat turbine. All quantities on the machine's own MVA base.
// ---------------------------------------------------------------------------

struct SgParams {
    double h = 3.01;       // s
    double xd = 1.3125;    // pu
    double xd_p = 0.1813;  // pu
    double xq = 1.2578;    // pu
    double xq_p = 0.25;    // pu
    double td0_p = 5.89;   // s
    double tq0_p = 0.6;    // s
    double rs = 0.0;       // pu
    double ka = 20.0;
    double ta = 0.2;  // s
    double ke = 1.0;
    double te = 0.314;  // s
    double kf = 0.063;
    double tf = 0.35;  // s
    double sat_gamma = 0.0039;
    double sat_epsilon = 1.555;
    double droop = 0.05;  // pu speed per pu power
    // Governor and turbine time constants are not part of the machine data set
    // above; these are typical no-reheat values and can be overridden.
    double t_sv = 0.2;  // s
    double t_ch = 0.3;  // s
    double vr_max = std::numeric_limits<double>::infinity();
    double rating_mva = 100.0;

    void validate() const {
        const std::array<double, 8> tcs{td0_p, tq0_p, ta, te, tf, t_sv, t_ch, h};
        for (double t : tcs)
            if (!(t > 0.0)) throw ArgumentError("synchronous generator time constants and inertia must be positive");
        if (!(xd_p > 0.0 && xd_p < xd)) throw ArgumentError("synchronous generator requires 0 < Xd' < Xd");
        if (!(xq_p > 0.0 && xq_p <= xq)) throw ArgumentError("synchronous generator requires 0 < Xq' <= Xq");
        if (!(droop > 0.0)) throw ArgumentError("governor droop must be positive");
        if (!(rating_mva > 0.0)) throw ArgumentError("device rating must be positive");
    }

    bool operator==(const SgParams&) const = default;
};

/// Nine dynamic states in the order delta, omega, Eq', Ed', Efd, VR, Rf, pm, pSV.
struct SgState {
    double delta = 0.0;  // rad
    double omega = kNominalRadPerSec;
    double eq_p = 0.0;
    double ed_p = 0.0;
    double efd = 0.0;
    double vr = 0.0;
    double rf = 0.0;
    double pm = 0.0;
    double psv = 0.0;

    static constexpr std::size_t size = 9;

    std::array<double, size> to_array() const { return {delta, omega, eq_p, ed_p, efd, vr, rf, pm, psv}; }
    static SgState from_array(const std::array<double, size>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
    }
};

inline constexpr std::array<const char*, SgState::size> kSgStateNames{
    "delta_G", "omega_G", "Eq_prime", "Ed_prime", "E_fd", "V_R", "R_f", "p_m_G", "p_SV"};

struct SgSetpoints {
    double p_set = 0.0;  // governor reference, machine base
    double v_ref = 1.0;  // exciter reference
};

/// Terminal quantities seen by a device: bus voltage in polar form and the
/// machine-frame d/q current on device base.
struct Terminal {
    double v = 1.0;
    double theta = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
};

/// Machine-frame projection of a bus voltage for a device at angle delta.
inline std::pair<double, double> dq_voltage(double v, double theta, double delta) {
    return {v * std::sin(delta - theta), v * std::cos(delta - theta)};
}

/// Rotation from a device d/q frame at angle delta into the network frame.
inline Complex rotation(double delta) { return std::polar(1.0, delta - std::numbers::pi / 2.0); }

inline double saturation(double efd, const SgParams& p) { return p.sat_gamma * std::exp(p.sat_epsilon * efd); }

inline double sg_electrical_power(const Terminal& t, double delta) {
    const auto [vd, vq] = dq_voltage(t.v, t.theta, delta);
    return vd * t.i_d + vq * t.i_q;
}

/// Stator algebraic residuals (zero when the d/q currents are consistent).
inline std::array<double, 2> sg_stator_residual(const SgState& s, const Terminal& t, const SgParams& p) {
    const auto [vd, vq] = dq_voltage(t.v, t.theta, s.delta);
    return {s.ed_p - vd - p.rs * t.i_d + p.xq_p * t.i_q, s.eq_p - vq - p.rs * t.i_q - p.xd_p * t.i_d};
}

/// Time derivatives of the nine generator states.
///
/// `omega_frame` is the angular speed of the reference frame the angle is
/// measured in; pass the synchronous speed for the usual rotating frame.
inline SgState sg_derivatives(const SgState& s, const Terminal& t, const SgParams& p, const SgSetpoints& u,
                              double omega_s = kNominalRadPerSec, double omega_frame = kNominalRadPerSec) {
    SgState d;
    const double pe = sg_electrical_power(t, s.delta);
    d.delta = s.omega - omega_frame;
    d.omega = (s.pm - pe) * omega_s / (2.0 * p.h);
    d.eq_p = (-s.eq_p - (p.xd - p.xd_p) * t.i_d + s.efd) / p.td0_p;
    d.ed_p = (-s.ed_p + (p.xq - p.xq_p) * t.i_q) / p.tq0_p;
    d.efd = (-(p.ke + saturation(s.efd, p)) * s.efd + s.vr) / p.te;
    d.rf = (-s.rf + p.kf / p.tf * s.efd) / p.tf;
    d.vr = (-s.vr + p.ka * s.rf - p.ka * p.kf / p.tf * s.efd + p.ka * (u.v_ref - t.v)) / p.ta;
    d.pm = (-s.pm + s.psv) / p.t_ch;
    d.psv = (-s.psv + u.p_set - (s.omega / omega_s - 1.0) / p.droop) / p.t_sv;
    return d;
}

/// Field voltage that holds the exciter in equilibrium for a regulator output
/// V_R, i.e. the root of (K_E + S_E(E)) E = V_R. Monotone for E >= 0.
inline double solve_field_voltage(double vr, const SgParams& p, double tol = 1e-13) {
    if (vr < 0.0) throw InitializationError("negative regulator output has no positive field voltage");
    double e = vr / (p.ke + p.sat_gamma);
    for (int it = 0; it < 100; ++it) {
        const double se = saturation(e, p);
        const double r = (p.ke + se) * e - vr;
        const double dr = p.ke + se + p.sat_epsilon * se * e;
        const double step = r / dr;
        e -= step;
        if (e < 0.0) e = 0.0;
        if (std::abs(step) < tol * std::max(1.0, std::abs(e))) return e;
    }
    throw InitializationError("field voltage inversion did not converge");
}

// ---------------------------------------------------------------------------
// Grid-forming inverter: constant internal EMF behind the filter impedance,
// first-order power measurement filter and a frequency law on filtered power.
// ---------------------------------------------------------------------------

struct GfmParams {
    double omega_b = kNominalRadPerSec;
    double t_fil = 0.0167;  // s
    double p_set = 0.0;     // pu, device base
    double omega_set = kNominalRadPerSec;
    double e_d = 0.0;  // internal EMF, device frame
    double e_q = 1.0;
    double r = 0.005;  // pu, device base
    double x = 0.15;   // pu, device base
    double rating_mva = 50.0;

    void validate() const {
        if (!(t_fil > 0.0)) throw ArgumentError("power filter time constant must be positive");
        if (!(x > 0.0) || r < 0.0) throw ArgumentError("inverter coupling impedance must have X > 0 and R >= 0");
        if (!(rating_mva > 0.0)) throw ArgumentError("device rating must be positive");
        if (!(omega_b > 0.0)) throw ArgumentError("base frequency must be positive");
    }

    bool operator==(const GfmParams&) const = default;
};

/// Exponential frequency-power law parameters.
struct DroopELaw {
    double alpha = 0.002;  // pu frequency
    double beta = 3.0;     // 1 / pu power

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0)) throw ArgumentError("droop-e requires alpha > 0 and beta > 0");
    }

    bool operator==(const DroopELaw&) const = default;
};

/// Linear frequency-power law, D in pu frequency per pu power.
struct StaticDroopLaw {
    double d = 0.05;

    void validate() const {
        if (d < 0.0) throw ArgumentError("static droop gain must be non-negative");
    }

    bool operator==(const StaticDroopLaw&) const = default;
};

struct GfmState {
    double delta = 0.0;  // rad
    double p_m = 0.0;    // filtered power, device base

    static constexpr std::size_t size = 2;
};

inline constexpr std::array<const char*, GfmState::size> kGfmStateNames{"delta_I", "p_m_I"};

/// Frequency offset in rad/s produced by the exponential law:
/// w_b * alpha * (exp(beta * p_set) - exp(beta * p_m)).
inline double droop_e_offset(double p_set, double p_m, double alpha, double beta, double omega_b) {
    return omega_b * alpha * (std::exp(beta * p_set) - std::exp(beta * p_m));
}

inline double droop_e_offset(double p_set, double p_m, const DroopELaw& law, double omega_b) {
    return droop_e_offset(p_set, p_m, law.alpha, law.beta, omega_b);
}

/// Local slope of the exponential law, pu frequency per pu power.
inline double droop_e_slope(double p, const DroopELaw& law) {
    return law.alpha * law.beta * std::exp(law.beta * p);
}

inline double static_droop_offset(double p_set, double p_m, double d, double omega_b) {
    return d * omega_b * (p_set - p_m);
}

/// Measured output power at the terminal, device base.
inline double gfm_measured_power(const GfmState& s, const Terminal& t) {
    const auto [vd, vq] = dq_voltage(t.v, t.theta, s.delta);
    return vd * t.i_d + vq * t.i_q;
}

namespace detail {

inline GfmState gfm_derivatives(const GfmState& s, const Terminal& t, const GfmParams& p, double offset,
                                double omega_ps, double omega_frame) {
    GfmState d;
    d.delta = offset + p.omega_set + omega_ps - omega_frame;
    d.p_m = (-s.p_m + gfm_measured_power(s, t)) / p.t_fil;
    return d;
}

}  // namespace detail

/// State derivatives under the exponential law. `omega_ps` is the additive
/// output of the power-sharing controller (zero when absent). With
/// `omega_frame` = 0 the angle derivative is the absolute inverter frequency.
inline GfmState gfm_droop_e_derivatives(const GfmState& s, const Terminal& t, const GfmParams& p,
                                        const DroopELaw& law, double omega_ps = 0.0, double omega_frame = 0.0) {
    return detail::gfm_derivatives(s, t, p, droop_e_offset(p.p_set, s.p_m, law, p.omega_b), omega_ps, omega_frame);
}

inline GfmState gfm_static_droop_derivatives(const GfmState& s, const Terminal& t, const GfmParams& p,
                                             const StaticDroopLaw& law, double omega_ps = 0.0,
                                             double omega_frame = 0.0) {
    return detail::gfm_derivatives(s, t, p, static_droop_offset(p.p_set, s.p_m, law.d, p.omega_b), omega_ps,
                                   omega_frame);
}

// ---------------------------------------------------------------------------
// Voltage-behind-impedance interface
// ---------------------------------------------------------------------------

struct DeviceEmf {
    double e_d = 0.0;  // device frame
    double e_q = 0.0;
    double delta = 0.0;
    Complex z;  // coupling impedance, device base

    /// EMF phasor in the network frame.
    Complex global() const { return Complex(e_d, e_q) * rotation(delta); }
};

inline DeviceEmf device_emf_interface(const GfmState& s, const GfmParams& p) {
    return {p.e_d, p.e_q, s.delta, Complex(p.r, p.x)};
}

/// Two-axis machine seen from the network: the transient EMFs behind X'd.
/// The saliency term (X'q - X'd) Iq is folded into the d-axis EMF, so the
/// q-axis current must be supplied.
inline DeviceEmf device_emf_interface(const SgState& s, const SgParams& p, double i_q = 0.0) {
    return {s.ed_p + (p.xq_p - p.xd_p) * i_q, s.eq_p, s.delta, Complex(p.rs, p.xd_p)};
}

// ---------------------------------------------------------------------------
// Secondary power-sharing controller
// ---------------------------------------------------------------------------

struct PowerSharingParams {
    double k = 0.3;        // integrator gain, 1/s
    double eps_p = 0.01;   // pu power
    double eps_dp = 0.001; // pu power per second
    double d_static = 0.05;

    void validate() const {
        if (!(k > 0.0)) throw ArgumentError("power-sharing gain must be positive");
        if (!(eps_p > 0.0) || !(eps_dp > 0.0)) throw ArgumentError("power-sharing tolerances must be positive");
        if (!(d_static > 0.0)) throw ArgumentError("power-sharing reference droop must be positive");
    }

    bool operator==(const PowerSharingParams&) const = default;
};

enum class Gate { open, closed };

struct PowerSharingState {
    double omega_ps = 0.0;  // rad/s
    Gate gate = Gate::open;
    bool armed = false;
    double p_reference = 0.0;  // filtered power captured when the gate armed
};

struct PowerSharingUpdate {
    PowerSharingState state;
    double omega_static = 0.0;  // static-droop frequency for the present power
    double omega_error = 0.0;
    bool closed_now = false;
};

/// Static-droop frequency deviation for the given filtered power, rad/s.
inline double static_share_frequency(double p_set, double p_m, const PowerSharingParams& params, double omega_b) {
    return (p_set - p_m) * params.d_static * omega_b;
}

/// One accepted-step update of the power-sharing controller.
///
/// The gate arms on the first call, latching the filtered power as reference.
/// It closes once the filtered power has moved more than eps_p from that
/// reference while its rate has dropped below eps_dp, and stays closed. While
/// closed, omega_ps integrates k * (omega_5% - omega_delta - omega_ps).
inline PowerSharingUpdate power_sharing_update(const PowerSharingState& ps, const PowerSharingParams& params,
                                               double p_set, double p_m, double dp_dt, double omega_delta,
                                               double omega_b, double dt) {
    PowerSharingUpdate out;
    out.state = ps;
    if (!out.state.armed) {
        out.state.armed = true;
        out.state.p_reference = p_m;
    }
    out.omega_static = static_share_frequency(p_set, p_m, params, omega_b);
    out.omega_error = out.omega_static - omega_delta - out.state.omega_ps;
    if (out.state.gate == Gate::open && std::abs(p_m - out.state.p_reference) > params.eps_p &&
        std::abs(dp_dt) < params.eps_dp) {
        out.state.gate = Gate::closed;
        out.closed_now = true;
    }
    if (out.state.gate == Gate::closed) out.state.omega_ps += dt * params.k * out.omega_error;
    return out;
}

}  // namespace droope
