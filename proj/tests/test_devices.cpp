#include <random>

#include <gtest/gtest.h>

#include "droope.hpp"
#include "oracles.hpp"

using namespace droope;

namespace {

constexpr double kWb = kNominalRadPerSec;

// Terminal that makes the measured power of a device at angle delta equal p:
// unit voltage in phase with the q axis, so p = i_q.
Terminal terminal_for_power(double delta, double p) { return {1.0, delta, 0.0, p}; }

}  // namespace

TEST(DroopE, ZeroAtSetpoint) { EXPECT_EQ(droop_e_offset(0.2, 0.2, DroopELaw{}, kWb), 0.0); }

TEST(DroopE, HeadroomRayExamples) {
    EXPECT_NEAR(droop_e_offset(0.2, 0.696, DroopELaw{}, kWb), -4.711, 2e-3);
    EXPECT_NEAR(droop_e_offset(0.2, 0.454, DroopELaw{}, kWb), -1.571, 2e-3);
    EXPECT_NEAR(rad_per_sec_to_hz(droop_e_offset(0.2, 0.696, DroopELaw{}, kWb)), -0.75, 1e-3);
}

TEST(DroopE, LocalSlopeNearFivePercent) { EXPECT_NEAR(droop_e_slope(0.73, DroopELaw{}), 0.0536, 1e-4); }

TEST(DroopE, StrictlyDecreasingOverRandomPairs) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        const double p_set = u(rng);
        double a = u(rng);
        double b = u(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        EXPECT_GT(droop_e_offset(p_set, a, DroopELaw{}, kWb), droop_e_offset(p_set, b, DroopELaw{}, kWb))
            << "p_set " << p_set << " p_m " << a << ", " << b;
    }
}

TEST(DroopE, MatchesLinearLawToFirstOrder) {
    // Near p_set the exponential law behaves like a static droop with the local slope.
    const DroopELaw law;
    const double p_set = 0.4;
    for (double dp : {1e-3, 1e-4}) {
        const double exact = droop_e_offset(p_set, p_set + dp, law, kWb);
        const double linear = static_droop_offset(p_set, p_set + dp, droop_e_slope(p_set, law), kWb);
        EXPECT_NEAR(exact / linear, 1.0, 2.0 * law.beta * dp);
    }
}

TEST(GfmDynamics, SteadyStateAtSetpoint) {
    GfmParams p;
    p.p_set = 0.5;
    const GfmState s{0.2, 0.5};
    const GfmState d = gfm_droop_e_derivatives(s, terminal_for_power(0.2, 0.5), p, DroopELaw{});
    EXPECT_DOUBLE_EQ(d.delta, p.omega_set);
    EXPECT_NEAR(d.p_m, 0.0, 1e-12);
}

TEST(GfmDynamics, FilterRate) {
    GfmParams p;
    p.p_set = 0.5;
    const GfmState s{0.0, 0.5};
    const GfmState d = gfm_droop_e_derivatives(s, terminal_for_power(0.0, 0.6), p, DroopELaw{});
    EXPECT_NEAR(d.p_m, 5.99, 1e-2);
    EXPECT_NEAR(d.p_m, 0.1 / 0.0167, 1e-9);
}

TEST(GfmDynamics, MeasuredPowerProjection) {
    // V = 1.02 at 0.1 rad, device at 0.3 rad, currents (0.2, 0.7).
    const Terminal t{1.02, 0.1, 0.2, 0.7};
    const double expected = 1.02 * std::sin(0.2) * 0.2 + 1.02 * std::cos(0.2) * 0.7;
    EXPECT_NEAR(gfm_measured_power(GfmState{0.3, 0.0}, t), expected, 1e-14);
    // Same power from the network-frame phasors.
    const Complex v = std::polar(1.02, 0.1);
    const Complex i = Complex(0.2, 0.7) * rotation(0.3);
    EXPECT_NEAR((v * std::conj(i)).real(), expected, 1e-14);
}

TEST(StaticDroop, Examples) {
    EXPECT_NEAR(static_droop_offset(0.5, 0.25, 0.05, kWb), 4.712, 1e-3);
    EXPECT_NEAR(rad_per_sec_to_hz(static_droop_offset(0.5, 0.25, 0.05, kWb)), 0.75, 1e-12);
    EXPECT_NEAR(rad_per_sec_to_hz(static_droop_offset(0.3, 0.2, 0.01, kWb)), 0.06, 1e-12);

    GfmParams p;
    p.p_set = 0.3;
    const GfmState s{0.0, 0.9};
    const GfmState d = gfm_static_droop_derivatives(s, terminal_for_power(0.0, 0.9), p, StaticDroopLaw{0.0});
    EXPECT_DOUBLE_EQ(d.delta, p.omega_set);
}

TEST(SgDynamics, SwingAcceleration) {
    SgParams p;
    SgState s;
    s.delta = 0.0;
    s.pm = 0.6;
    // p_e = v_q i_q = 0.5 with the terminal aligned to the q axis.
    const Terminal t{1.0, 0.0, 0.0, 0.5};
    const SgState d = sg_derivatives(s, t, p, {});
    EXPECT_NEAR(d.omega, 0.1 * kWb / (2.0 * 3.01), 1e-10);
    EXPECT_NEAR(d.omega, 6.262, 1e-3);
    EXPECT_EQ(d.delta, 0.0);
}

TEST(SgDynamics, GovernorRate) {
    SgParams p;
    SgState s;
    s.omega = kWb * 1.00125;
    s.psv = 0.5;
    const SgState d = sg_derivatives(s, Terminal{}, p, SgSetpoints{0.5, 1.0});
    EXPECT_NEAR(d.psv, -0.025 / p.t_sv, 1e-10);
}

TEST(SgDynamics, InitializedMachineIsAtRest) {
    const Scenario sc = builtin_scenario("3bus-caseA");
    const PreparedCase c = prepare_case(sc);
    const auto& sys = c.system;
    const SgState s = sys.sg_state(0, c.start.x);
    const SgState d = sg_derivatives(s, sys.terminal(0, c.start.x, c.start.y), sys.device(0).sg, sys.sg_setpoints(0));
    for (double v : d.to_array()) EXPECT_LT(std::abs(v), 1e-8);
}

TEST(SgDynamics, FieldVoltageInversionMatchesBisection) {
    const SgParams p;
    for (double vr : {0.0, 0.5, 1.7, 3.2, 6.0}) {
        const double e = solve_field_voltage(vr, p);
        const double ref =
            oracle::bisect([&](double x) { return (p.ke + p.sat_gamma * std::exp(p.sat_epsilon * x)) * x - vr; }, 0.0,
                           10.0);
        EXPECT_NEAR(e, ref, 1e-10) << "V_R " << vr;
    }
    EXPECT_THROW(solve_field_voltage(-1.0, p), InitializationError);
}

TEST(PowerSharing, QuiescentGateStaysOpen) {
    PowerSharingState ps;
    const PowerSharingParams params;
    for (int k = 0; k < 1000; ++k) {
        const auto u = power_sharing_update(ps, params, 0.3, 0.3, 0.0, 0.0, kWb, 1e-3);
        ps = u.state;
        EXPECT_FALSE(u.closed_now);
    }
    EXPECT_EQ(ps.gate, Gate::open);
    EXPECT_EQ(ps.omega_ps, 0.0);
}

TEST(PowerSharing, ClosedGateIntegratesError) {
    PowerSharingState ps;
    ps.gate = Gate::closed;
    ps.armed = true;
    const PowerSharingParams params;
    const double dt = 1e-3;
    // p_set - p_m = 0.25 at 5% gives -4.712 rad/s; the law itself sits at -6.0.
    const auto u = power_sharing_update(ps, params, 0.0, 0.25, 0.0, -6.0, kWb, dt);
    EXPECT_NEAR(u.omega_static, -4.712, 1e-3);
    EXPECT_NEAR(u.omega_error, 1.288, 1e-3);
    EXPECT_NEAR(u.state.omega_ps, dt * 0.3 * u.omega_error, 1e-15);
}

TEST(PowerSharing, GateNeedsSettledExcursion) {
    PowerSharingState ps;
    const PowerSharingParams params;
    auto u = power_sharing_update(ps, params, 0.3, 0.3, 0.0, 0.0, kWb, 1e-3);  // arms at 0.3
    EXPECT_TRUE(u.state.armed);
    EXPECT_EQ(u.state.p_reference, 0.3);
    u = power_sharing_update(u.state, params, 0.3, 0.35, 0.5, 0.0, kWb, 1e-3);  // still moving
    EXPECT_EQ(u.state.gate, Gate::open);
    u = power_sharing_update(u.state, params, 0.3, 0.305, 0.0, 0.0, kWb, 1e-3);  // too small
    EXPECT_EQ(u.state.gate, Gate::open);
    u = power_sharing_update(u.state, params, 0.3, 0.35, 1e-4, 0.0, kWb, 1e-3);
    EXPECT_TRUE(u.closed_now);
    u = power_sharing_update(u.state, params, 0.3, 0.3, 1.0, 0.0, kWb, 1e-3);  // latched
    EXPECT_EQ(u.state.gate, Gate::closed);
    EXPECT_FALSE(u.closed_now);
}

TEST(PowerSharing, FixedPointRestoresStaticDroopFrequency) {
    // Iterate the controller against a frozen p_m: omega_ps converges to
    // omega_5% - omega_delta, so the total offset equals the static value.
    const PowerSharingParams params;
    const DroopELaw law;
    const double p_set = 0.05;
    const double p_m = 0.30;
    const double w_delta = droop_e_offset(p_set, p_m, law, kWb);
    PowerSharingState ps;
    ps.gate = Gate::closed;
    ps.armed = true;
    PowerSharingUpdate u;
    for (int k = 0; k < 200000; ++k) {
        u = power_sharing_update(ps, params, p_set, p_m, 0.0, w_delta, kWb, 1e-3);
        ps = u.state;
    }
    EXPECT_NEAR(w_delta + ps.omega_ps, static_droop_offset(p_set, p_m, 0.05, kWb), 1e-6);
}

TEST(EmfInterface, InverterImpedanceAndRotation) {
    GfmParams p;
    p.e_d = 0.1;
    p.e_q = 1.05;
    const DeviceEmf e = device_emf_interface(GfmState{std::numbers::pi / 2.0, 0.0}, p);
    EXPECT_EQ(e.z, Complex(0.005, 0.15));
    EXPECT_NEAR(std::abs(rotation(std::numbers::pi / 2.0) - Complex(1.0, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(e.global() - Complex(0.1, 1.05)), 0.0, 1e-15);
}

TEST(EmfInterface, MachineTransientEmf) {
    SgParams p;
    SgState s;
    s.delta = 0.4;
    s.eq_p = 1.1;
    s.ed_p = 0.2;
    const DeviceEmf e = device_emf_interface(s, p, 0.5);
    EXPECT_EQ(e.z, Complex(p.rs, p.xd_p));
    EXPECT_NEAR(e.e_d, 0.2 + (p.xq_p - p.xd_p) * 0.5, 1e-15);
    EXPECT_EQ(e.e_q, 1.1);
    // Consistency with the stator equations: V = E - Z I in the machine frame.
    const Complex i_dq(0.3, 0.5);
    const Complex v_dq = Complex(e.e_d, e.e_q) - e.z * i_dq;
    const Complex v = v_dq * rotation(s.delta);
    const Terminal t{std::abs(v), std::arg(v), i_dq.real(), i_dq.imag()};
    const auto r = sg_stator_residual(s, t, p);
    EXPECT_NEAR(r[0], 0.0, 1e-12);
    EXPECT_NEAR(r[1], 0.0, 1e-12);
}

TEST(DeviceDerivatives, PostStepDerivativeMatchesIntegratorDifference) {
    // Right after the case A load step, the model derivative should agree with
    // a tiny integrator step taken from the same consistent point.
    const Scenario sc = builtin_scenario("3bus-caseA");
    PreparedCase c = prepare_case(sc);
    Simulator sim(c.system, c.start);
    sim.apply(sc.events.front());
    const Vector x0 = sim.point().x;
    const Vector d = sim.system().f(x0, sim.point().y);
    const double h = 1e-6;
    sim.step(h);
    const Vector fd = (sim.point().x - x0) / h;
    EXPECT_LT((fd - d).lpNorm<Eigen::Infinity>(), 1e-3 * std::max(1.0, d.lpNorm<Eigen::Infinity>()));
    EXPECT_GT(d.lpNorm<Eigen::Infinity>(), 1e-3);  // the step did disturb the system
}
