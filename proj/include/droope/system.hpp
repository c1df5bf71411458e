#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "droope/devices.hpp"
#include "droope/network.hpp"
#include "droope/types.hpp"

namespace droope {

enum class DeviceKind { sg, gfm_droop_e, gfm_static };

inline const char* to_string(DeviceKind k) {
    switch (k) {
        case DeviceKind::sg: return "sg";
        case DeviceKind::gfm_droop_e: return "gfm_droop_e";
        case DeviceKind::gfm_static: return "gfm_static";
    }
    return "?";
}

/// A dynamic device attached to one bus.
struct DeviceSpec {
    std::string name;
    int bus = 0;
    DeviceKind kind = DeviceKind::sg;
    double p_dispatch = 0.0;  // pu, device base
    SgParams sg;
    GfmParams gfm;
    DroopELaw droop_e;
    StaticDroopLaw static_droop;
    std::optional<PowerSharingParams> sharing;

    bool is_gfm() const { return kind != DeviceKind::sg; }
    double rating_mva() const { return is_gfm() ? gfm.rating_mva : sg.rating_mva; }
    /// Mechanical inertia constant; inverters carry none.
    double inertia() const { return is_gfm() ? 0.0 : sg.h; }

    void validate() const {
        if (name.empty()) throw ArgumentError("device needs a name");
        if (is_gfm()) {
            gfm.validate();
            if (kind == DeviceKind::gfm_droop_e) droop_e.validate();
            else static_droop.validate();
        } else {
            sg.validate();
        }
        if (sharing) {
            if (kind != DeviceKind::gfm_droop_e)
                throw ArgumentError("power sharing is only defined for droop-e inverters (" + name + ")");
            sharing->validate();
        }
    }

    bool operator==(const DeviceSpec&) const = default;
};

/// Differential and algebraic variables at one instant.
struct SystemPoint {
    Vector x;
    Vector y;
};

/// Full differential-algebraic model of a network with its devices.
///
/// x concatenates the device states in device order (9 per generator, 2 per
/// inverter). y holds the rectangular bus voltages (re, im per bus, system
/// base) followed by the d/q stator currents of each generator (device base).
class DynamicSystem {
  public:
    DynamicSystem(NetworkModel network, std::vector<DeviceSpec> devices)
        : network_(std::move(network)), devices_(std::move(devices)) {
        network_.validate();
        y_bus_ = build_admittance(network_);
        const std::size_t n_bus = network_.size();
        std::size_t xo = 0;
        std::size_t yo = 2 * n_bus;
        for (const auto& d : devices_) {
            d.validate();
            for (const auto& other : devices_)
                if (&other != &d && other.name == d.name) throw ArgumentError("duplicate device name " + d.name);
            Slot s;
            s.bus = network_.index_of(d.bus);
            s.x = xo;
            xo += d.is_gfm() ? GfmState::size : SgState::size;
            if (!d.is_gfm()) {
                s.i = yo;
                yo += 2;
            }
            slots_.push_back(s);
        }
        for (std::size_t a = 0; a < slots_.size(); ++a)
            for (std::size_t b = a + 1; b < slots_.size(); ++b)
                if (slots_[a].bus == slots_[b].bus)
                    throw ArgumentError("at most one device per bus (bus " + std::to_string(devices_[a].bus) + ")");
        n_x_ = xo;
        n_y_ = yo;
        sg_setpoints_.assign(devices_.size(), SgSetpoints{});
        omega_ps_.assign(devices_.size(), 0.0);
        load_ = network_.load_vector();
    }

    std::size_t n_states() const { return n_x_; }
    std::size_t n_algebraic() const { return n_y_; }
    std::size_t n_devices() const { return devices_.size(); }
    const std::vector<DeviceSpec>& devices() const { return devices_; }
    const DeviceSpec& device(std::size_t i) const { return devices_[i]; }
    const NetworkModel& network() const { return network_; }
    double system_mva() const { return network_.bases.system_mva; }
    double omega_s() const { return network_.bases.base_rad_per_s; }

    std::size_t state_offset(std::size_t dev) const { return slots_[dev].x; }
    std::size_t bus_index(std::size_t dev) const { return slots_[dev].bus; }

    std::vector<std::string> state_labels() const {
        std::vector<std::string> labels;
        for (const auto& d : devices_) {
            if (d.is_gfm())
                for (auto n : kGfmStateNames) labels.push_back(d.name + "." + n);
            else
                for (auto n : kSgStateNames) labels.push_back(d.name + "." + n);
        }
        return labels;
    }

    /// Indices of rotor/inverter angle states (the rotational direction).
    std::vector<std::size_t> angle_states() const {
        std::vector<std::size_t> idx;
        for (const auto& s : slots_) idx.push_back(s.x);
        return idx;
    }

    // -- exogenous inputs -------------------------------------------------

    const SgSetpoints& sg_setpoints(std::size_t dev) const { return sg_setpoints_[dev]; }
    void set_sg_setpoints(std::size_t dev, const SgSetpoints& u) { sg_setpoints_[dev] = u; }
    double omega_ps(std::size_t dev) const { return omega_ps_[dev]; }
    void set_omega_ps(std::size_t dev, double w) { omega_ps_[dev] = w; }
    GfmParams& gfm_params(std::size_t dev) { return devices_[dev].gfm; }

    const ComplexVector& loads() const { return load_; }
    void add_load(int bus_id, Complex ds) { load_(static_cast<Eigen::Index>(network_.index_of(bus_id))) += ds; }
    void set_loads(const ComplexVector& s) { load_ = s; }

    // -- evaluation -------------------------------------------------------

    ComplexVector bus_voltages(const Vector& y) const {
        const auto n = static_cast<Eigen::Index>(network_.size());
        ComplexVector v(n);
        for (Eigen::Index k = 0; k < n; ++k) v(k) = Complex(y(2 * k), y(2 * k + 1));
        return v;
    }

    /// Device current in the network frame on device base.
    Complex device_current(std::size_t dev, const Vector& x, const Vector& y) const {
        const auto& d = devices_[dev];
        const auto& s = slots_[dev];
        if (d.is_gfm()) {
            const GfmState g = gfm_state(dev, x);
            const Complex v = bus_voltage(s.bus, y);
            return (device_emf_interface(g, d.gfm).global() - v) / Complex(d.gfm.r, d.gfm.x);
        }
        const double delta = x(static_cast<Eigen::Index>(s.x));
        return Complex(y(static_cast<Eigen::Index>(s.i)), y(static_cast<Eigen::Index>(s.i + 1))) * rotation(delta);
    }

    Terminal terminal(std::size_t dev, const Vector& x, const Vector& y) const {
        const auto& s = slots_[dev];
        const Complex v = bus_voltage(s.bus, y);
        const double delta = x(static_cast<Eigen::Index>(s.x));
        Terminal t{std::abs(v), std::arg(v), 0.0, 0.0};
        if (devices_[dev].is_gfm()) {
            const Complex idq = device_current(dev, x, y) * std::conj(rotation(delta));
            t.i_d = idq.real();
            t.i_q = idq.imag();
        } else {
            t.i_d = y(static_cast<Eigen::Index>(s.i));
            t.i_q = y(static_cast<Eigen::Index>(s.i + 1));
        }
        return t;
    }

    GfmState gfm_state(std::size_t dev, const Vector& x) const {
        const auto o = static_cast<Eigen::Index>(slots_[dev].x);
        return {x(o), x(o + 1)};
    }

    SgState sg_state(std::size_t dev, const Vector& x) const {
        std::array<double, SgState::size> a{};
        const auto o = static_cast<Eigen::Index>(slots_[dev].x);
        for (std::size_t k = 0; k < a.size(); ++k) a[k] = x(o + static_cast<Eigen::Index>(k));
        return SgState::from_array(a);
    }

    /// Complex power leaving the device terminal, device base.
    Complex device_power(std::size_t dev, const Vector& x, const Vector& y) const {
        return bus_voltage(slots_[dev].bus, y) * std::conj(device_current(dev, x, y));
    }

    double to_system_base(std::size_t dev) const { return devices_[dev].rating_mva() / system_mva(); }

    /// Frequency offset of an inverter's primary law at filtered power p_m, rad/s.
    double gfm_law_offset(std::size_t dev, double p_m) const {
        const auto& d = devices_[dev];
        return d.kind == DeviceKind::gfm_droop_e ? droop_e_offset(d.gfm.p_set, p_m, d.droop_e, d.gfm.omega_b)
                                                 : static_droop_offset(d.gfm.p_set, p_m, d.static_droop.d,
                                                                       d.gfm.omega_b);
    }

    /// Device electrical frequency (rotor speed or inverter output), rad/s.
    double device_frequency(std::size_t dev, const Vector& x) const {
        const auto& d = devices_[dev];
        if (!d.is_gfm()) return sg_state(dev, x).omega;
        return d.gfm.omega_set + gfm_law_offset(dev, gfm_state(dev, x).p_m) + omega_ps_[dev];
    }

    /// Differential right-hand side. Angles are measured in a frame rotating
    /// at `omega_frame`.
    Vector f(const Vector& x, const Vector& y, std::optional<double> omega_frame = std::nullopt) const {
        const double wf = omega_frame.value_or(omega_s());
        Vector dx(static_cast<Eigen::Index>(n_x_));
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            const auto& d = devices_[i];
            const auto o = static_cast<Eigen::Index>(slots_[i].x);
            const Terminal t = terminal(i, x, y);
            if (d.is_gfm()) {
                const GfmState s = gfm_state(i, x);
                const GfmState ds = d.kind == DeviceKind::gfm_droop_e
                                        ? gfm_droop_e_derivatives(s, t, d.gfm, d.droop_e, omega_ps_[i], wf)
                                        : gfm_static_droop_derivatives(s, t, d.gfm, d.static_droop, omega_ps_[i], wf);
                dx(o) = ds.delta;
                dx(o + 1) = ds.p_m;
            } else {
                const auto ds = sg_derivatives(sg_state(i, x), t, d.sg, sg_setpoints_[i], omega_s(), wf).to_array();
                for (std::size_t k = 0; k < ds.size(); ++k) dx(o + static_cast<Eigen::Index>(k)) = ds[k];
            }
        }
        return dx;
    }

    /// Algebraic residual: bus current balance (re, im) then generator stator
    /// equations.
    Vector g(const Vector& x, const Vector& y) const {
        Vector r(static_cast<Eigen::Index>(n_y_));
        const ComplexVector v = bus_voltages(y);
        ComplexVector mismatch = -(y_bus_ * v);
        for (Eigen::Index k = 0; k < v.size(); ++k)
            if (load_(k) != Complex(0.0, 0.0)) mismatch(k) -= std::conj(load_(k) / v(k));
        for (std::size_t i = 0; i < devices_.size(); ++i)
            mismatch(static_cast<Eigen::Index>(slots_[i].bus)) += device_current(i, x, y) * to_system_base(i);
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            r(2 * k) = mismatch(k).real();
            r(2 * k + 1) = mismatch(k).imag();
        }
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            if (devices_[i].is_gfm()) continue;
            const auto res = sg_stator_residual(sg_state(i, x), terminal(i, x, y), devices_[i].sg);
            const auto o = static_cast<Eigen::Index>(slots_[i].i);
            r(o) = res[0];
            r(o + 1) = res[1];
        }
        return r;
    }

    /// Generation minus load minus series losses, system base (active power).
    double power_balance(const Vector& x, const Vector& y) const {
        double gen = 0.0;
        for (std::size_t i = 0; i < devices_.size(); ++i) gen += device_power(i, x, y).real() * to_system_base(i);
        return gen - load_.real().sum() - branch_losses(network_, bus_voltages(y));
    }

    // -- initialization ----------------------------------------------------

    /// Back-solves every device state from a power-flow solution so that all
    /// derivatives vanish, and fixes the matching exogenous setpoints.
    SystemPoint initialize(const PowerFlowSolution& pf) {
        if (static_cast<std::size_t>(pf.v.size()) != network_.size())
            throw ArgumentError("power-flow solution does not match the network");
        SystemPoint p{Vector::Zero(static_cast<Eigen::Index>(n_x_)), Vector::Zero(static_cast<Eigen::Index>(n_y_))};
        for (std::size_t k = 0; k < network_.size(); ++k) {
            const Complex v = pf.voltage(k);
            p.y(static_cast<Eigen::Index>(2 * k)) = v.real();
            p.y(static_cast<Eigen::Index>(2 * k + 1)) = v.imag();
        }
        const ComplexVector s_bus = bus_power(y_bus_, bus_voltages(p.y)) + load_;
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            auto& d = devices_[i];
            const auto& slot = slots_[i];
            const Complex v = pf.voltage(slot.bus);
            const Complex s_dev = s_bus(static_cast<Eigen::Index>(slot.bus)) / to_system_base(i);
            const Complex cur = std::conj(s_dev / v);
            const auto o = static_cast<Eigen::Index>(slot.x);
            if (d.is_gfm()) {
                const Complex e = v + Complex(d.gfm.r, d.gfm.x) * cur;
                d.gfm.e_d = 0.0;
                d.gfm.e_q = std::abs(e);
                d.gfm.p_set = s_dev.real();
                d.gfm.omega_set = omega_s();
                p.x(o) = std::arg(e);
                p.x(o + 1) = s_dev.real();
                omega_ps_[i] = 0.0;
            } else {
                const SgParams& m = d.sg;
                const double delta = std::arg(v + Complex(m.rs, m.xq) * cur);
                const Complex idq = cur * std::conj(rotation(delta));
                const auto [vd, vq] = dq_voltage(std::abs(v), std::arg(v), delta);
                SgState st;
                st.delta = delta;
                st.omega = omega_s();
                st.ed_p = vd + m.rs * idq.real() - m.xq_p * idq.imag();
                st.eq_p = vq + m.rs * idq.imag() + m.xd_p * idq.real();
                st.efd = st.eq_p + (m.xd - m.xd_p) * idq.real();
                st.vr = (m.ke + saturation(st.efd, m)) * st.efd;
                if (st.vr > m.vr_max) {
                    const double efd_max = solve_field_voltage(m.vr_max, m);
                    throw InitializationError("generator " + d.name + " needs field voltage " +
                                              std::to_string(st.efd) + " above the exciter ceiling " +
                                              std::to_string(efd_max));
                }
                st.rf = m.kf / m.tf * st.efd;
                const double pe = vd * idq.real() + vq * idq.imag();
                st.pm = pe;
                st.psv = pe;
                sg_setpoints_[i] = {pe, std::abs(v) + st.vr / m.ka};
                const auto a = st.to_array();
                for (std::size_t k = 0; k < a.size(); ++k) p.x(o + static_cast<Eigen::Index>(k)) = a[k];
                p.y(static_cast<Eigen::Index>(slot.i)) = idq.real();
                p.y(static_cast<Eigen::Index>(slot.i + 1)) = idq.imag();
            }
        }
        return p;
    }

    /// Newton solve of g(x, y) = 0 for y with x frozen.
    Vector solve_algebraic(const Vector& x, Vector y, double t = 0.0, double tol = 1e-11, int max_iter = 30) const {
        for (int it = 0; it < max_iter; ++it) {
            const Vector r = g(x, y);
            const double norm = r.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(norm)) break;
            if (norm < tol) return y;
            const Matrix jac = jacobian_y(x, y);
            Eigen::PartialPivLU<Matrix> lu(jac);
            y -= lu.solve(r);
        }
        const Vector r = g(x, y);
        if (r.lpNorm<Eigen::Infinity>() < tol) return y;
        throw AlgebraicError("network algebraic solve failed at t = " + std::to_string(t) + " (residual " +
                                 std::to_string(r.lpNorm<Eigen::Infinity>()) + ")",
                             t);
    }

    /// Central-difference Jacobian of g with respect to y.
    Matrix jacobian_y(const Vector& x, Vector y) const {
        Matrix j(static_cast<Eigen::Index>(n_y_), static_cast<Eigen::Index>(n_y_));
        for (Eigen::Index c = 0; c < y.size(); ++c) {
            const double v0 = y(c);
            const double h = 1e-7 * std::max(1.0, std::abs(v0));
            y(c) = v0 + h;
            const Vector gp = g(x, y);
            y(c) = v0 - h;
            const Vector gm = g(x, y);
            y(c) = v0;
            j.col(c) = (gp - gm) / (2.0 * h);
        }
        return j;
    }

  private:
    struct Slot {
        std::size_t bus = 0;
        std::size_t x = 0;
        std::size_t i = 0;  // offset of stator currents in y (generators only)
    };

    Complex bus_voltage(std::size_t k, const Vector& y) const {
        return {y(static_cast<Eigen::Index>(2 * k)), y(static_cast<Eigen::Index>(2 * k + 1))};
    }

    NetworkModel network_;
    std::vector<DeviceSpec> devices_;
    ComplexMatrix y_bus_;
    std::vector<Slot> slots_;
    std::size_t n_x_ = 0;
    std::size_t n_y_ = 0;
    std::vector<SgSetpoints> sg_setpoints_;
    std::vector<double> omega_ps_;
    ComplexVector load_;
};

/// Power-flow dispatch implied by the device list (system base).
inline std::vector<Injection> device_dispatch(const std::vector<DeviceSpec>& devices, double system_mva) {
    std::vector<Injection> out;
    for (const auto& d : devices) out.push_back({d.bus, d.p_dispatch * d.rating_mva() / system_mva});
    return out;
}

struct EquilibriumResult {
    SystemPoint point;
    double frequency_shift = 0.0;  // common speed deviation of the frame, rad/s
    double residual = 0.0;
    int iterations = 0;
};

/// Newton solve of the full steady-state conditions f = 0, g = 0 in a frame
/// rotating at omega_s + dw, with dw unknown and the angle of state
/// `pinned_state` held at its initial value (angles are otherwise defined only
/// up to a common rotation).
inline EquilibriumResult solve_equilibrium(const DynamicSystem& sys, const SystemPoint& start,
                                           std::size_t pinned_state, double tol = 1e-10, int max_iter = 50) {
    const auto nx = static_cast<Eigen::Index>(sys.n_states());
    const auto ny = static_cast<Eigen::Index>(sys.n_algebraic());
    const Eigen::Index n = nx + ny + 1;
    const double pin = start.x(static_cast<Eigen::Index>(pinned_state));
    auto residual = [&](const Vector& z) {
        Vector r(n);
        const Vector x = z.head(nx);
        const Vector y = z.segment(nx, ny);
        r.head(nx) = sys.f(x, y, sys.omega_s() + z(n - 1));
        r.segment(nx, ny) = sys.g(x, y);
        r(n - 1) = x(static_cast<Eigen::Index>(pinned_state)) - pin;
        return r;
    };
    Vector z(n);
    z << start.x, start.y, 0.0;
    EquilibriumResult out;
    for (int it = 0; it <= max_iter; ++it) {
        Vector r = residual(z);
        const double norm = r.lpNorm<Eigen::Infinity>();
        out.residual = norm;
        out.iterations = it;
        if (norm < tol) {
            out.point = {z.head(nx), z.segment(nx, ny)};
            out.frequency_shift = z(n - 1);
            return out;
        }
        if (!std::isfinite(norm) || it == max_iter) break;
        Matrix jac(n, n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double v0 = z(c);
            const double h = 1e-7 * std::max(1.0, std::abs(v0));
            z(c) = v0 + h;
            const Vector rp = residual(z);
            z(c) = v0 - h;
            const Vector rm = residual(z);
            z(c) = v0;
            jac.col(c) = (rp - rm) / (2.0 * h);
        }
        z -= jac.fullPivLu().solve(r);
    }
    throw ConvergenceError("equilibrium solve did not converge (residual " + std::to_string(out.residual) + ")",
                           out.residual);
}

}  // namespace droope
