#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "droope/format.hpp"
#include "droope/system.hpp"
#include "droope/types.hpp"

namespace droope {

enum class EventKind { load_step, release_dynamics, gate_armed, gate_closed };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::load_step: return "load_step";
        case EventKind::release_dynamics: return "release_dynamics";
        case EventKind::gate_armed: return "gate_armed";
        case EventKind::gate_closed: return "gate_closed";
    }
    return "?";
}

/// Scheduled or logged event. Load-step magnitudes are pu on system base.
struct Event {
    double t = 0.0;
    EventKind kind = EventKind::load_step;
    int bus = 0;
    double dp = 0.0;
    double dq = 0.0;
    std::string device;  // for controller events

    bool operator==(const Event&) const = default;
};

struct SimulationOptions {
    double dt = 1e-3;
    double t_end = 20.0;
    double newton_tolerance = 1e-9;
    int max_newton_iterations = 8;
    int max_halvings = 4;
};

struct DeviceTrace {
    std::string name;
    std::vector<double> f_hz;
    std::vector<double> p_dev;  // terminal active power, device base
    std::vector<double> p_sys;  // terminal active power, system base
    std::vector<double> p_filtered;  // inverter filtered power (empty for generators)
    std::vector<double> omega_ps;    // power-sharing offset, rad/s
};

struct BusTrace {
    int id = 0;
    std::vector<double> v;
    std::vector<double> theta;
};

struct SimulationTrace {
    std::vector<double> t;
    std::vector<DeviceTrace> devices;
    std::vector<BusTrace> buses;
    std::vector<Event> events;
    std::vector<double> power_balance;  // per accepted step, pu system base
    double final_algebraic_residual = 0.0;

    const DeviceTrace& device(const std::string& name) const {
        for (const auto& d : devices)
            if (d.name == name) return d;
        throw ArgumentError("trace has no device " + name);
    }

    /// Time of the first event of a kind, if any.
    std::optional<double> first_event(EventKind kind) const {
        for (const auto& e : events)
            if (e.kind == kind) return e.t;
        return std::nullopt;
    }
};

/// Back-solves a consistent dynamic start from a power flow and checks that
/// every derivative vanishes at release.
inline SystemPoint release_dynamics(DynamicSystem& sys, const PowerFlowSolution& pf, double tolerance = 1e-8) {
    SystemPoint p = sys.initialize(pf);
    p.y = sys.solve_algebraic(p.x, p.y);
    const double norm = sys.f(p.x, p.y).lpNorm<Eigen::Infinity>();
    if (!(norm < tolerance))
        throw InitializationError("released state is not an equilibrium (max |dx/dt| = " + std::to_string(norm) + ")");
    return p;
}

/// Implicit trapezoidal rule for a semi-explicit DAE x' = f(x, y), 0 = g(x, y),
/// with the algebraic equations solved simultaneously by Newton's method.
///
/// The Newton matrix is built by finite differences and reused across steps
/// until convergence slows or `invalidate` is called.
class TrapezoidalDae {
  public:
    explicit TrapezoidalDae(SimulationOptions options = {}) : options_(options) {}

    void invalidate() { lu_.reset(); }

    /// Advances (x, y) by h, halving internally on Newton failure. Returns
    /// false (with x, y untouched) when the step cannot be completed.
    template <class F, class G>
    bool step(Vector& x, Vector& y, double h, const F& f, const G& g) {
        return advance(x, y, h, 0, f, g);
    }

  private:
    template <class F, class G>
    void factorize(const Vector& z, Eigen::Index nx, double h, const F& f, const G& g) {
        const Eigen::Index n = z.size();
        Matrix j(n, n);
        Vector zz = z;
        Vector fp(n), fm(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const double v0 = zz(c);
            const double eps = 1e-7 * std::max(1.0, std::abs(v0));
            zz(c) = v0 + eps;
            fp << f(zz.head(nx), zz.tail(n - nx)), g(zz.head(nx), zz.tail(n - nx));
            zz(c) = v0 - eps;
            fm << f(zz.head(nx), zz.tail(n - nx)), g(zz.head(nx), zz.tail(n - nx));
            zz(c) = v0;
            j.col(c) = (fp - fm) / (2.0 * eps);
        }
        j.topRows(nx) *= -0.5 * h;
        j.topLeftCorner(nx, nx).diagonal().array() += 1.0;
        lu_.emplace(j);
        lu_h_ = h;
    }

    template <class F, class G>
    bool newton(Vector& x, Vector& y, double h, const F& f, const G& g) {
        const Eigen::Index nx = x.size();
        const Eigen::Index n = nx + y.size();
        const Vector f0 = f(x, y);
        Vector z(n);
        z << x + h * f0, y;
        auto residual = [&](const Vector& zi) {
            Vector r(n);
            const Vector xi = zi.head(nx);
            const Vector yi = zi.tail(n - nx);
            r << xi - x - 0.5 * h * (f(xi, yi) + f0), g(xi, yi);
            return r;
        };
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (!lu_ || lu_h_ != h || attempt == 1) factorize(z, nx, h, f, g);
            Vector zi = z;
            double prev = std::numeric_limits<double>::infinity();
            for (int it = 0; it < options_.max_newton_iterations; ++it) {
                const Vector r = residual(zi);
                const double norm = r.lpNorm<Eigen::Infinity>();
                if (!std::isfinite(norm)) break;
                if (norm < options_.newton_tolerance) {
                    x = zi.head(nx);
                    y = zi.tail(n - nx);
                    return true;
                }
                if (it > 2 && norm > 0.5 * prev) break;
                prev = norm;
                zi -= lu_->solve(r);
            }
            if (attempt == 0) lu_.reset();
        }
        return false;
    }

    template <class F, class G>
    bool advance(Vector& x, Vector& y, double h, int depth, const F& f, const G& g) {
        const Vector x0 = x;
        const Vector y0 = y;
        if (newton(x, y, h, f, g)) return true;
        x = x0;
        y = y0;
        if (depth >= options_.max_halvings) return false;
        if (advance(x, y, 0.5 * h, depth + 1, f, g) && advance(x, y, 0.5 * h, depth + 1, f, g)) return true;
        x = x0;
        y = y0;
        return false;
    }

    SimulationOptions options_;
    std::optional<Eigen::PartialPivLU<Matrix>> lu_;
    double lu_h_ = 0.0;
};

/// Fixed-step simulation of a DynamicSystem with load-step events and the
/// power-sharing controllers.
class Simulator {
  public:
    Simulator(DynamicSystem sys, SystemPoint start, SimulationOptions options = {})
        : sys_(std::move(sys)), point_(std::move(start)), options_(options), integrator_(options) {
        if (!(options_.dt > 0.0)) throw ArgumentError("time step must be positive");
        sharing_.resize(sys_.n_devices());
        for (std::size_t i = 0; i < sys_.n_devices(); ++i)
            if (sys_.device(i).sharing) sharing_[i] = PowerSharingState{};
    }

    const DynamicSystem& system() const { return sys_; }
    DynamicSystem& system() { return sys_; }
    const SystemPoint& point() const { return point_; }
    double time() const { return t_; }
    const std::optional<PowerSharingState>& sharing_state(std::size_t dev) const { return sharing_[dev]; }

    /// Advances by `dt` (may be negative), halving internally on Newton
    /// failure. Throws NumericError when the step cannot be completed.
    void step(double dt) {
        const auto f = [this](const Vector& x, const Vector& y) { return sys_.f(x, y); };
        const auto g = [this](const Vector& x, const Vector& y) { return sys_.g(x, y); };
        if (!integrator_.step(point_.x, point_.y, dt, f, g))
            throw NumericError("time step failed at t = " + std::to_string(t_) + " after " +
                               std::to_string(options_.max_halvings) + " halvings");
        t_ += dt;
    }

    /// Applies a load step at the current time and restores algebraic
    /// consistency. Returns false for a null event.
    bool apply(const Event& e) {
        if (e.kind != EventKind::load_step) return false;
        if (e.dp == 0.0 && e.dq == 0.0) return false;
        sys_.add_load(e.bus, Complex(e.dp, e.dq));
        point_.y = sys_.solve_algebraic(point_.x, point_.y, t_);
        integrator_.invalidate();
        return true;
    }

    /// Runs the power-sharing logic on the current accepted state.
    void update_controllers(double dt, std::vector<Event>* log) {
        for (std::size_t i = 0; i < sys_.n_devices(); ++i) {
            if (!sharing_[i]) continue;
            const auto& d = sys_.device(i);
            const GfmState s = sys_.gfm_state(i, point_.x);
            const Terminal term = sys_.terminal(i, point_.x, point_.y);
            const double dp_dt = (gfm_measured_power(s, term) - s.p_m) / d.gfm.t_fil;
            const double w_delta = droop_e_offset(d.gfm.p_set, s.p_m, d.droop_e, d.gfm.omega_b);
            const bool was_armed = sharing_[i]->armed;
            const auto upd = power_sharing_update(*sharing_[i], *d.sharing, d.gfm.p_set, s.p_m, dp_dt, w_delta,
                                                  d.gfm.omega_b, dt);
            sharing_[i] = upd.state;
            sys_.set_omega_ps(i, upd.state.omega_ps);
            if (log && !was_armed) log->push_back({t_, EventKind::gate_armed, 0, 0.0, 0.0, d.name});
            if (log && upd.closed_now) log->push_back({t_, EventKind::gate_closed, 0, 0.0, 0.0, d.name});
        }
    }

    /// Integrates to `t_end`, applying events at grid points.
    SimulationTrace run(std::vector<Event> events, double t_end) {
        const double dt = options_.dt;
        const auto n_steps = static_cast<long>(std::llround((t_end - t_) / dt));
        std::vector<std::pair<long, Event>> scheduled;
        for (const auto& e : events) {
            if (e.kind != EventKind::load_step) continue;
            const double k = (e.t - t_) / dt;
            const long kr = std::lround(k);
            if (std::abs(k - static_cast<double>(kr)) > 1e-6 || kr < 0)
                throw ArgumentError("event time " + std::to_string(e.t) + " is not on the simulation grid");
            scheduled.emplace_back(kr, e);
        }
        std::stable_sort(scheduled.begin(), scheduled.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        SimulationTrace trace;
        for (const auto& d : sys_.devices()) trace.devices.push_back({d.name, {}, {}, {}, {}, {}});
        for (const auto& b : sys_.network().buses) trace.buses.push_back({b.id, {}, {}});
        trace.events.push_back({t_, EventKind::release_dynamics, 0, 0.0, 0.0, {}});

        const double t0 = t_;
        std::size_t next_event = 0;
        for (long k = 0; k <= n_steps; ++k) {
            if (k > 0) {
                step(dt);
                t_ = t0 + static_cast<double>(k) * dt;
                trace.power_balance.push_back(sys_.power_balance(point_.x, point_.y));
            }
            while (next_event < scheduled.size() && scheduled[next_event].first == k) {
                Event e = scheduled[next_event].second;
                e.t = t_;
                apply(e);
                trace.events.push_back(e);
                ++next_event;
            }
            update_controllers(dt, &trace.events);
            record(trace);
        }
        trace.final_algebraic_residual = sys_.g(point_.x, point_.y).lpNorm<Eigen::Infinity>();
        return trace;
    }

  private:
    void record(SimulationTrace& trace) const {
        trace.t.push_back(t_);
        for (std::size_t i = 0; i < sys_.n_devices(); ++i) {
            auto& dt = trace.devices[i];
            const double p = sys_.device_power(i, point_.x, point_.y).real();
            dt.f_hz.push_back(rad_per_sec_to_hz(sys_.device_frequency(i, point_.x)));
            dt.p_dev.push_back(p);
            dt.p_sys.push_back(p * sys_.to_system_base(i));
            if (sys_.device(i).is_gfm()) dt.p_filtered.push_back(sys_.gfm_state(i, point_.x).p_m);
            dt.omega_ps.push_back(sys_.omega_ps(i));
        }
        const ComplexVector v = sys_.bus_voltages(point_.y);
        for (std::size_t k = 0; k < trace.buses.size(); ++k) {
            trace.buses[k].v.push_back(std::abs(v(static_cast<Eigen::Index>(k))));
            trace.buses[k].theta.push_back(std::arg(v(static_cast<Eigen::Index>(k))));
        }
    }

    DynamicSystem sys_;
    SystemPoint point_;
    SimulationOptions options_;
    TrapezoidalDae integrator_;
    double t_ = 0.0;
    std::vector<std::optional<PowerSharingState>> sharing_;
};

/// Trace CSV: t, then per device f_hz, p_pu_dev, p_pu_sys, then per bus v, theta.
inline void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
    os << 't';
    for (const auto& d : trace.devices)
        os << ",dev_" << d.name << "_f_hz,dev_" << d.name << "_p_pu_dev,dev_" << d.name << "_p_pu_sys";
    for (const auto& b : trace.buses) os << ",bus_" << b.id << "_v,bus_" << b.id << "_theta";
    os << '\n';
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        os << format_double(trace.t[k]);
        for (const auto& d : trace.devices)
            os << ',' << format_double(d.f_hz[k]) << ',' << format_double(d.p_dev[k]) << ','
               << format_double(d.p_sys[k]);
        for (const auto& b : trace.buses) os << ',' << format_double(b.v[k]) << ',' << format_double(b.theta[k]);
        os << '\n';
    }
}

}  // namespace droope
