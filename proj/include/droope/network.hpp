#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "droope/types.hpp"

namespace droope {

enum class BusKind { slack, pv, pq };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    std::optional<double> voltage_setpoint;  // pu, slack and pv buses
    double base_kv = 1.0;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int from = 0;
    int to = 0;
    double reactance = 0.0;   // pu, system base
    double resistance = 0.0;  // pu, system base

    bool operator==(const Branch&) const = default;
};

struct ConstantPowerLoad {
    int bus = 0;
    double p = 0.0;  // pu, system base, consumption positive
    double q = 0.0;

    bool operator==(const ConstantPowerLoad&) const = default;
};

struct PerUnitBases {
    double system_mva = 100.0;
    std::map<std::string, double> device_mva;
    double base_rad_per_s = kNominalRadPerSec;

    bool operator==(const PerUnitBases&) const = default;
};

/// Static network: buses, series branches and constant-power loads.
///
/// Buses are addressed by id in the public data and by dense index (position in
/// `buses`) inside the solvers.
struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<ConstantPowerLoad> loads;
    PerUnitBases bases;

    std::size_t size() const { return buses.size(); }

    std::size_t index_of(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return i;
        throw TopologyError("unknown bus id " + std::to_string(bus_id));
    }

    std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::slack) return i;
        throw TopologyError("network has no slack bus");
    }

    /// Total load per bus index (consumption positive).
    ComplexVector load_vector() const {
        ComplexVector s = ComplexVector::Zero(static_cast<Eigen::Index>(size()));
        for (const auto& l : loads) s(static_cast<Eigen::Index>(index_of(l.bus))) += Complex(l.p, l.q);
        return s;
    }

    /// Structural checks shared by every solver entry point.
    void validate() const {
        if (buses.empty()) throw TopologyError("network has no buses");
        int slack_count = 0;
        for (std::size_t i = 0; i < buses.size(); ++i) {
            const auto& b = buses[i];
            for (std::size_t j = i + 1; j < buses.size(); ++j)
                if (buses[j].id == b.id) throw TopologyError("duplicate bus id " + std::to_string(b.id));
            if (b.kind == BusKind::slack) ++slack_count;
            if (b.kind != BusKind::pq && !b.voltage_setpoint)
                throw TopologyError("bus " + std::to_string(b.id) + " needs a voltage setpoint");
            if (b.voltage_setpoint && !(*b.voltage_setpoint > 0.0))
                throw TopologyError("bus " + std::to_string(b.id) + " voltage setpoint must be positive");
        }
        if (slack_count != 1)
            throw TopologyError("network must have exactly one slack bus, found " + std::to_string(slack_count));
        for (const auto& br : branches) {
            if (br.from == br.to) throw TopologyError("branch connects bus " + std::to_string(br.from) + " to itself");
            if (!(br.reactance > 0.0)) throw TopologyError("branch reactance must be positive");
            if (br.resistance < 0.0) throw TopologyError("branch resistance must be non-negative");
            (void)index_of(br.from);
            (void)index_of(br.to);
        }
        for (const auto& l : loads) (void)index_of(l.bus);
        if (!(bases.system_mva > 0.0) || !(bases.base_rad_per_s > 0.0))
            throw TopologyError("per-unit bases must be positive");
        for (const auto& [name, mva] : bases.device_mva)
            if (!(mva > 0.0)) throw TopologyError("device base for " + name + " must be positive");
    }

    bool operator==(const NetworkModel&) const = default;
};

inline Complex series_admittance(const Branch& br) { return 1.0 / Complex(br.resistance, br.reactance); }

/// Bus admittance matrix. Y_km = -y_km, Y_kk = sum of y_km over incident branches.
inline ComplexMatrix build_admittance(const NetworkModel& network) {
    network.validate();
    const auto n = static_cast<Eigen::Index>(network.size());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    std::vector<std::vector<std::size_t>> adjacency(network.size());
    for (const auto& br : network.branches) {
        const auto i = network.index_of(br.from);
        const auto j = network.index_of(br.to);
        const Complex ys = series_admittance(br);
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        y(a, a) += ys;
        y(b, b) += ys;
        y(a, b) -= ys;
        y(b, a) -= ys;
        adjacency[i].push_back(j);
        adjacency[j].push_back(i);
    }
    std::vector<bool> seen(network.size(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        const auto k = frontier.front();
        frontier.pop();
        for (auto m : adjacency[k])
            if (!seen[m]) {
                seen[m] = true;
                frontier.push(m);
            }
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k])
            throw TopologyError("network is disconnected: bus " + std::to_string(network.buses[k].id) +
                                " is unreachable");
    return y;
}

/// Active power target for a generating bus, system base.
struct Injection {
    int bus = 0;
    double p = 0.0;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 50;
};

struct PowerFlowSolution {
    Vector v;                         // per bus, pu
    Vector theta;                     // per bus, rad
    std::vector<Complex> injections;  // per requested injection, system base
    int iterations = 0;
    double mismatch = 0.0;

    Complex voltage(std::size_t k) const {
        return std::polar(v(static_cast<Eigen::Index>(k)), theta(static_cast<Eigen::Index>(k)));
    }
};

/// Net complex power leaving each bus into the network, S = V .* conj(Y V).
inline ComplexVector bus_power(const ComplexMatrix& y, const ComplexVector& v) {
    return v.cwiseProduct((y * v).conjugate());
}

/// Newton-Raphson power flow in polar coordinates from a flat start.
///
/// Generation at pv buses is taken from `dispatch`; the slack bus absorbs the
/// residual. At most one injection per bus. Reactive output at pv and slack
/// buses is whatever the voltage setpoints require.
inline PowerFlowSolution solve_power_flow(const NetworkModel& network, std::span<const Injection> dispatch,
                                          const PowerFlowOptions& options = {}) {
    const ComplexMatrix y = build_admittance(network);
    const std::size_t n = network.size();
    const std::size_t slack = network.slack_index();

    Vector p_gen = Vector::Zero(static_cast<Eigen::Index>(n));
    std::vector<bool> has_injection(n, false);
    for (const auto& inj : dispatch) {
        const auto k = network.index_of(inj.bus);
        if (has_injection[k]) throw ArgumentError("more than one injection at bus " + std::to_string(inj.bus));
        has_injection[k] = true;
        p_gen(static_cast<Eigen::Index>(k)) = inj.p;
    }
    const ComplexVector load = network.load_vector();

    // Unknown ordering: theta for every non-slack bus, then |V| for every pq bus.
    std::vector<std::size_t> theta_idx;
    std::vector<std::size_t> vm_idx;
    for (std::size_t k = 0; k < n; ++k) {
        if (k != slack) theta_idx.push_back(k);
        if (network.buses[k].kind == BusKind::pq) vm_idx.push_back(k);
    }
    const auto n_theta = static_cast<Eigen::Index>(theta_idx.size());
    const auto n_unknown = n_theta + static_cast<Eigen::Index>(vm_idx.size());

    Vector vm = Vector::Ones(static_cast<Eigen::Index>(n));
    Vector va = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k)
        if (network.buses[k].voltage_setpoint) vm(static_cast<Eigen::Index>(k)) = *network.buses[k].voltage_setpoint;

    auto phasors = [&] {
        ComplexVector v(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) v(k) = std::polar(vm(k), va(k));
        return v;
    };
    auto mismatch_vector = [&](const ComplexVector& v) {
        const ComplexVector s = bus_power(y, v);
        Vector f(n_unknown);
        for (Eigen::Index i = 0; i < n_theta; ++i) {
            const auto k = static_cast<Eigen::Index>(theta_idx[static_cast<std::size_t>(i)]);
            f(i) = s(k).real() - (p_gen(k) - load(k).real());
        }
        for (std::size_t i = 0; i < vm_idx.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(vm_idx[i]);
            f(n_theta + static_cast<Eigen::Index>(i)) = s(k).imag() + load(k).imag();
        }
        return f;
    };

    PowerFlowSolution sol;
    ComplexVector v = phasors();
    Vector f = mismatch_vector(v);
    double norm = n_unknown > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0;
    int iter = 0;
    while (norm >= options.tolerance) {
        if (iter >= options.max_iterations)
            throw ConvergenceError("power flow did not converge after " + std::to_string(iter) +
                                       " iterations, mismatch " + std::to_string(norm),
                                   norm);
        const ComplexVector ibus = y * v;
        const ComplexVector vnorm = v.cwiseQuotient(vm.cast<Complex>());
        const ComplexMatrix ds_dva = Complex(0, 1) * v.asDiagonal() *
                                     (ComplexMatrix(ibus.asDiagonal()) - y * v.asDiagonal()).conjugate();
        const ComplexMatrix ds_dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate() +
                                     ComplexMatrix(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        Matrix jac(n_unknown, n_unknown);
        auto row_of = [&](Eigen::Index r, bool& reactive) {
            reactive = r >= n_theta;
            return static_cast<Eigen::Index>(reactive ? vm_idx[static_cast<std::size_t>(r - n_theta)]
                                                      : theta_idx[static_cast<std::size_t>(r)]);
        };
        for (Eigen::Index r = 0; r < n_unknown; ++r) {
            bool reactive_row = false;
            const auto kr = row_of(r, reactive_row);
            for (Eigen::Index c = 0; c < n_unknown; ++c) {
                bool magnitude_col = false;
                const auto kc = row_of(c, magnitude_col);
                const Complex d = magnitude_col ? ds_dvm(kr, kc) : ds_dva(kr, kc);
                jac(r, c) = reactive_row ? d.imag() : d.real();
            }
        }
        const Vector dx = jac.partialPivLu().solve(-f);
        for (Eigen::Index i = 0; i < n_theta; ++i) va(static_cast<Eigen::Index>(theta_idx[static_cast<std::size_t>(i)])) += dx(i);
        for (std::size_t i = 0; i < vm_idx.size(); ++i)
            vm(static_cast<Eigen::Index>(vm_idx[i])) += dx(n_theta + static_cast<Eigen::Index>(i));
        v = phasors();
        f = mismatch_vector(v);
        norm = f.lpNorm<Eigen::Infinity>();
        ++iter;
        if (!std::isfinite(norm))
            throw ConvergenceError("power flow diverged (non-finite mismatch)", norm);
    }

    sol.v = vm;
    sol.theta = va;
    sol.iterations = iter;
    sol.mismatch = norm;
    const ComplexVector s = bus_power(y, v);
    for (const auto& inj : dispatch) {
        const auto k = static_cast<Eigen::Index>(network.index_of(inj.bus));
        sol.injections.push_back(s(k) + load(k));
    }
    return sol;
}

/// Series-branch I^2 R losses for a set of bus voltages.
inline double branch_losses(const NetworkModel& network, const ComplexVector& v) {
    double loss = 0.0;
    for (const auto& br : network.branches) {
        const Complex i = (v(static_cast<Eigen::Index>(network.index_of(br.from))) -
                           v(static_cast<Eigen::Index>(network.index_of(br.to)))) *
                          series_admittance(br);
        loss += std::norm(i) * br.resistance;
    }
    return loss;
}

}  // namespace droope
