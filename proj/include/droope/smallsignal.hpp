#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "droope/format.hpp"
#include "droope/system.hpp"
#include "droope/types.hpp"

namespace droope {

struct LinearizationResult {
    Matrix f_x, f_y, g_x, g_y;
    Matrix a_sys;
    Matrix b;  // input matrix, columns follow `input_labels`
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
};

using StateFunction = std::function<Vector(const Vector& x, const Vector& y)>;

struct LinearizeOptions {
    double relative_step = 1e-6;
    /// Reject points whose derivative norm exceeds this (non-positive disables).
    double equilibrium_tolerance = 1e-8;
};

namespace detail {

inline double fd_step(double value, double relative) { return relative * std::max(1.0, std::abs(value)); }

/// Central-difference Jacobian of `fun` with respect to the argument selected
/// by `wrt_x`.
inline Matrix central_jacobian(const StateFunction& fun, Vector x, Vector y, bool wrt_x, double relative) {
    Vector& v = wrt_x ? x : y;
    const Vector f0 = fun(x, y);
    Matrix j(f0.size(), v.size());
    for (Eigen::Index c = 0; c < v.size(); ++c) {
        const double v0 = v(c);
        const double h = fd_step(v0, relative);
        v(c) = v0 + h;
        const Vector fp = fun(x, y);
        v(c) = v0 - h;
        const Vector fm = fun(x, y);
        v(c) = v0;
        j.col(c) = (fp - fm) / (2.0 * h);
    }
    return j;
}

}  // namespace detail

/// Reduces a linearized DAE to its state matrix, a = f_x - f_y g_y^-1 g_x.
inline Matrix reduce_state_matrix(const Matrix& f_x, const Matrix& f_y, const Matrix& g_x, const Matrix& g_y,
                                  const std::vector<std::string>& algebraic_labels = {}) {
    if (g_y.rows() == 0) return f_x;
    Eigen::FullPivLU<Matrix> lu(g_y);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        // The permuted diagonal position of the smallest pivot names the
        // degenerate algebraic variable.
        const Matrix u = lu.matrixLU().triangularView<Eigen::Upper>();
        Eigen::Index k = 0;
        u.diagonal().cwiseAbs().minCoeff(&k);
        const Eigen::Index col = lu.permutationQ().indices()(k);
        std::string name = static_cast<std::size_t>(col) < algebraic_labels.size()
                               ? algebraic_labels[static_cast<std::size_t>(col)]
                               : "y[" + std::to_string(col) + "]";
        throw NumericError("algebraic Jacobian g_y is singular (pivot at " + name + ")");
    }
    return f_x - f_y * lu.solve(g_x);
}

/// Linearization of a generic semi-explicit DAE x' = f(x, y), 0 = g(x, y).
inline LinearizationResult linearize(const StateFunction& f, const StateFunction& g, const Vector& x,
                                     const Vector& y, const LinearizeOptions& options = {}) {
    if (options.equilibrium_tolerance > 0.0) {
        const double norm = f(x, y).lpNorm<Eigen::Infinity>();
        if (norm > options.equilibrium_tolerance)
            throw ArgumentError("linearization point is not an equilibrium (|f| = " + std::to_string(norm) + ")");
    }
    LinearizationResult out;
    out.f_x = detail::central_jacobian(f, x, y, true, options.relative_step);
    out.f_y = detail::central_jacobian(f, x, y, false, options.relative_step);
    out.g_x = detail::central_jacobian(g, x, y, true, options.relative_step);
    out.g_y = detail::central_jacobian(g, x, y, false, options.relative_step);
    out.a_sys = reduce_state_matrix(out.f_x, out.f_y, out.g_x, out.g_y);
    return out;
}

inline std::vector<std::string> algebraic_labels(const DynamicSystem& sys) {
    std::vector<std::string> labels;
    for (const auto& b : sys.network().buses) {
        labels.push_back("bus" + std::to_string(b.id) + ".v_re");
        labels.push_back("bus" + std::to_string(b.id) + ".v_im");
    }
    for (const auto& d : sys.devices())
        if (!d.is_gfm()) {
            labels.push_back(d.name + ".I_d");
            labels.push_back(d.name + ".I_q");
        }
    return labels;
}

/// Linearization of a full system about an equilibrium, including the input
/// matrix for generator (p_set, v_ref) and inverter p_set inputs.
inline LinearizationResult linearize(const DynamicSystem& sys, const SystemPoint& point,
                                     const LinearizeOptions& options = {}) {
    const StateFunction f = [&sys](const Vector& x, const Vector& y) { return sys.f(x, y); };
    const StateFunction g = [&sys](const Vector& x, const Vector& y) { return sys.g(x, y); };
    LinearizationResult out = [&] {
        LinearizeOptions o = options;
        if (o.equilibrium_tolerance > 0.0) {
            const double norm = sys.f(point.x, point.y).lpNorm<Eigen::Infinity>();
            if (norm > o.equilibrium_tolerance)
                throw ArgumentError("linearization point is not an equilibrium (|f| = " + std::to_string(norm) + ")");
            o.equilibrium_tolerance = 0.0;
        }
        LinearizationResult r;
        r.f_x = detail::central_jacobian(f, point.x, point.y, true, o.relative_step);
        r.f_y = detail::central_jacobian(f, point.x, point.y, false, o.relative_step);
        r.g_x = detail::central_jacobian(g, point.x, point.y, true, o.relative_step);
        r.g_y = detail::central_jacobian(g, point.x, point.y, false, o.relative_step);
        r.a_sys = reduce_state_matrix(r.f_x, r.f_y, r.g_x, r.g_y, algebraic_labels(sys));
        return r;
    }();
    out.state_labels = sys.state_labels();

    // Input matrix by perturbing the exogenous setpoints on a scratch copy.
    DynamicSystem scratch = sys;
    for (std::size_t i = 0; i < sys.n_devices(); ++i) {
        const auto& d = sys.device(i);
        if (d.is_gfm()) {
            out.input_labels.push_back(d.name + ".p_set");
        } else {
            out.input_labels.push_back(d.name + ".p_set");
            out.input_labels.push_back(d.name + ".v_ref");
        }
    }
    const auto n_u = static_cast<Eigen::Index>(out.input_labels.size());
    Matrix f_u(out.f_x.rows(), n_u);
    Matrix g_u(out.g_x.rows(), n_u);
    Eigen::Index col = 0;
    auto perturb = [&](auto&& set_value, double v0) {
        const double h = detail::fd_step(v0, options.relative_step);
        set_value(v0 + h);
        const Vector fp = scratch.f(point.x, point.y);
        const Vector gp = scratch.g(point.x, point.y);
        set_value(v0 - h);
        const Vector fm = scratch.f(point.x, point.y);
        const Vector gm = scratch.g(point.x, point.y);
        set_value(v0);
        f_u.col(col) = (fp - fm) / (2.0 * h);
        g_u.col(col) = (gp - gm) / (2.0 * h);
        ++col;
    };
    for (std::size_t i = 0; i < sys.n_devices(); ++i) {
        if (sys.device(i).is_gfm()) {
            perturb([&](double v) { scratch.gfm_params(i).p_set = v; }, sys.device(i).gfm.p_set);
        } else {
            const SgSetpoints u0 = sys.sg_setpoints(i);
            perturb([&](double v) { scratch.set_sg_setpoints(i, {v, u0.v_ref}); }, u0.p_set);
            perturb([&](double v) { scratch.set_sg_setpoints(i, {u0.p_set, v}); }, u0.v_ref);
        }
    }
    out.b = out.g_y.rows() > 0 ? Matrix(f_u - out.f_y * out.g_y.fullPivLu().solve(g_u)) : f_u;
    return out;
}

// ---------------------------------------------------------------------------
// Eigenanalysis
// ---------------------------------------------------------------------------

struct EigenDecomposition {
    ComplexVector values;
    ComplexMatrix right;  // columns
    ComplexMatrix left;   // rows, left * right = I
    double max_residual = 0.0;
};

/// Damping ratio -Re/|lambda|; zero for a zero eigenvalue.
inline double damping_ratio(Complex lambda) {
    const double mag = std::abs(lambda);
    return mag > 0.0 ? -lambda.real() / mag : 0.0;
}

inline std::string dump_matrix(const Matrix& a) {
    std::ostringstream os;
    os.precision(17);
    os << a;
    return os.str();
}

/// Eigenvalues with right and left eigenvectors of a real matrix.
///
/// Backed by Eigen's Hessenberg/real-Schur solver. Left vectors are the rows
/// of the inverse right-eigenvector matrix, so each pair is biorthonormal.
inline EigenDecomposition eigen_decompose(const Matrix& a, double residual_tolerance = 1e-9) {
    if (!a.allFinite()) throw NumericError("eigen_decompose: matrix has non-finite entries\n" + dump_matrix(a));
    Eigen::EigenSolver<Matrix> es(a, true);
    if (es.info() != Eigen::Success)
        throw NumericError("eigen_decompose: QR iteration did not converge\n" + dump_matrix(a));
    EigenDecomposition out;
    out.values = es.eigenvalues();
    out.right = es.eigenvectors();
    for (Eigen::Index i = 0; i < out.right.cols(); ++i) out.right.col(i).normalize();
    // Exact conjugate symmetry: Eigen returns pairs as (a+bi, a-bi) built from
    // the same real Schur block, enforce it bit-for-bit.
    for (Eigen::Index i = 0; i + 1 < out.values.size(); ++i) {
        if (out.values(i).imag() != 0.0 && std::abs(out.values(i + 1) - std::conj(out.values(i))) <=
                                                1e-12 * std::max(1.0, std::abs(out.values(i)))) {
            out.values(i + 1) = std::conj(out.values(i));
            out.right.col(i + 1) = out.right.col(i).conjugate();
            ++i;
        }
    }
    Eigen::PartialPivLU<ComplexMatrix> lu(out.right);
    out.left = lu.inverse();
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        const double res = (a.cast<Complex>() * out.right.col(i) - out.values(i) * out.right.col(i)).norm() /
                           out.right.col(i).norm();
        out.max_residual = std::max(out.max_residual, res);
    }
    if (!(out.max_residual < residual_tolerance * std::max(1.0, a.norm())))
        throw NumericError("eigen_decompose: eigenpair residual " + std::to_string(out.max_residual) +
                           " exceeds tolerance\n" + dump_matrix(a));
    return out;
}

struct ParticipationResult {
    Matrix factors;              // states x modes, each column sums to 1
    std::vector<bool> flagged;  // defective / ill-conditioned modes
};

/// Normalized participation factors |phi_ki * psi_ik|. Modes whose eigenvalue
/// condition number exceeds `condition_limit` are flagged and left as NaN.
inline ParticipationResult participation_factors(const ComplexMatrix& right, const ComplexMatrix& left,
                                                 double condition_limit = 1e8) {
    const Eigen::Index n = right.rows();
    ParticipationResult out;
    out.factors = Matrix::Zero(n, right.cols());
    out.flagged.assign(static_cast<std::size_t>(right.cols()), false);
    for (Eigen::Index i = 0; i < right.cols(); ++i) {
        const double cond = right.col(i).norm() * left.row(i).norm();
        if (!std::isfinite(cond) || cond > condition_limit) {
            out.flagged[static_cast<std::size_t>(i)] = true;
            out.factors.col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        double sum = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            out.factors(k, i) = std::abs(right(k, i) * left(i, k));
            sum += out.factors(k, i);
        }
        if (sum > 0.0) out.factors.col(i) /= sum;
    }
    return out;
}

struct ModalResult {
    ComplexVector eigenvalues;
    std::vector<double> damping;
    Matrix participation;
    std::vector<bool> flagged;
    /// Mode belongs to the rotational invariance of a network without an
    /// infinite bus (uniform shift of every angle, eigenvalue zero).
    std::vector<bool> reference_mode;
    ComplexMatrix right;
    std::vector<std::string> state_labels;
    double dispatch = 0.0;
    double max_residual = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
    double frequency_hz(std::size_t i) const { return std::abs(eigenvalues(static_cast<Eigen::Index>(i)).imag()) / (2.0 * std::numbers::pi); }

    /// Indices of the `count` states with largest participation in mode i.
    std::vector<std::size_t> top_participants(std::size_t mode, std::size_t count) const {
        std::vector<std::size_t> idx(static_cast<std::size_t>(participation.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        if (flagged[mode]) return {};
        const auto col = static_cast<Eigen::Index>(mode);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return participation(static_cast<Eigen::Index>(a), col) > participation(static_cast<Eigen::Index>(b), col);
        });
        idx.resize(std::min(count, idx.size()));
        return idx;
    }
};

inline ModalResult modal_analysis(const Matrix& a_sys, std::vector<std::string> labels,
                                  const std::vector<std::size_t>& angle_states = {}) {
    const EigenDecomposition ed = eigen_decompose(a_sys);
    const ParticipationResult pf = participation_factors(ed.right, ed.left);
    ModalResult m;
    m.eigenvalues = ed.values;
    m.participation = pf.factors;
    m.flagged = pf.flagged;
    m.right = ed.right;
    m.state_labels = std::move(labels);
    m.max_residual = ed.max_residual;
    m.reference_mode.assign(m.size(), false);
    for (std::size_t i = 0; i < m.size(); ++i) m.damping.push_back(damping_ratio(ed.values(static_cast<Eigen::Index>(i))));
    if (!angle_states.empty()) {
        ComplexVector shift = ComplexVector::Zero(a_sys.rows());
        for (auto k : angle_states) shift(static_cast<Eigen::Index>(k)) = 1.0;
        shift.normalize();
        const double scale = std::max(1.0, a_sys.lpNorm<Eigen::Infinity>());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const double overlap = std::abs(shift.dot(ed.right.col(c)));
            if (std::abs(ed.values(c)) < 1e-7 * scale && overlap > 0.99) m.reference_mode[i] = true;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Dispatch sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
    double p_set = 0.0;
    bool ok = false;
    std::string failure;
    ModalResult modes;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    /// tracks[t][k]: mode index at point k followed by track t (only for
    /// successful points; -1 otherwise).
    std::vector<std::vector<int>> tracks;

    Complex eigenvalue(std::size_t track, std::size_t point) const {
        const int m = tracks[track][point];
        return m < 0 ? Complex(std::nan(""), std::nan("")) : points[point].modes.eigenvalues(m);
    }
};

/// Inverter dispatch grid from `from` to `to` inclusive.
inline std::vector<double> dispatch_grid(double from, double to, double step) {
    if (!(step > 0.0) || to < from) throw ArgumentError("invalid dispatch grid");
    std::vector<double> grid;
    const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
    for (long k = 0; k <= n; ++k) grid.push_back(std::round((from + static_cast<double>(k) * step) * 1e12) / 1e12);
    return grid;
}

/// Equilibrium, linearization and modes of a network/device set at the power
/// flow implied by the device dispatches.
inline ModalResult modal_point(const NetworkModel& network, const std::vector<DeviceSpec>& devices,
                               std::size_t reference_device) {
    DynamicSystem sys(network, devices);
    const PowerFlowSolution pf = solve_power_flow(network, device_dispatch(devices, network.bases.system_mva));
    const SystemPoint start = sys.initialize(pf);
    const EquilibriumResult eq = solve_equilibrium(sys, start, sys.state_offset(reference_device));
    const LinearizationResult lin = linearize(sys, eq.point);
    return modal_analysis(lin.a_sys, lin.state_labels, sys.angle_states());
}

namespace detail {

/// Assigns modes at `next` to tracks by maximum eigenvector overlap, then
/// keeps the sign of the imaginary part stable within conjugate pairs.
inline std::vector<int> match_modes(const ModalResult& prev, const std::vector<int>& prev_of_track,
                                    const ModalResult& next) {
    const std::size_t n_tracks = prev_of_track.size();
    struct Candidate {
        double score;
        std::size_t track;
        std::size_t mode;
    };
    std::vector<Candidate> cand;
    for (std::size_t t = 0; t < n_tracks; ++t) {
        const Complex lp = prev.eigenvalues(prev_of_track[t]);
        const auto vp = prev.right.col(prev_of_track[t]);
        for (std::size_t m = 0; m < next.size(); ++m) {
            const auto vn = next.right.col(static_cast<Eigen::Index>(m));
            const Complex ln = next.eigenvalues(static_cast<Eigen::Index>(m));
            const double overlap = std::abs(vp.dot(vn)) / (vp.norm() * vn.norm());
            const double distance = std::abs(lp - ln) / (1.0 + std::abs(lp));
            cand.push_back({overlap - 1e-3 * distance, t, m});
        }
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    std::vector<int> out(n_tracks, -1);
    std::vector<bool> used(next.size(), false);
    for (const auto& c : cand) {
        if (out[c.track] >= 0 || used[c.mode]) continue;
        out[c.track] = static_cast<int>(c.mode);
        used[c.mode] = true;
    }
    for (std::size_t t = 0; t < n_tracks; ++t) {
        const Complex lp = prev.eigenvalues(prev_of_track[t]);
        const Complex ln = next.eigenvalues(out[t]);
        if (lp.imag() == 0.0 || ln.imag() == 0.0 || (lp.imag() > 0) == (ln.imag() > 0)) continue;
        for (std::size_t u = t + 1; u < n_tracks; ++u) {
            const Complex lu = next.eigenvalues(out[u]);
            if (lu == std::conj(ln) && prev.eigenvalues(prev_of_track[u]) == std::conj(lp)) {
                std::swap(out[t], out[u]);
                break;
            }
        }
    }
    return out;
}

}  // namespace detail

/// Tracks modes across an ordered list of modal results.
inline std::vector<std::vector<int>> track_modes(const std::vector<SweepPoint>& points) {
    std::vector<std::vector<int>> tracks;
    std::vector<int> current;
    std::size_t last = 0;
    bool started = false;
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (!points[k].ok) continue;
        if (!started) {
            const std::size_t n = points[k].modes.size();
            tracks.assign(n, std::vector<int>(points.size(), -1));
            current.resize(n);
            for (std::size_t t = 0; t < n; ++t) current[t] = static_cast<int>(t);
            started = true;
        } else {
            current = detail::match_modes(points[last].modes, current, points[k].modes);
        }
        for (std::size_t t = 0; t < current.size(); ++t) tracks[t][k] = current[t];
        last = k;
    }
    return tracks;
}

/// Modal analysis over a grid of dispatches for one inverter.
///
/// Every point is independent; a failing point is recorded with its error and
/// the sweep continues. `jobs` > 1 evaluates points on worker threads; results
/// are always stored in grid order.
inline SweepResult dispatch_sweep(const NetworkModel& network, const std::vector<DeviceSpec>& devices,
                                  std::size_t swept_device, std::size_t reference_device,
                                  const std::vector<double>& grid, unsigned jobs = 1) {
    if (swept_device >= devices.size() || !devices[swept_device].is_gfm())
        throw ArgumentError("swept device must be an inverter");
    SweepResult out;
    out.points.resize(grid.size());
    auto evaluate = [&](std::size_t k) {
        SweepPoint& pt = out.points[k];
        pt.p_set = grid[k];
        try {
            std::vector<DeviceSpec> local = devices;
            local[swept_device].p_dispatch = grid[k];
            pt.modes = modal_point(network, local, reference_device);
            pt.modes.dispatch = grid[k];
            pt.ok = true;
        } catch (const Error& e) {
            pt.failure = e.what();
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(grid.size())));
    if (jobs == 1) {
        for (std::size_t k = 0; k < grid.size(); ++k) evaluate(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < jobs; ++w)
            workers.emplace_back([&] {
                for (std::size_t k = next++; k < grid.size(); k = next++) evaluate(k);
            });
        for (auto& w : workers) w.join();
    }
    out.tracks = track_modes(out.points);
    return out;
}

/// CSV: one row per (dispatch, tracked mode).
inline void write_modal_csv(std::ostream& os, const SweepResult& sweep) {
    os << "p_set,mode,re,im,freq_hz,zeta,reference,top1,top1_pf,top2,top2_pf,top3,top3_pf\n";
    for (std::size_t k = 0; k < sweep.points.size(); ++k) {
        const auto& pt = sweep.points[k];
        if (!pt.ok) continue;
        for (std::size_t t = 0; t < sweep.tracks.size(); ++t) {
            const auto m = static_cast<std::size_t>(sweep.tracks[t][k]);
            const Complex l = pt.modes.eigenvalues(static_cast<Eigen::Index>(m));
            os << format_double(pt.p_set) << ',' << t << ',' << format_double(l.real()) << ','
               << format_double(l.imag()) << ',' << format_double(pt.modes.frequency_hz(m)) << ','
               << format_double(pt.modes.damping[m]) << ',' << (pt.modes.reference_mode[m] ? 1 : 0);
            const auto top = pt.modes.top_participants(m, 3);
            for (std::size_t j = 0; j < 3; ++j) {
                if (j < top.size())
                    os << ',' << pt.modes.state_labels[top[j]] << ','
                       << format_double(pt.modes.participation(static_cast<Eigen::Index>(top[j]),
                                                               static_cast<Eigen::Index>(m)));
                else
                    os << ",,";
            }
            os << '\n';
        }
    }
}

}  // namespace droope
