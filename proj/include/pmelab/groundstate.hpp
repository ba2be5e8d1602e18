#pragma once

// Ground state w of the sublinear Lane-Emden problem, the level Lambda_1, a
// least-energy nodal critical point giving the estimate of Lambda_2, and a
// one-dimensional shooting oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include "pmelab/energy.hpp"
#include "pmelab/errors.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/linalg.hpp"
#include "pmelab/nonlinearity.hpp"

namespace pmelab {

struct DescentControls {
    double tol = 1e-8;               // target residual_norm
    int max_iters = 5000;            // per regularization stage
    double eps_start = 1e-2;         // first regularization, relative to the amplitude scale
    int eps_stages = 4;              // each stage divides eps by 10
    int newton_max_iters = 60;
    std::uint64_t seed = 0;          // 0: eigenfunction start, otherwise a random positive start
};

struct GroundState {
    Field w;
    double lambda1 = 0.0;
    double residual = 0.0;
    int descent_iterations = 0;
    int newton_iterations = 0;
};

namespace detail {

/// (alpha / lambda1)^{1/(2-q)}: the amplitude at which the eigenfunction
/// balances the two terms of the equation.
inline double amplitude_scale(const MediumParams& p, double lambda1) {
    return std::pow(p.alpha() / lambda1, 1.0 / (2.0 - p.q()));
}

inline Eigen::VectorXd gradient_vec(const LaplaceSolver& lap, const Eigen::VectorXd& x, const MediumParams& p, double eps) {
    Eigen::VectorXd g = lap.apply(x);
    for (Eigen::Index k = 0; k < x.size(); ++k) g[k] -= potential_slope(x[k], p.alpha(), p.q(), eps);
    return g;
}

inline double l2(const Eigen::VectorXd& v, double vol) { return std::sqrt(v.squaredNorm() * vol); }

/// Barzilai-Borwein descent in the W^{1,2}_0 metric with an Armijo safeguard
/// on the regularized energy. Returns the iteration count.
inline int sobolev_bb_descent(const LaplaceSolver& lap, Eigen::VectorXd& x, const MediumParams& p, double eps,
                              double gtol, int max_iters) {
    const DomainHandle& d = lap.domain();
    const double vol = d->cell_volume();
    auto energy = [&](const Eigen::VectorXd& v) { return regularized_functional(from_eigen(d, v), p, eps); };
    Eigen::VectorXd g = gradient_vec(lap, x, p, eps);
    double E = energy(x);
    double beta = 1.0;
    Eigen::VectorXd x_prev, g_prev;
    for (int it = 0; it < max_iters; ++it) {
        if (l2(g, vol) <= gtol) return it;
        const Eigen::VectorXd dir = -lap.solve(g);
        const double slope = vol * g.dot(dir);
        if (it > 0) {
            const Eigen::VectorXd s = x - x_prev, y = g - g_prev;
            const double sy = s.dot(y);
            if (sy > 0.0) beta = std::clamp(s.dot(lap.apply(s)) / sy, 1e-3, 1e3);
            else beta = 1.0;
        }
        double step = beta;
        Eigen::VectorXd cand;
        double Ec = E;
        bool ok = false;
        for (int bt = 0; bt < 60; ++bt) {
            cand = x + step * dir;
            Ec = energy(cand);
            if (Ec <= E + 1e-4 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) return it;  // stagnation at rounding level
        x_prev = x;
        g_prev = g;
        x = std::move(cand);
        E = Ec;
        g = gradient_vec(lap, x, p, eps);
    }
    return max_iters;
}

}  // namespace detail

/// Minimizes the discrete functional starting from `initial` (symmetrized by
/// absolute value), then polishes with Newton on the unregularized equation.
inline GroundState solve_ground_state_from(const Field& initial, const MediumParams& p, const DescentControls& ctl = {}) {
    const DomainHandle& d = initial.handle();
    const LaplaceSolver lap(d);
    const double vol = d->cell_volume();
    const double lam = inverse_power_iteration(lap).value;
    const double A0 = detail::amplitude_scale(p, lam);

    Eigen::VectorXd x = to_eigen(initial).cwiseAbs();
    if (x.maxCoeff() == 0.0) throw ContractViolation("solve_ground_state: initial guess is identically zero");

    GroundState gs{Field(d), 0.0, 0.0, 0, 0};
    double eps = ctl.eps_start * A0;
    // The regularized stages only need to land in Newton's basin.
    const double stage_tol = std::max(ctl.tol, 1e-6 * detail::l2(lap.apply(x), vol));
    for (int stage = 0; stage < ctl.eps_stages; ++stage, eps *= 0.1) {
        gs.descent_iterations += detail::sobolev_bb_descent(lap, x, p, eps, stage_tol, ctl.max_iters);
        // The discrete Dirichlet energy does not increase under |.|, and the
        // potential is even, so this never raises the energy.
        x = x.cwiseAbs();
    }
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0)) x[k] = 1e-3 * A0;
    }

    // Newton on A w = alpha w^{q-1}; the Jacobian A - alpha (q-1) diag(w^{q-2})
    // is positive definite near the positive minimizer.
    const double a = p.alpha(), q = p.q();
    Eigen::VectorXd F = detail::gradient_vec(lap, x, p, 0.0);
    double res = detail::l2(F, vol);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    for (int it = 0; it < ctl.newton_max_iters && res > 0.01 * ctl.tol; ++it) {
        Eigen::SparseMatrix<double> J = lap.matrix();
        for (Eigen::Index k = 0; k < x.size(); ++k) J.coeffRef(k, k) -= a * (q - 1.0) * std::pow(x[k], q - 2.0);
        ldlt.compute(J);
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::VectorXd dx = -ldlt.solve(F);
        // Keep strict positivity: never move more than 90% of the way to zero.
        double step = 1.0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            if (dx[k] < 0.0) step = std::min(step, 0.9 * x[k] / -dx[k]);
        }
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
            const Eigen::VectorXd cand = x + step * dx;
            const Eigen::VectorXd Fc = detail::gradient_vec(lap, cand, p, 0.0);
            const double rc = detail::l2(Fc, vol);
            if (rc < res) {
                x = cand;
                F = Fc;
                res = rc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        ++gs.newton_iterations;
        if (!improved) break;
    }
    gs.w = from_eigen(d, x);
    gs.residual = residual_norm(gs.w, p);
    gs.lambda1 = functional(gs.w, p).total;
    if (!(gs.residual <= ctl.tol) || gs.w.min() <= 0.0) {
        throw NumericalFailure("solve_ground_state: stalled with residual " + std::to_string(gs.residual) +
                               " after " + std::to_string(gs.descent_iterations) + " descent and " +
                               std::to_string(gs.newton_iterations) + " Newton iterations");
    }
    return gs;
}

inline GroundState solve_ground_state(const DomainHandle& d, const MediumParams& p, const DescentControls& ctl = {}) {
    const LaplaceSolver lap(d);
    const Eigenpair e = inverse_power_iteration(lap);
    const double A0 = detail::amplitude_scale(p, e.value);
    std::vector<double> v(d->size());
    if (ctl.seed == 0) {
        const double mx = e.vector.cwiseAbs().maxCoeff();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = A0 * std::fabs(e.vector[static_cast<Eigen::Index>(k)]) / mx;
    } else {
        std::mt19937_64 rng(ctl.seed);
        std::uniform_real_distribution<double> u(0.05, 2.0);
        for (auto& x : v) x = A0 * u(rng);
    }
    return solve_ground_state_from(Field(d, std::move(v)), p, ctl);
}

// ---------------------------------------------------------------------------
// One-dimensional shooting oracle.

struct ShootingResult {
    Field profile;
    double lambda1 = 0.0;
    double peak = 0.0;          // u(L/2)
    double slope = 0.0;         // u'(0)
    double dirichlet = 0.0;     // int u'^2 over (0, L)
};

namespace detail {

/// Dormand-Prince 5(4) for the first-order system
///   u' = p, p' = -alpha |u|^{q-2} u, E' = p^2, P' = |u|^q,
/// integrated in the distance t from the peak.
class LaneEmdenOde {
public:
    using State = std::array<double, 4>;

    LaneEmdenOde(double alpha, double q, double rtol) : a_(alpha), q_(q), rtol_(rtol) {}

    State rhs(const State& y) const {
        const double u = y[0];
        return {y[1], -a_ * signed_power(u, q_ - 1.0), y[1] * y[1], std::pow(std::fabs(u), q_)};
    }

    /// One trial step; returns the 5th-order state and writes the error estimate.
    State trial(const State& y, double h, double& err) const {
        static constexpr double c21 = 1.0 / 5, c31 = 3.0 / 40, c32 = 9.0 / 40, c41 = 44.0 / 45, c42 = -56.0 / 15,
                                c43 = 32.0 / 9, c51 = 19372.0 / 6561, c52 = -25360.0 / 2187, c53 = 64448.0 / 6561,
                                c54 = -212.0 / 729, c61 = 9017.0 / 3168, c62 = -355.0 / 33, c63 = 46732.0 / 5247,
                                c64 = 49.0 / 176, c65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                                b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                                e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                                e7 = -1.0 / 40;
        auto add = [](const State& base, std::initializer_list<std::pair<double, const State*>> terms, double hh) {
            State r = base;
            for (const auto& [c, k] : terms)
                for (int i = 0; i < 4; ++i) r[i] += hh * c * (*k)[i];
            return r;
        };
        const State k1 = rhs(y);
        const State k2 = rhs(add(y, {{c21, &k1}}, h));
        const State k3 = rhs(add(y, {{c31, &k1}, {c32, &k2}}, h));
        const State k4 = rhs(add(y, {{c41, &k1}, {c42, &k2}, {c43, &k3}}, h));
        const State k5 = rhs(add(y, {{c51, &k1}, {c52, &k2}, {c53, &k3}, {c54, &k4}}, h));
        const State k6 = rhs(add(y, {{c61, &k1}, {c62, &k2}, {c63, &k3}, {c64, &k4}, {c65, &k5}}, h));
        const State y5 = add(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
        const State k7 = rhs(y5);
        err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = rtol_ * (std::fabs(y[i]) + std::fabs(y5[i])) + 1e-300;
            err = std::max(err, std::fabs(e) / sc);
        }
        return y5;
    }

    /// Adaptive integration over exactly `span`; `h` carries the step size
    /// suggestion between calls.
    State advance(State y, double span, double& h) const {
        double t = 0.0;
        for (int guard = 0; t < span; ++guard) {
            if (guard > 1000000) throw NumericalFailure("shooting: step size collapse");
            const bool clipped = h >= span - t;
            const double hh = clipped ? span - t : h;
            double err = 0.0;
            const State cand = trial(y, hh, err);
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0) {
                y = cand;
                if (clipped) break;
                t += hh;
                h = hh * fac;
            } else {
                h = hh * fac;
            }
        }
        return y;
    }

    double length_scale(double M) const { return std::pow(M, 1.0 - 0.5 * q_) / std::sqrt(a_); }

private:
    double a_, q_, rtol_;
};

/// Distance from the peak (value M, slope 0) to the first zero of u.
/// Writes the state at the zero (u = 0 up to the root tolerance).
inline double half_length(const LaneEmdenOde& ode, double M, LaneEmdenOde::State& at_zero) {
    LaneEmdenOde::State y{M, 0.0, 0.0, 0.0};
    double h = 1e-3 * ode.length_scale(M);
    double t = 0.0;
    // March until u changes sign, then locate the zero by secant on the span.
    for (int guard = 0; guard < 1000000; ++guard) {
        double err = 0.0;
        const auto cand = ode.trial(y, h, err);
        if (err > 1.0) {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            continue;
        }
        if (cand[0] <= 0.0) {
            // Root of u in (t, t+h]: u is monotone here (u' < 0).
            double lo = 0.0, hi = h, ulo = y[0], uhi = cand[0];
            double s = hi;
            for (int it = 0; it < 200; ++it) {
                s = lo + (hi - lo) * ulo / (ulo - uhi);
                if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
                double hstep = s;
                const auto ys = ode.advance(y, s, hstep);
                if (std::fabs(ys[0]) <= 1e-15 * M || hi - lo <= 1e-16 * (t + s)) {
                    at_zero = ys;
                    return t + s;
                }
                if (ys[0] > 0.0) {
                    lo = s;
                    ulo = ys[0];
                } else {
                    hi = s;
                    uhi = ys[0];
                }
            }
            double hstep = s;
            at_zero = ode.advance(y, s, hstep);
            return t + s;
        }
        y = cand;
        t += h;
        h *= std::clamp(err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2), 0.2, 5.0);
    }
    throw NumericalFailure("shooting: no zero found");
}

}  // namespace detail

/// Positive solution of -u'' = alpha |u|^{q-2} u on (0, L) with zero ends,
/// by shooting from the peak on its height, sampled on `d` (an interval).
inline ShootingResult shooting_oracle_1d(const DomainHandle& d, const MediumParams& p, double rtol = 1e-12) {
    if (d->dimension() != 1 || !d->is_rectangular())
        throw ContractViolation("shooting_oracle_1d: requires an unmasked interval");
    const double L = d->extent()[0];
    const double target = 0.5 * L;
    const detail::LaneEmdenOde ode(p.alpha(), p.q(), rtol);
    detail::LaneEmdenOde::State end{};

    // Bracket the peak height in log scale; the half-length grows with M.
    double lo = std::log(1e-3), hi = std::log(1e3);
    auto excess = [&](double logM) { return detail::half_length(ode, std::exp(logM), end) - target; };
    double flo = excess(lo), fhi = excess(hi);
    for (int k = 0; k < 40 && flo > 0.0; ++k) { hi = lo; fhi = flo; lo -= 5.0; flo = excess(lo); }
    for (int k = 0; k < 40 && fhi < 0.0; ++k) { lo = hi; flo = fhi; hi += 5.0; fhi = excess(hi); }
    if (!(flo <= 0.0 && fhi >= 0.0)) throw NumericalFailure("shooting_oracle_1d: could not bracket the peak height");
    // Illinois regula falsi.
    int side = 0;
    double logM = lo;
    for (int it = 0; it < 200; ++it) {
        logM = (lo * fhi - hi * flo) / (fhi - flo);
        const double f = excess(logM);
        if (std::fabs(f) <= 1e-14 * target || hi - lo <= 1e-15) break;
        if (f < 0.0) {
            lo = logM; flo = f;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = logM; fhi = f;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
    }
    const double M = std::exp(logM);
    detail::half_length(ode, M, end);

    // Sample at each node's distance from the midpoint.
    std::vector<std::pair<double, std::size_t>> order(d->size());
    for (std::size_t k = 0; k < d->size(); ++k) order[k] = {std::fabs(d->coordinates(k)[0] - target), k};
    std::sort(order.begin(), order.end());
    std::vector<double> v(d->size());
    detail::LaneEmdenOde::State y{M, 0.0, 0.0, 0.0};
    double t = 0.0, h = 1e-3 * L;
    for (const auto& [dist, k] : order) {
        if (dist > t) {
            y = ode.advance(y, dist - t, h);
            t = dist;
        }
        v[k] = std::max(y[0], 0.0);
    }

    ShootingResult r{Field(d, std::move(v))};
    r.peak = M;
    r.slope = -end[1];
    r.dirichlet = 2.0 * end[2];
    r.lambda1 = 0.5 * r.dirichlet - p.alpha() / p.q() * 2.0 * end[3];
    return r;
}

// ---------------------------------------------------------------------------
// Nodal critical points.

struct NodalControls {
    double tol = 1e-8;
    int newton_max_iters = 80;
    int random_seeds = 4;                 // two-bump partitions in addition to the half splits
    std::uint64_t seed = 1;
    double gap_floor_rel = 1e-6;          // relative to |Lambda_1|
    DescentControls part;                 // used for the per-part ground states
};

struct NodalResult {
    Field nodal;
    double lambda2_est = 0.0;
    double residual = 0.0;
    int newton_iterations = 0;
    std::string seed_kind;                // which partition produced the accepted point
    int seeds_tried = 0;
    int seeds_collapsed = 0;
};

namespace detail {

/// Newton with line search on || A u - alpha psi_eps(u) ||, with eps
/// decreasing geometrically to eps_min. The Jacobian is indefinite at nodal
/// points, so a general sparse LU is used.
inline int polish_critical_point(const LaplaceSolver& lap, Eigen::VectorXd& x, const MediumParams& p, double eps0,
                                 double eps_min, double tol, int max_iters) {
    const double vol = lap.domain()->cell_volume();
    const double a = p.alpha(), q = p.q();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    int total = 0;
    for (double eps = eps0; eps >= eps_min * 0.999; eps *= 0.01) {
        Eigen::VectorXd F = gradient_vec(lap, x, p, eps);
        double res = l2(F, vol);
        for (int it = 0; it < max_iters && res > 1e-3 * tol; ++it, ++total) {
            Eigen::SparseMatrix<double> J = lap.matrix();
            for (Eigen::Index k = 0; k < x.size(); ++k) J.coeffRef(k, k) -= potential_curvature(x[k], a, q, eps);
            lu.compute(J);
            if (lu.info() != Eigen::Success) return total;
            const Eigen::VectorXd dx = -lu.solve(F);
            double step = 1.0;
            bool improved = false;
            for (int bt = 0; bt < 30; ++bt, step *= 0.5) {
                const Eigen::VectorXd cand = x + step * dx;
                const Eigen::VectorXd Fc = gradient_vec(lap, cand, p, eps);
                const double rc = l2(Fc, vol);
                if (rc < res) {
                    x = cand;
                    F = Fc;
                    res = rc;
                    improved = true;
                    break;
                }
            }
            if (!improved) break;
        }
    }
    return total;
}

struct Partition {
    std::string kind;
    std::vector<std::uint8_t> plus, minus;  // lattice masks
};

inline std::vector<Partition> nodal_partitions(const Domain& d, int random_count, std::uint64_t seed) {
    std::vector<Partition> out;
    const std::size_t lattice = d.mask().size();
    // Bounding box of the interior in lattice coordinates.
    int lo[2] = {1 << 30, 1 << 30}, hi[2] = {-1, -1};
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto pos = d.lattice_position(k);
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], pos[static_cast<std::size_t>(a)]);
            hi[a] = std::max(hi[a], pos[static_cast<std::size_t>(a)]);
        }
    }
    for (int axis = 0; axis < d.dimension(); ++axis) {
        Partition part{std::string("half-split-") + (axis == 0 ? "x" : "y"), std::vector<std::uint8_t>(lattice, 0),
                       std::vector<std::uint8_t>(lattice, 0)};
        // Doubled midpoint, so an odd node count leaves the middle node as the interface.
        const int mid2 = lo[axis] + hi[axis];
        for (std::size_t k = 0; k < d.size(); ++k) {
            const auto pos = d.lattice_position(k);
            const int c2 = 2 * pos[static_cast<std::size_t>(axis)];
            const std::size_t cell = static_cast<std::size_t>(pos[0] + d.lattice_nx() * pos[1]);
            if (c2 < mid2 - 1) part.plus[cell] = 1;
            else if (c2 > mid2 + 1) part.minus[cell] = 1;
        }
        out.push_back(std::move(part));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (int r = 0; r < random_count; ++r) {
        const auto c1 = d.coordinates(pick(rng)), c2 = d.coordinates(pick(rng));
        Partition part{"two-bump-" + std::to_string(r), std::vector<std::uint8_t>(lattice, 0),
                       std::vector<std::uint8_t>(lattice, 0)};
        const auto h = d.spacing();
        const double hmax = std::max(h[0], d.dimension() == 2 ? h[1] : 0.0);
        for (std::size_t k = 0; k < d.size(); ++k) {
            const auto x = d.coordinates(k);
            const double d1 = std::hypot(x[0] - c1[0], x[1] - c1[1]);
            const double d2 = std::hypot(x[0] - c2[0], x[1] - c2[1]);
            const auto pos = d.lattice_position(k);
            const std::size_t cell = static_cast<std::size_t>(pos[0] + d.lattice_nx() * pos[1]);
            // A one-node separation keeps the two parts from touching in the stencil.
            if (d1 < d2 - hmax) part.plus[cell] = 1;
            else if (d2 < d1 - hmax) part.minus[cell] = 1;
        }
        out.push_back(std::move(part));
    }
    return out;
}

}  // namespace detail

/// Least-energy sign-changing critical point found from a family of seed
/// partitions: each part carries its own ground state, the difference is
/// polished by Newton on the whole domain, and candidates that lose a sign or
/// fall back to Lambda_1 are discarded.
inline NodalResult estimate_lambda2(const GroundState& ground, const MediumParams& p, const NodalControls& ctl = {}) {
    const DomainHandle& d = ground.w.handle();
    const LaplaceSolver lap(d);
    const double lam = inverse_power_iteration(lap).value;
    const double A0 = detail::amplitude_scale(p, lam);
    const double floor = ctl.gap_floor_rel * std::fabs(ground.lambda1);

    NodalResult best{Field(d), 0.0, 0.0, 0, {}, 0, 0};
    bool found = false;
    for (const auto& part : detail::nodal_partitions(*d, ctl.random_seeds, ctl.seed)) {
        ++best.seeds_tried;
        Field combined(d);
        try {
            const DomainHandle dp = d->with_mask(part.plus), dm = d->with_mask(part.minus);
            const GroundState gp = solve_ground_state(dp, p, ctl.part);
            const GroundState gm = solve_ground_state(dm, p, ctl.part);
            combined = transfer(gp.w, d) - transfer(gm.w, d);
        } catch (const ContractViolation&) {
            ++best.seeds_collapsed;  // part too thin or disconnected on this lattice
            continue;
        } catch (const NumericalFailure&) {
            ++best.seeds_collapsed;
            continue;
        }
        Eigen::VectorXd x = to_eigen(combined);
        const int its = detail::polish_critical_point(lap, x, p, 1e-4 * A0, 1e-10 * A0, ctl.tol, ctl.newton_max_iters);
        const Field u = from_eigen(d, x);
        const double res = residual_norm(u, p);
        const double E = functional(u, p).total;
        const double scale = u.sup_norm();
        const bool both_signs = u.max() > 1e-3 * scale && -u.min() > 1e-3 * scale;
        if (!(res <= ctl.tol) || !both_signs || !(E > ground.lambda1 + floor)) {
            ++best.seeds_collapsed;
            continue;
        }
        if (!found || E < best.lambda2_est) {
            best.nodal = u;
            best.lambda2_est = E;
            best.residual = res;
            best.newton_iterations = its;
            best.seed_kind = part.kind;
            found = true;
        }
    }
    if (!found) {
        throw NumericalFailure("estimate_lambda2: all " + std::to_string(best.seeds_tried) +
                               " nodal seeds collapsed to constant sign or failed to converge");
    }
    return best;
}

struct LevelReport {
    double lambda1 = 0.0;
    double lambda2_est = 0.0;
    Field w;
    Field nodal;
    double ground_residual = 0.0;
    double nodal_residual = 0.0;
    int ground_iterations = 0;
    int nodal_iterations = 0;
    std::string nodal_seed;
    double gap_floor = 0.0;
};

inline LevelReport compute_levels(const DomainHandle& d, const MediumParams& p, const DescentControls& gctl = {},
                                  const NodalControls& nctl = {}) {
    const GroundState g = solve_ground_state(d, p, gctl);
    const NodalResult n = estimate_lambda2(g, p, nctl);
    return LevelReport{g.lambda1,
                       n.lambda2_est,
                       g.w,
                       n.nodal,
                       g.residual,
                       n.residual,
                       g.descent_iterations + g.newton_iterations,
                       n.newton_iterations,
                       n.seed_kind,
                       nctl.gap_floor_rel * std::fabs(g.lambda1)};
}

/// Lambda_2 estimate exceeds Lambda_1 by more than the floor.
inline bool verify_gap(const LevelReport& r) { return r.lambda2_est - r.lambda1 > r.gap_floor; }

inline nlohmann::json to_json(const LevelReport& r) {
    return {{"lambda1", r.lambda1},
            {"lambda2_est", r.lambda2_est},
            {"gap", r.lambda2_est - r.lambda1},
            {"gap_floor", r.gap_floor},
            {"gap_ok", verify_gap(r)},
            {"ground_residual", r.ground_residual},
            {"nodal_residual", r.nodal_residual},
            {"ground_iterations", r.ground_iterations},
            {"nodal_iterations", r.nodal_iterations},
            {"nodal_seed", r.nodal_seed},
            {"w_min", r.w.min()},
            {"w_max", r.w.max()}};
}

}  // namespace pmelab
