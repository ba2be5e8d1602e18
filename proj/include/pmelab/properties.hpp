#pragma once

// Randomized property suites shared by the `verify` study and the acceptance
// driver. Each suite reports failure counts and the worst observed slack
// against its tolerance.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmelab/energy.hpp"
#include "pmelab/groundstate.hpp"
#include "pmelab/mountainpass.hpp"
#include "pmelab/nonlinearity.hpp"
#include "pmelab/pme.hpp"

namespace pmelab {

struct PropertyOutcome {
    std::string name;
    long trials = 0;
    long failures = 0;
    double worst = 0.0;   // largest violation margin (<= 0 is slack); boolean predicates give 1 or 0
    double tol = 0.0;
    bool pass() const { return failures == 0; }
};

inline nlohmann::json to_json(const PropertyOutcome& o) {
    return {{"name", o.name}, {"trials", o.trials}, {"failures", o.failures},
            {"worst", o.worst}, {"tol", o.tol},     {"pass", o.pass()}};
}

/// Scalar inequalities for signed powers, Psi_delta and F_delta on
/// `n` random triples each.
inline std::vector<PropertyOutcome> scalar_inequality_suite(long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), ug(1.0001, 6.0), um(1.05, 4.0), ud(-8.0, 1.0);
    PropertyOutcome diff{"power_difference_bound", n, 0, -INFINITY, 0.0};
    PropertyOutcome holder{"power_inverse_holder", n, 0, -INFINITY, 0.0};
    PropertyOutcome psi{"psi_delta_holder", n, 0, -INFINITY, 0.0};
    PropertyOutcome flip{"f_delta_lipschitz", n, 0, -INFINITY, 0.0};
    for (long i = 0; i < n; ++i) {
        const double a = ux(rng), b = ux(rng), g = ug(rng);
        if (!power_difference_bound_holds(a, b, g)) ++diff.failures;
        if (!power_inverse_holder_holds(a, b, g)) ++holder.failures;
        const double c = ux(rng), e = ux(rng);
        const MediumParams p(um(rng));
        const RegularizationParam d(std::pow(10.0, ud(rng)));
        if (!psi_holder_holds(c, e, d, p)) ++psi.failures;
        if (!f_delta_lipschitz_holds(c, e, d, p)) ++flip.failures;
    }
    for (auto* o : {&diff, &holder, &psi, &flip}) o->worst = o->failures ? 1.0 : 0.0;
    return {diff, holder, psi, flip};
}

namespace detail {

inline Field random_field(const DomainHandle& d, std::mt19937_64& rng, double amp, bool smooth) {
    std::normal_distribution<double> n(0.0, 1.0);
    if (!smooth) {
        std::vector<double> v(d->size());
        for (double& x : v) x = amp * n(rng);
        return Field(d, std::move(v));
    }
    double c[5][3];
    for (auto& row : c)
        for (double& x : row) x = n(rng);
    const double lx = d->extent()[0], ly = d->extent()[1];
    const int ny = d->dimension() == 1 ? 1 : 3;
    return Field::sample(d, [&](double x, double y) {
        double s = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < ny; ++j)
                s += c[i][j] * std::sin((i + 1) * std::numbers::pi * x / lx) *
                     (ny == 1 ? 1.0 : std::sin((j + 1) * std::numbers::pi * y / ly));
        return amp * s;
    });
}

inline Field absolute(const Field& f) {
    return f.map([](double x) { return std::fabs(x); });
}

}  // namespace detail

/// Discrete integration by parts, <grad f, grad g> = <f, -Delta_h g>, on
/// random pairs over a rectangle, a disk and an interval.
inline PropertyOutcome summation_by_parts_suite(long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const DomainHandle ds[] = {Domain::interval(1.0, 40), Domain::rectangle(1.5, 1.0, 15, 10), Domain::disk(1.0, 20)};
    PropertyOutcome o{"summation_by_parts", n, 0, -INFINITY, 1e-12};
    for (long i = 0; i < n; ++i) {
        const DomainHandle& d = ds[i % 3];
        const Field f = detail::random_field(d, rng, 1.0, false), g = detail::random_field(d, rng, 1.0, false);
        const double Df = dirichlet_energy(f), Dg = dirichlet_energy(g);
        const double lhs = 0.5 * (dirichlet_energy(f + g) - Df - Dg);
        const double rhs = -inner(f, laplacian(g));
        // Polarization cancels terms of size Df + Dg; measure against them.
        const double rel = std::fabs(lhs - rhs) / (Df + Dg);
        o.worst = std::max(o.worst, rel - o.tol);
        if (rel > o.tol) ++o.failures;
    }
    return o;
}

/// Energy below the chord along the hidden-convexity curve, and the bound
/// max_t F(gamma(t)) <= max{F(phi^+), F(phi)} along the ground-state
/// connection, on `n` random field pairs each. Tolerance 1e-8 plus the stencil
/// cross term of phi^+ and phi^-.
inline std::vector<PropertyOutcome> path_bound_suite(long n, std::uint64_t seed, int K = 8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.05, 3.0);
    struct Case {
        MediumParams p;
        DomainHandle d;
        Field w;
    };
    std::vector<Case> cases;
    for (double m : {1.5, 2.0, 3.0}) {
        for (const DomainHandle& d : {Domain::interval(1.0, 48), Domain::rectangle(1.5, 1.0, 15, 10)}) {
            const MediumParams p(m);
            cases.push_back({p, d, solve_ground_state(d, p).w});
        }
    }
    PropertyOutcome convex{"hidden_convexity_chord", n, 0, -INFINITY, 1e-8};
    PropertyOutcome connection{"ground_state_connection_bound", n, 0, -INFINITY, 1e-8};
    for (long i = 0; i < n; ++i) {
        const Case& c = cases[static_cast<std::size_t>(i) % cases.size()];
        const double scale = c.w.sup_norm();
        const bool smooth = i % 4 != 3;
        const Field a = detail::absolute(detail::random_field(c.d, rng, scale * amp(rng), smooth));
        const Field b = detail::absolute(detail::random_field(c.d, rng, scale * amp(rng), true));
        const auto prof = path_energy_profile(hidden_convexity_path(a, b, K, c.p), c.p);
        double worst = -INFINITY;
        for (int k = 0; k <= K; ++k) {
            const double t = static_cast<double>(k) / K;
            worst = std::max(worst, prof[static_cast<std::size_t>(k)] - ((1.0 - t) * prof.front() + t * prof.back()));
        }
        convex.worst = std::max(convex.worst, worst - convex.tol);
        if (worst > convex.tol) ++convex.failures;

        const Field phi = detail::random_field(c.d, rng, scale * amp(rng), smooth);
        const ConnectionResult r = connect_to_ground_state(c.w, phi, K, c.p);
        connection.worst = std::max(connection.worst, r.max_energy - r.bound - r.tolerance);
        if (r.flagged) ++connection.failures;
    }
    return {convex, connection};
}

/// Per-step Lyapunov decrease and the entropy ledger on a short canned run.
inline PropertyOutcome lyapunov_canned_run() {
    const MediumParams p(2.0);
    const DomainHandle d = Domain::rectangle(1.5, 1.0, 15, 10);
    const Field u0 = Field::sample(d, [](double x, double y) {
        return 0.5 * std::sin(std::numbers::pi * y) * (std::sin(4.0 * std::numbers::pi * x / 3.0) + 0.3);
    });
    SolverControls c;
    c.t_end = 2.0;
    const SimulationTrace tr = simulate_rescaled(u0, p, c);
    const EntropyReport er = entropy_report(tr, 1e-8);
    PropertyOutcome o{"lyapunov_monotone_canned_run", static_cast<long>(tr.steps.size()), 0,
                      std::max(er.worst_step_excess, er.lp1_excess), 10.0 * c.newton_tol};
    if (!er.steps_ok) ++o.failures;
    if (!er.lp1_ok) ++o.failures;
    if (!er.dissipation_monotone) ++o.failures;
    return o;
}

}  // namespace pmelab
