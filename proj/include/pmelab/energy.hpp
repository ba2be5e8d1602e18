#pragma once

// The Lane-Emden energy
//   F(phi) = 1/2 int |grad phi|^2 - (alpha/q) int |phi|^q,
// with its discrete gradient and the domain constants that bound it.

#include <cmath>
#include <utility>

#include "pmelab/errors.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/linalg.hpp"
#include "pmelab/nonlinearity.hpp"

namespace pmelab {

struct EnergyBreakdown {
    double dirichlet_half = 0.0;  // 1/2 int |grad phi|^2
    double potential = 0.0;       // (alpha/q) int |phi|^q
    double total = 0.0;           // dirichlet_half - potential
};

inline EnergyBreakdown functional(const Field& phi, const MediumParams& p) {
    EnergyBreakdown e;
    e.dirichlet_half = 0.5 * dirichlet_energy(phi);
    e.potential = p.alpha() / p.q() * lp_norm_pow(phi, p.q());
    e.total = e.dirichlet_half - e.potential;
    return e;
}

/// Energy whose gradient is functional_gradient(phi, p, eps): the potential
/// density |s|^q is replaced by (eps^2 + s^2)^{q/2} - eps^q.
inline double regularized_functional(const Field& phi, const MediumParams& p, double eps) {
    if (eps == 0.0) return functional(phi, p).total;
    const double q = p.q(), eq = std::pow(eps, q);
    double s = 0.0;
    for (double v : phi.values()) s += std::pow(eps * eps + v * v, 0.5 * q) - eq;
    return 0.5 * dirichlet_energy(phi) - p.alpha() / q * s * phi.domain().cell_volume();
}

/// alpha (eps^2 + s^2)^{(q-2)/2} s; at eps = 0 this is alpha |s|^{q-2} s with value 0 at s = 0.
inline double potential_slope(double s, double alpha, double q, double eps) {
    if (eps == 0.0) return s == 0.0 ? 0.0 : alpha * std::copysign(std::pow(std::fabs(s), q - 1.0), s);
    return alpha * std::pow(eps * eps + s * s, 0.5 * (q - 2.0)) * s;
}

/// Derivative of potential_slope in s.
inline double potential_curvature(double s, double alpha, double q, double eps) {
    const double r2 = eps * eps + s * s;
    if (r2 == 0.0) return 0.0;
    return alpha * std::pow(r2, 0.5 * (q - 4.0)) * (eps * eps + (q - 1.0) * s * s);
}

/// -Delta_h phi - alpha (eps^2 + phi^2)^{(q-2)/2} phi, the L^2 gradient of
/// regularized_functional.
inline Field functional_gradient(const Field& phi, const MediumParams& p, double eps) {
    if (!(eps >= 0.0)) throw ContractViolation("functional_gradient: eps must be >= 0");
    const Field lap = laplacian(phi);
    std::vector<double> g(phi.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = -lap[k] - potential_slope(phi[k], p.alpha(), p.q(), eps);
    return Field(phi.handle(), std::move(g));
}

/// Discrete L^2 norm of the unregularized Lane-Emden residual.
inline double residual_norm(const Field& u, const MediumParams& p) {
    return l2_norm(functional_gradient(u, p, 0.0));
}

struct DomainConstants {
    double lambda1 = 0.0;    // first Dirichlet eigenvalue of -Delta_h
    double lambda1_q = 0.0;  // min int|grad phi|^2 / (int|phi|^q)^{2/q}
    double theta = 0.0;      // 2/q - 1
    int power_iterations = 0;
    int quotient_iterations = 0;
};

namespace detail {

inline double sobolev_quotient(const Field& phi, double q) {
    return dirichlet_energy(phi) / std::pow(lp_norm_pow(phi, q), 2.0 / q);
}

}  // namespace detail

/// lambda1 by inverse power iteration; lambda1(Omega; q) by Sobolev-gradient
/// descent on the quotient, renormalized to unit L^q norm after every step.
inline DomainConstants compute_domain_constants(const DomainHandle& d, const MediumParams& p) {
    const LaplaceSolver lap(d);
    const Eigenpair first = inverse_power_iteration(lap);
    DomainConstants c;
    c.lambda1 = first.value;
    c.theta = p.theta();

    const double q = p.q();
    const double vol = d->cell_volume();
    auto normalize = [&](Eigen::VectorXd v) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < v.size(); ++k) s += std::pow(std::fabs(v[k]), q);
        return Eigen::VectorXd(v / std::pow(s * vol, 1.0 / q));
    };
    Eigen::VectorXd x = normalize(first.vector.cwiseAbs());
    double R = detail::sobolev_quotient(from_eigen(d, x), q);
    for (int it = 1; it <= 5000; ++it) {
        // Gradient of R at unit L^q norm: 2 A x - 2 R |x|^{q-2} x; step 1/2 in
        // the A-metric is the nonlinear inverse iteration x <- R A^{-1}|x|^{q-1}.
        Eigen::VectorXd pw(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) pw[k] = std::copysign(std::pow(std::fabs(x[k]), q - 1.0), x[k]);
        const Eigen::VectorXd dir = R * lap.solve(pw) - x;
        double step = 1.0;
        Eigen::VectorXd cand;
        double Rc = R;
        for (int bt = 0; bt < 40; ++bt) {
            cand = normalize(x + step * dir);
            Rc = detail::sobolev_quotient(from_eigen(d, cand), q);
            if (Rc <= R) break;
            step *= 0.5;
        }
        const double change = (cand - x).lpNorm<Eigen::Infinity>() / x.lpNorm<Eigen::Infinity>();
        const bool done = (R - Rc) <= 1e-15 * R && change <= 1e-12;
        if (Rc <= R) {
            x = std::move(cand);
            R = Rc;
        }
        c.quotient_iterations = it;
        if (done || step < 1e-12) {
            c.lambda1_q = R;
            return c;
        }
    }
    throw NumericalFailure("compute_domain_constants: Sobolev-Poincare quotient did not converge");
}

/// The constant C in F(phi) >= 1/4 int|grad phi|^2 - C obtained from Young's
/// inequality with eps = lambda1(Omega; q) / 2.
inline double coercivity_constant(const MediumParams& p, const DomainConstants& c) {
    const double q = p.q(), a = p.alpha();
    const double eps = 0.5 * c.lambda1_q;
    return (2.0 - q) / (2.0 * q) * std::pow(a, 2.0 / (2.0 - q)) * std::pow(eps, -q / (2.0 - q));
}

struct CoercivityCheck {
    double lower_bound = 0.0;
    bool holds = false;
};

inline CoercivityCheck coercivity_bound(const Field& phi, const MediumParams& p, const DomainConstants& c) {
    const double D = dirichlet_energy(phi);
    const double F = functional(phi, p).total;
    CoercivityCheck r;
    r.lower_bound = 0.25 * D - coercivity_constant(p, c);
    r.holds = F >= r.lower_bound - 1e-12 * (std::fabs(F) + std::fabs(r.lower_bound));
    return r;
}

}  // namespace pmelab
