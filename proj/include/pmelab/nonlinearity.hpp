#pragma once

// Scalar nonlinearities of the porous medium equation. The power map Phi,
// its inverse and the dissipation map g live here together with the
// regularized family Phi_delta / Psi_delta / F_delta used by the integrator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pmelab/errors.hpp"

namespace pmelab {

/// Porous-medium exponent m > 1 together with the derived pair
/// alpha = 1/(m-1) and q = (m+1)/m.
class MediumParams {
public:
    explicit MediumParams(double m) : m_(m) {
        if (!(m > 1.0) || !std::isfinite(m)) {
            throw ContractViolation("MediumParams: exponent m must satisfy m > 1, got " +
                                    std::to_string(m));
        }
        alpha_ = 1.0 / (m - 1.0);
        q_ = (m + 1.0) / m;
    }

    double m() const noexcept { return m_; }
    double alpha() const noexcept { return alpha_; }
    double q() const noexcept { return q_; }
    /// Interpolation exponent 2/q - 1.
    double theta() const noexcept { return 2.0 / q_ - 1.0; }

    friend bool operator==(const MediumParams& a, const MediumParams& b) noexcept {
        return a.m_ == b.m_;
    }

private:
    double m_;
    double alpha_;
    double q_;
};

struct RegularizationParam {
    double delta = 0.0;

    explicit RegularizationParam(double d = 0.0) : delta(d) {
        if (!(d >= 0.0)) throw ContractViolation("RegularizationParam: delta must be >= 0");
    }
};

namespace detail {

inline double signed_power(double s, double exponent) {
    if (s == 0.0) return 0.0;
    return std::copysign(std::pow(std::fabs(s), exponent), s);
}

/// Gauss-Legendre nodes/weights on [-1, 1], computed once per order.
template <std::size_t N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};

    GaussLegendre() {
        for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
            double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(N) + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (std::size_t j = 1; j <= N; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
                }
                dp = static_cast<double>(N) * (z * p0 - p1) / (z * z - 1.0);
                double dz = p0 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-16) break;
            }
            x[i] = -z;
            x[N - 1 - i] = z;
            w[i] = w[N - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    template <typename F>
    double integrate(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += w[i] * f(c + hl * x[i]);
        return s * hl;
    }
};

inline const GaussLegendre<10>& gl10() {
    static const GaussLegendre<10> rule;
    return rule;
}

template <typename F>
double adaptive_gl(F&& f, double a, double b, double whole, double rtol, int depth) {
    const double mid = 0.5 * (a + b);
    const double left = gl10().integrate(f, a, mid);
    const double right = gl10().integrate(f, mid, b);
    const double refined = left + right;
    if (depth <= 0 || std::fabs(refined - whole) <= rtol * std::fabs(refined) + 1e-300) {
        return refined;
    }
    return adaptive_gl(f, a, mid, left, rtol, depth - 1) +
           adaptive_gl(f, mid, b, right, rtol, depth - 1);
}

/// Adaptive Gauss-Legendre quadrature by panel bisection.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double rtol) {
    if (a == b) return 0.0;
    return adaptive_gl(f, a, b, gl10().integrate(f, a, b), rtol, 48);
}

}  // namespace detail

/// Phi(s) = |s|^{m-1} s.
inline double phi(double s, const MediumParams& p) { return detail::signed_power(s, p.m()); }

inline double phi_derivative(double s, const MediumParams& p) {
    return p.m() * std::pow(std::fabs(s), p.m() - 1.0);
}

/// Inverse of phi: |y|^{1/m - 1} y.
inline double phi_inverse(double y, const MediumParams& p) {
    return detail::signed_power(y, 1.0 / p.m());
}

/// g(s) = |s|^{(m-1)/2} s; the quantity whose time derivative is dissipated.
inline double g_map(double s, const MediumParams& p) {
    return detail::signed_power(s, 0.5 * (p.m() + 1.0));
}

inline double phi_delta_derivative(double s, RegularizationParam d, const MediumParams& p) {
    if (d.delta == 0.0) return phi_derivative(s, p);
    return p.m() * std::pow(d.delta + s * s, 0.5 * (p.m() - 1.0));
}

/// Phi_delta(s) = m * int_0^s (delta + t^2)^{(m-1)/2} dt, evaluated by adaptive
/// Gauss-Legendre quadrature to relative tolerance 1e-12. delta = 0 gives phi.
inline double phi_delta(double s, RegularizationParam d, const MediumParams& p) {
    if (d.delta == 0.0) return phi(s, p);
    if (s == 0.0 || std::isnan(s)) return s;
    const double e = 0.5 * (p.m() - 1.0);
    const double delta = d.delta;
    auto integrand = [e, delta](double t) { return std::pow(delta + t * t, e); };
    const double a = std::fabs(s);
    // Panels: [0, sqrt(delta)] then geometric doubling, so each panel sees the
    // transition scale of the integrand only once.
    double lo = 0.0, hi = std::min(a, std::sqrt(delta));
    double total = 0.0;
    while (true) {
        total += detail::integrate_adaptive(integrand, lo, hi, 1e-13);
        if (hi >= a) break;
        lo = hi;
        hi = std::min(a, 2.0 * hi);
    }
    return std::copysign(p.m() * total, s);
}

/// Inverse of phi_delta, by bisection-safeguarded Newton.
/// Throws NumericalFailure when the root finder does not converge.
inline double psi_delta(double y, RegularizationParam d, const MediumParams& p) {
    if (d.delta == 0.0) return phi_inverse(y, p);
    if (y == 0.0 || std::isnan(y)) return y;
    const double target = std::fabs(y);
    const double tol = 1e-12 * (1.0 + target);
    // phi_delta(s) >= phi(s) and phi_delta(s) >= m delta^{(m-1)/2} s on s >= 0.
    double lo = 0.0;
    double hi = std::min(phi_inverse(target, p),
                         target / (p.m() * std::pow(d.delta, 0.5 * (p.m() - 1.0))));
    double x = 0.5 * hi;
    for (int it = 0; it < 200; ++it) {
        const double f = phi_delta(x, d, p) - target;
        if (std::fabs(f) <= tol) return std::copysign(x, y);
        if (f > 0.0) hi = x; else lo = x;
        double next = x - f / phi_delta_derivative(x, d, p);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    throw NumericalFailure("psi_delta: root finder did not converge for y = " + std::to_string(y));
}

/// F_delta(s) = m/(m+1) [(delta + s^2)^{(m+1)/2} - delta^{(m+1)/2}].
inline double f_delta(double s, RegularizationParam d, const MediumParams& p) {
    const double k = p.m() / (p.m() + 1.0);
    const double e = 0.5 * (p.m() + 1.0);
    if (d.delta == 0.0) return k * std::pow(std::fabs(s), p.m() + 1.0);
    // delta^e ((1 + s^2/delta)^e - 1), free of cancellation for small s.
    return k * std::pow(d.delta, e) * std::expm1(e * std::log1p(s * s / d.delta));
}

// ---------------------------------------------------------------------------
// Elementary inequalities as executable predicates. Each allows a rounding
// slack proportional to the magnitudes involved.

namespace detail {
constexpr double kSlack = 64.0 * std::numeric_limits<double>::epsilon();
}

/// ||a|^{g-1}a - |b|^{g-1}b| <= g (|a|^{g-1} + |b|^{g-1}) |a-b|.
inline bool power_difference_bound_holds(double a, double b, double gamma) {
    const double lhs = std::fabs(detail::signed_power(a, gamma) - detail::signed_power(b, gamma));
    const double ka = std::pow(std::fabs(a), gamma - 1.0), kb = std::pow(std::fabs(b), gamma - 1.0);
    const double rhs = gamma * (ka + kb) * std::fabs(a - b);
    return lhs <= rhs + detail::kSlack * (ka * std::fabs(a) + kb * std::fabs(b));
}

/// |a-b| <= 2^{(g-1)/g} ||a|^{g-1}a - |b|^{g-1}b|^{1/g}.
inline bool power_inverse_holder_holds(double a, double b, double gamma) {
    const double lhs = std::fabs(a - b);
    const double diff =
        std::fabs(detail::signed_power(a, gamma) - detail::signed_power(b, gamma));
    const double rhs = std::pow(2.0, (gamma - 1.0) / gamma) * std::pow(diff, 1.0 / gamma);
    return lhs <= rhs * (1.0 + 1e-9) + detail::kSlack * (std::fabs(a) + std::fabs(b));
}

/// |Psi_delta(a) - Psi_delta(b)| <= 2^{(m-1)/m} |a-b|^{1/m}.
inline bool psi_holder_holds(double a, double b, RegularizationParam d, const MediumParams& p) {
    const double lhs = std::fabs(psi_delta(a, d, p) - psi_delta(b, d, p));
    const double rhs = std::pow(2.0, (p.m() - 1.0) / p.m()) * std::pow(std::fabs(a - b), 1.0 / p.m());
    // psi_delta is resolved to 1e-12 (1+|y|) in the image; translate to the argument.
    const double root_tol = 2e-12 * (1.0 + std::max(std::fabs(a), std::fabs(b)));
    return lhs <= rhs * (1.0 + 1e-9) + std::pow(root_tol, 1.0 / p.m());
}

/// |F_delta(a) - F_delta(b)| <= m ((delta+a^2)^{m/2} + (delta+b^2)^{m/2}) |a-b|.
inline bool f_delta_lipschitz_holds(double a, double b, RegularizationParam d, const MediumParams& p) {
    const double lhs = std::fabs(f_delta(a, d, p) - f_delta(b, d, p));
    const double ka = std::pow(d.delta + a * a, 0.5 * p.m());
    const double kb = std::pow(d.delta + b * b, 0.5 * p.m());
    const double rhs = p.m() * (ka + kb) * std::fabs(a - b);
    return lhs <= rhs + detail::kSlack * (ka * (std::fabs(a) + 1.0) + kb * (std::fabs(b) + 1.0));
}

// ---------------------------------------------------------------------------

/// Phi_delta with memoized quadrature panels, for pointwise use on grids.
///
/// Breakpoints are uniform on [0, 2 sqrt(delta)] and geometric (ratio 1.25)
/// beyond; the cumulative integral at each breakpoint is computed once with
/// the adaptive rule, and an evaluation integrates only the last partial panel
/// with a fixed 10-point rule. Immutable after construction, so one instance
/// may be shared across threads. delta = 0 delegates to the closed forms.
class RegularizedPower {
public:
    RegularizedPower(const MediumParams& p, RegularizationParam d)
        : p_(p), delta_(d.delta), expo_(0.5 * (p.m() - 1.0)) {
        if (delta_ == 0.0) return;
        const double sd = std::sqrt(delta_);
        knots_.push_back(0.0);
        for (int k = 1; k <= 4; ++k) knots_.push_back(0.5 * sd * k);
        const double top = 1e8 * std::max(1.0, sd);
        while (knots_.back() < top) knots_.push_back(knots_.back() * 1.25);
        cumulative_.assign(knots_.size(), 0.0);
        auto f = [this](double t) { return integrand(t); };
        for (std::size_t k = 1; k < knots_.size(); ++k) {
            cumulative_[k] = cumulative_[k - 1] +
                             p_.m() * detail::integrate_adaptive(f, knots_[k - 1], knots_[k], 1e-15);
        }
        uniform_step_ = 0.5 * sd;
        log_ratio_ = std::log(1.25);
    }

    const MediumParams& params() const noexcept { return p_; }
    double delta() const noexcept { return delta_; }

    double phi(double s) const {
        if (delta_ == 0.0) return pmelab::phi(s, p_);
        const double a = std::fabs(s);
        if (a == 0.0 || std::isnan(s)) return s;
        if (a >= knots_.back()) return phi_delta(s, RegularizationParam(delta_), p_);
        const std::size_t k = panel_of(a);
        auto f = [this](double t) { return integrand(t); };
        return std::copysign(cumulative_[k] + p_.m() * detail::gl10().integrate(f, knots_[k], a), s);
    }

    double dphi(double s) const {
        if (delta_ == 0.0) return phi_derivative(s, p_);
        return p_.m() * integrand(s);
    }

    /// Inverse map. Resolved to relative accuracy ~1e-14 in the image.
    double psi(double y) const {
        if (delta_ == 0.0) return phi_inverse(y, p_);
        const double target = std::fabs(y);
        if (target == 0.0 || std::isnan(y)) return y;
        if (target >= cumulative_.back()) return psi_delta(y, RegularizationParam(delta_), p_);
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        const std::size_t k = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
        double lo = knots_[k], hi = knots_[k + 1];
        const double c0 = cumulative_[k], c1 = cumulative_[k + 1];
        double x = lo + (hi - lo) * (target - c0) / (c1 - c0);
        auto f = [this](double t) { return integrand(t); };
        for (int it2 = 0; it2 < 60; ++it2) {
            const double val = c0 + p_.m() * detail::gl10().integrate(f, knots_[k], x);
            const double r = val - target;
            if (std::fabs(r) <= 4e-16 * target) break;
            if (r > 0.0) hi = x; else lo = x;
            double next = x - r / (p_.m() * integrand(x));
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (next == x) break;
            x = next;
        }
        return std::copysign(x, y);
    }

    /// Derivative of psi; +inf at 0 when delta = 0.
    double dpsi(double y) const {
        const double s = psi(y);
        const double d = dphi(s);
        return d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
    }

    double f(double s) const { return f_delta(s, RegularizationParam(delta_), p_); }

private:
    double integrand(double t) const {
        const double base = delta_ + t * t;
        if (expo_ == 0.5) return std::sqrt(base);
        if (expo_ == 1.0) return base;
        if (expo_ == 0.25) return std::sqrt(std::sqrt(base));
        return std::pow(base, expo_);
    }

    std::size_t panel_of(double a) const {
        if (a < knots_[4]) return static_cast<std::size_t>(a / uniform_step_);
        std::size_t k = 4 + static_cast<std::size_t>(std::log(a / knots_[4]) / log_ratio_);
        k = std::min(k, knots_.size() - 2);
        while (k > 4 && knots_[k] > a) --k;
        while (k + 1 < knots_.size() - 1 && knots_[k + 1] <= a) ++k;
        return k;
    }

    MediumParams p_;
    double delta_;
    double expo_;
    std::vector<double> knots_;
    std::vector<double> cumulative_;
    double uniform_step_ = 0.0;
    double log_ratio_ = 0.0;
};

}  // namespace pmelab
