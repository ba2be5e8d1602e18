#pragma once

// Discrete paths in the energy landscape. Paths built from the ground state
// bound the energy of sign-changing data; a string method estimates the
// mountain-pass level between w and -w.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pmelab/energy.hpp"
#include "pmelab/errors.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/groundstate.hpp"
#include "pmelab/linalg.hpp"

namespace pmelab {

/// Nodes of a curve, uniform parameter t_k = k/K. The first and last node
/// are the endpoints; reparameterization only moves the interior.
class DiscretePath {
public:
    explicit DiscretePath(std::vector<Field> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.size() < 2) throw ContractViolation("DiscretePath: needs at least two nodes");
        for (const auto& n : nodes_) n.require_same_domain(nodes_.front());
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const Field& operator[](std::size_t k) const { return nodes_[k]; }
    const Field& front() const { return nodes_.front(); }
    const Field& back() const { return nodes_.back(); }
    const std::vector<Field>& nodes() const noexcept { return nodes_; }

    void set_interior(std::size_t k, Field f) {
        if (k == 0 || k + 1 >= nodes_.size()) throw ContractViolation("DiscretePath: endpoints are fixed");
        f.require_same_domain(nodes_.front());
        nodes_[k] = std::move(f);
    }

    /// This path followed by `next` (whose first node must equal our last).
    DiscretePath concatenated(const DiscretePath& next) const {
        std::vector<Field> all = nodes_;
        all.insert(all.end(), next.nodes_.begin() + 1, next.nodes_.end());
        return DiscretePath(std::move(all));
    }

private:
    std::vector<Field> nodes_;
};

inline std::vector<double> path_energy_profile(const DiscretePath& path, const MediumParams& p) {
    std::vector<double> e;
    e.reserve(path.size());
    for (const auto& n : path.nodes()) e.push_back(functional(n, p).total);
    return e;
}

/// sigma(t) = ((1-t) a^q + t b^q)^{1/q} for nonnegative a, b.
inline DiscretePath hidden_convexity_path(const Field& a, const Field& b, int K, const MediumParams& p) {
    a.require_same_domain(b);
    if (K < 1) throw ContractViolation("hidden_convexity_path: K must be >= 1");
    if (a.min() < 0.0 || b.min() < 0.0) throw ContractViolation("hidden_convexity_path: endpoints must be nonnegative");
    const double q = p.q();
    std::vector<Field> nodes{a};
    for (int k = 1; k < K; ++k) {
        const double t = static_cast<double>(k) / K;
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::pow((1.0 - t) * std::pow(a[i], q) + t * std::pow(b[i], q), 1.0 / q);
        nodes.emplace_back(a.handle(), std::move(v));
    }
    nodes.push_back(b);
    return DiscretePath(std::move(nodes));
}

struct SweepResult {
    DiscretePath path;
    /// t0 = (alpha int|phi^-|^q / int|grad phi^-|^2)^{1/(2-q)}; infinity when phi >= 0.
    double turning_point = 0.0;
    /// Stencil coupling of phi^+ and phi^-: F(eta(t)) exceeds the split
    /// formula by exactly t times this. Zero when no edge joins the supports.
    double cross_term = 0.0;
    /// max_k |F(eta(t_k)) - split formula(t_k)|
    double split_defect = 0.0;
};

/// eta(t) = phi^+ - t phi^- with the unsigned negative part phi^-.
inline SweepResult negative_part_sweep(const Field& phi, int K, const MediumParams& p) {
    if (K < 1) throw ContractViolation("negative_part_sweep: K must be >= 1");
    const Field pos = positive_part(phi), neg = negative_part_magnitude(phi);
    std::vector<Field> nodes;
    for (int k = 0; k <= K; ++k) {
        const double t = static_cast<double>(k) / K;
        nodes.push_back(pos - t * neg);
    }
    SweepResult r{DiscretePath(std::move(nodes))};
    const double Dn = dirichlet_energy(neg), Pn = lp_norm_pow(neg, p.q());
    r.turning_point = Dn > 0.0 ? std::pow(p.alpha() * Pn / Dn, 1.0 / (2.0 - p.q())) : INFINITY;
    // -<grad phi^+, grad phi^->: only stencil edges joining the two supports contribute.
    r.cross_term = inner(pos, laplacian(neg));
    const double Fp = functional(pos, p).total;
    for (int k = 0; k <= K; ++k) {
        const double t = static_cast<double>(k) / K;
        const double split = Fp + 0.5 * t * t * Dn - p.alpha() / p.q() * std::pow(t, p.q()) * Pn;
        r.split_defect = std::max(r.split_defect, std::fabs(functional(r.path[static_cast<std::size_t>(k)], p).total - split));
    }
    return r;
}

struct ConnectionResult {
    DiscretePath path;
    double bound = 0.0;          // max{F(phi^+), F(phi)}
    double max_energy = 0.0;     // along the path
    double defect = 0.0;         // max(0, max_energy - bound)
    double tolerance = 0.0;      // 1e-8 plus the stencil cross term of the sweep
    double cross_term = 0.0;
    bool flagged = false;        // defect above tolerance
};

/// Path from the ground state w to phi: hidden convexity from w to phi^+,
/// then the negative-part sweep. Checks that no node exceeds
/// max{F(phi^+), F(phi)} and flags the result otherwise.
inline ConnectionResult connect_to_ground_state(const Field& w, const Field& phi, int K, const MediumParams& p) {
    w.require_same_domain(phi);
    if (w.min() < 0.0) throw ContractViolation("connect_to_ground_state: w must be the positive ground state");
    const DiscretePath first = hidden_convexity_path(w, positive_part(phi), K, p);
    const SweepResult sweep = negative_part_sweep(phi, K, p);
    ConnectionResult r{first.concatenated(sweep.path)};
    r.bound = std::max(functional(positive_part(phi), p).total, functional(phi, p).total);
    const auto prof = path_energy_profile(r.path, p);
    r.max_energy = *std::max_element(prof.begin(), prof.end());
    r.defect = std::max(0.0, r.max_energy - r.bound);
    // With the cross term c, F(eta(t)) <= max{F(phi^+) + c, F(phi)}, so c is
    // the only discretization slack; it vanishes for separated supports.
    r.cross_term = sweep.cross_term;
    r.tolerance = 1e-8 + sweep.cross_term;
    r.flagged = r.defect > r.tolerance;
    return r;
}

// ---------------------------------------------------------------------------
// String method.

struct StringControls {
    int nodes = 41;                 // K + 1
    int max_iters = 4000;
    double step = 0.5;              // initial Sobolev-gradient step
    double eps_start = 1e-2;        // regularization relative to the amplitude scale
    double eps_end = 1e-4;
    int eps_stages = 3;
    double rtol = 1e-10;            // per-iteration growth allowance on the max energy
    double converge_tol = 1e-9;     // relative change of the max energy over a window of iterations
    double tol = 1e-8;              // saddle residual target for the polish
};

struct StringResult {
    double saddle_energy = 0.0;
    DiscretePath path;
    std::vector<double> max_energy_series;
    int iterations = 0;
    bool converged = false;
    bool polished = false;          // max node replaced by the nearby critical point
    double saddle_residual = 0.0;
    std::size_t saddle_index = 0;
};

namespace detail {

inline double l2_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double vol) {
    return std::sqrt((a - b).squaredNorm() * vol);
}

/// Moves interior nodes to equal L^2 arclength along the piecewise-linear path.
inline void reparameterize(std::vector<Eigen::VectorXd>& x, double vol) {
    const std::size_t n = x.size();
    std::vector<double> s(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) s[k] = s[k - 1] + l2_dist(x[k], x[k - 1], vol);
    const double total = s.back();
    if (!(total > 0.0)) return;
    std::vector<Eigen::VectorXd> out(n);
    out.front() = x.front();
    out.back() = x.back();
    std::size_t seg = 0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 2 < n && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out[k] = (1.0 - t) * x[seg] + t * x[seg + 1];
    }
    x = std::move(out);
}

}  // namespace detail

/// Simplified string method between w and -w. Each iteration takes one
/// Sobolev-gradient step of the regularized energy at every interior node
/// and redistributes the nodes to equal L^2 arclength; an iteration that
/// raises the maximal node energy is rejected and the step halved. The
/// initial path leaves the straight segment through 0 along the second
/// Dirichlet eigenfunction. Afterwards the highest node is polished by
/// Newton and replaced by the critical point it approximates, provided that
/// point is sign-changing and stays within one node spacing.
inline StringResult string_method_lambda_star(const Field& w, const MediumParams& p, const StringControls& ctl = {}) {
    if (ctl.nodes < 3) throw ContractViolation("string_method_lambda_star: need at least 3 nodes");
    const DomainHandle& d = w.handle();
    const LaplaceSolver lap(d);
    const double vol = d->cell_volume();
    const Eigenpair e1 = inverse_power_iteration(lap);
    const Eigenpair e2 = inverse_power_iteration(lap, {e1.vector});
    const double A0 = detail::amplitude_scale(p, e1.value);

    const Eigen::VectorXd W = to_eigen(w);
    const Eigen::VectorXd Z = e2.vector * (W.norm() / e2.vector.norm());
    const auto n = static_cast<std::size_t>(ctl.nodes);
    std::vector<Eigen::VectorXd> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(n - 1);
        x[k] = std::cos(std::numbers::pi * t) * W + std::sin(std::numbers::pi * t) * Z;
    }
    x.front() = W;
    x.back() = -W;
    detail::reparameterize(x, vol);

    auto energy = [&](const Eigen::VectorXd& v) { return functional(from_eigen(d, v), p).total; };
    auto max_energy = [&](const std::vector<Eigen::VectorXd>& xs, std::size_t* arg = nullptr) {
        double m = -INFINITY;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const double e = energy(xs[k]);
            if (e > m) {
                m = e;
                if (arg) *arg = k;
            }
        }
        return m;
    };

    StringResult r{0.0, DiscretePath({w, -w}), {}};
    double current = max_energy(x);
    r.max_energy_series.push_back(current);
    double step = ctl.step;
    const double ratio = ctl.eps_stages > 1 ? std::pow(ctl.eps_end / ctl.eps_start, 1.0 / (ctl.eps_stages - 1)) : 1.0;
    double eps_rel = ctl.eps_start;
    const int per_stage = std::max(1, ctl.max_iters / std::max(1, ctl.eps_stages));
    for (int stage = 0; stage < ctl.eps_stages; ++stage, eps_rel *= ratio) {
        const double eps = eps_rel * A0;
        const std::size_t window = 50;
        std::size_t stage_start = r.max_energy_series.size();
        for (int it = 0; it < per_stage; ++it) {
            std::vector<Eigen::VectorXd> cand = x;
            for (std::size_t k = 1; k + 1 < n; ++k)
                cand[k] = x[k] - step * lap.solve(detail::gradient_vec(lap, x[k], p, eps));
            detail::reparameterize(cand, vol);
            const double next = max_energy(cand);
            ++r.iterations;
            if (next > current + ctl.rtol * (1.0 + std::fabs(current))) {
                step *= 0.5;
                if (step < 1e-8) break;
                continue;
            }
            x = std::move(cand);
            current = next;
            r.max_energy_series.push_back(current);
            step = std::min(ctl.step, step * 1.1);
            const std::size_t len = r.max_energy_series.size();
            if (len - stage_start > window) {
                const double old = r.max_energy_series[len - 1 - window];
                if (old - current <= ctl.converge_tol * std::fabs(current)) {
                    if (stage == ctl.eps_stages - 1) r.converged = true;
                    break;
                }
            }
        }
    }

    std::size_t arg = 0;
    r.saddle_energy = max_energy(x, &arg);
    r.saddle_index = arg;
    r.saddle_residual = residual_norm(from_eigen(d, x[arg]), p);

    // Newton polish of the highest node.
    Eigen::VectorXd s = x[arg];
    detail::polish_critical_point(lap, s, p, 1e-4 * A0, 1e-10 * A0, ctl.tol, 80);
    const Field sf = from_eigen(d, s);
    const double sres = residual_norm(sf, p);
    const double scale = sf.sup_norm();
    const bool nodal = sf.max() > 1e-3 * scale && -sf.min() > 1e-3 * scale;
    const double spacing = std::max(detail::l2_dist(x[arg], x[arg > 0 ? arg - 1 : arg + 1], vol),
                                    detail::l2_dist(x[arg], x[arg + 1 < n ? arg + 1 : arg - 1], vol));
    if (sres <= ctl.tol && nodal && detail::l2_dist(s, x[arg], vol) <= spacing) {
        x[arg] = s;
        r.polished = true;
        r.saddle_energy = max_energy(x, &arg);
        r.saddle_index = arg;
        r.saddle_residual = sres;
    }

    std::vector<Field> fields;
    fields.reserve(n);
    fields.push_back(w);
    for (std::size_t k = 1; k + 1 < n; ++k) fields.push_back(from_eigen(d, x[k]));
    fields.push_back(-w);
    r.path = DiscretePath(std::move(fields));
    return r;
}

}  // namespace pmelab
