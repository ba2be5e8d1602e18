#pragma once

// Time integration of the rescaled flow dv/dt = Delta Phi(v) + alpha v and,
// through v(x,s) = e^{alpha s} u(x, e^s - 1), of the porous medium equation
// du/dt = Delta Phi(u), with a running Lyapunov and dissipation ledger.
//
// One step of size tau solves
//   v+ - tau Delta_h Phi_delta(v+) = (1 + tau alpha) v
// by damped Newton in v+. The growth term is taken from the old level: the
// energy is convex in theta = Phi(v) for the diffusion part and concave for
// the growth part, and this split makes the discrete step dissipate
//   V_delta(v+) - V_delta(v) <= -(4m/(m+1)^2) ||g(v+) - g(v)||^2 / tau
// exactly, with V_delta(v) = 1/2 int|grad Phi_delta(v)|^2 - alpha int F_delta(v).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "pmelab/energy.hpp"
#include "pmelab/errors.hpp"
#include "pmelab/field_io.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/nonlinearity.hpp"

namespace pmelab {

struct SolverControls {
    double tau = 1e-2;                 // rescaled time step
    RegularizationParam delta{1e-8};
    double newton_tol = 1e-10;         // sup norm of the step residual
    int newton_max_iters = 50;
    int max_halvings = 10;
    double checkpoint_interval = 0.1;  // rescaled time between stored fields
    double t_end = 20.0;               // rescaled final time

    void validate(const MediumParams& p) const {
        if (!(tau > 0.0)) throw ContractViolation("SolverControls: tau must be > 0");
        if (!(tau * p.alpha() < 1.0)) throw ContractViolation("SolverControls: tau * alpha must be < 1");
        if (!(t_end > 0.0)) throw ContractViolation("SolverControls: t_end must be > 0");
        if (!(newton_tol > 0.0) || newton_max_iters < 1 || max_halvings < 0)
            throw ContractViolation("SolverControls: invalid Newton controls");
        if (!(checkpoint_interval > 0.0)) throw ContractViolation("SolverControls: checkpoint_interval must be > 0");
    }
};

struct StepDiagnostics {
    int newton_iterations = 0;
    double residual = 0.0;
    int substeps = 1;
};

struct SimulationTrace {
    double m = 2.0;
    double tau = 0.0;
    double delta = 0.0;
    double newton_tol = 0.0;
    double h2 = 0.0;                       // square of the largest grid spacing
    std::vector<double> times;             // after every step, starting at 0
    std::vector<double> lyapunov;          // V[v] = F(Phi(v))
    std::vector<double> lyapunov_reg;      // V_delta[v]
    std::vector<double> dissipation_cum;   // (4m/(m+1)^2) sum ||g(v+) - g(v)||^2 / tau
    std::vector<StepDiagnostics> steps;    // one per step (index i produced times[i+1])
    std::vector<double> checkpoint_times;
    std::vector<Field> checkpoints;
};

/// v(., 0) = u0: the transform is the identity at t = 0.
inline Field rescale_datum(const Field& u0) { return u0; }

/// u(., t) = (1 + t)^{-alpha} v(., log(1 + t)).
inline Field to_original(const Field& v, double s, const MediumParams& p) {
    return std::exp(-p.alpha() * s) * v;
}

/// V[v] = F(Phi(v)).
inline double lyapunov(const Field& v, const MediumParams& p) {
    return functional(v.map([&](double x) { return phi(x, p); }), p).total;
}

inline double lyapunov_regularized(const Field& v, const MediumParams& p, const RegularizedPower& rp) {
    if (rp.delta() == 0.0) return lyapunov(v, p);
    const Field th = v.map([&](double x) { return rp.phi(x); });
    double pot = 0.0;
    for (double x : v.values()) pot += rp.f(x);
    return 0.5 * dirichlet_energy(th) - p.alpha() * pot * v.domain().cell_volume();
}

namespace detail {

class RescaledStepper {
public:
    RescaledStepper(DomainHandle d, const MediumParams& p, const SolverControls& ctl)
        : d_(std::move(d)), p_(p), ctl_(ctl), rp_(p, ctl.delta), A_(negative_laplacian_matrix(*d_)) {
        ctl.validate(p);
        Eigen::SparseMatrix<double> J = A_;
        J.diagonal().array() += 1.0;
        lu_.analyzePattern(J);
    }

    const RegularizedPower& power() const noexcept { return rp_; }

    /// Newton for u + tau A Phi_delta(u) = (1 + tau alpha) v. Returns false on
    /// failure, leaving `out` unspecified.
    bool solve(const Eigen::VectorXd& v, double tau, Eigen::VectorXd& out, StepDiagnostics& diag) {
        const Eigen::VectorXd rhs = (1.0 + tau * p_.alpha()) * v;
        Eigen::VectorXd u = v;
        Eigen::VectorXd th(u.size()), dth(u.size());
        auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& t) {
            for (Eigen::Index k = 0; k < x.size(); ++k) t[k] = rp_.phi(x[k]);
            return Eigen::VectorXd(x + tau * (A_ * t) - rhs);
        };
        Eigen::VectorXd R = residual(u, th);
        double rn = R.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < ctl_.newton_max_iters; ++it) {
            if (rn <= ctl_.newton_tol) {
                out = std::move(u);
                diag.newton_iterations += it;
                diag.residual = std::max(diag.residual, rn);
                return true;
            }
            for (Eigen::Index k = 0; k < u.size(); ++k) dth[k] = rp_.dphi(u[k]);
            // J = I + tau A diag(Phi_delta'(u)).
            Eigen::SparseMatrix<double> J = tau * A_ * dth.asDiagonal();
            J.diagonal().array() += 1.0;
            lu_.factorize(J);
            if (lu_.info() != Eigen::Success) return false;
            const Eigen::VectorXd du = -lu_.solve(R);
            if (!du.allFinite()) return false;
            double step = 1.0;
            bool ok = false;
            const double r2 = R.squaredNorm();
            for (int bt = 0; bt < 30; ++bt, step *= 0.5) {
                const Eigen::VectorXd cand = u + step * du;
                Eigen::VectorXd tc(u.size());
                const Eigen::VectorXd Rc = residual(cand, tc);
                if (Rc.squaredNorm() <= (1.0 - 1e-4 * step) * r2 || Rc.lpNorm<Eigen::Infinity>() <= ctl_.newton_tol) {
                    u = cand;
                    R = Rc;
                    rn = R.lpNorm<Eigen::Infinity>();
                    ok = true;
                    break;
                }
            }
            if (!ok) return false;
        }
        if (rn <= ctl_.newton_tol) {
            out = std::move(u);
            diag.newton_iterations += ctl_.newton_max_iters;
            diag.residual = std::max(diag.residual, rn);
            return true;
        }
        return false;
    }

    /// One step of size tau, split into 2^k equal substeps after Newton
    /// failures. Adds the discrete dissipation of every substep to `diss`.
    Field step(const Field& v, double tau, StepDiagnostics& diag, double& diss) {
        const double w4 = 4.0 * p_.m() / ((p_.m() + 1.0) * (p_.m() + 1.0));
        const double vol = d_->cell_volume();
        for (int k = 0; k <= ctl_.max_halvings; ++k) {
            const int parts = 1 << k;
            const double sub = tau / parts;
            Eigen::VectorXd x = to_eigen(v), next;
            StepDiagnostics dg;
            dg.substeps = parts;
            double dd = 0.0;
            bool ok = true;
            for (int s = 0; s < parts && ok; ++s) {
                ok = solve(x, sub, next, dg);
                if (!ok) break;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double dg_i = g_map(next[i], p_) - g_map(x[i], p_);
                    acc += dg_i * dg_i;
                }
                dd += w4 * acc * vol / sub;
                x = next;
            }
            if (ok) {
                diag = dg;
                diss += dd;
                return from_eigen(d_, x);
            }
        }
        throw NumericalFailure("step_rescaled: Newton failed after " + std::to_string(ctl_.max_halvings) +
                               " step halvings");
    }

private:
    DomainHandle d_;
    MediumParams p_;
    SolverControls ctl_;
    RegularizedPower rp_;
    Eigen::SparseMatrix<double> A_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

}  // namespace detail

struct StepResult {
    Field v_next;
    StepDiagnostics diag;
    double dissipation = 0.0;
};

inline StepResult step_rescaled(const Field& v, const MediumParams& p, const SolverControls& ctl) {
    detail::RescaledStepper st(v.handle(), p, ctl);
    StepResult r{Field(v.handle()), {}, 0.0};
    r.v_next = st.step(v, ctl.tau, r.diag, r.dissipation);
    return r;
}

/// Integrates the rescaled flow from v(0) = u0 to ctl.t_end; the last step is
/// shortened to land on t_end.
inline SimulationTrace simulate_rescaled(const Field& u0, const MediumParams& p, const SolverControls& ctl) {
    detail::RescaledStepper st(u0.handle(), p, ctl);
    SimulationTrace tr;
    tr.m = p.m();
    tr.tau = ctl.tau;
    tr.delta = ctl.delta.delta;
    tr.newton_tol = ctl.newton_tol;
    const auto h = u0.domain().spacing();
    const double hmax = u0.domain().dimension() == 1 ? h[0] : std::max(h[0], h[1]);
    tr.h2 = hmax * hmax;

    Field v = rescale_datum(u0);
    const long nsteps = std::max(1L, static_cast<long>(std::ceil(ctl.t_end / ctl.tau - 1e-9)));
    const long every = std::max(1L, std::lround(ctl.checkpoint_interval / ctl.tau));
    double diss = 0.0;
    tr.times.push_back(0.0);
    tr.lyapunov.push_back(lyapunov(v, p));
    tr.lyapunov_reg.push_back(lyapunov_regularized(v, p, st.power()));
    tr.dissipation_cum.push_back(0.0);
    tr.checkpoint_times.push_back(0.0);
    tr.checkpoints.push_back(v);
    for (long n = 1; n <= nsteps; ++n) {
        const double t0 = static_cast<double>(n - 1) * ctl.tau;
        const double t1 = n == nsteps ? ctl.t_end : static_cast<double>(n) * ctl.tau;
        StepDiagnostics dg;
        v = st.step(v, t1 - t0, dg, diss);
        tr.steps.push_back(dg);
        tr.times.push_back(t1);
        tr.lyapunov.push_back(lyapunov(v, p));
        tr.lyapunov_reg.push_back(lyapunov_regularized(v, p, st.power()));
        tr.dissipation_cum.push_back(diss);
        if (n % every == 0 || n == nsteps) {
            tr.checkpoint_times.push_back(t1);
            tr.checkpoints.push_back(v);
        }
    }
    return tr;
}

struct OriginalTrace {
    SimulationTrace rescaled;
    std::vector<double> times;   // original time t = e^s - 1 at each rescaled checkpoint
    std::vector<Field> u;
};

/// The porous medium flow up to original time T, via the rescaled flow up
/// to log(1 + T).
inline OriginalTrace simulate_original(const Field& u0, const MediumParams& p, SolverControls ctl, double T) {
    if (!(T > 0.0)) throw ContractViolation("simulate_original: T must be > 0");
    ctl.t_end = std::log1p(T);
    OriginalTrace r{simulate_rescaled(u0, p, ctl), {}, {}};
    for (std::size_t k = 0; k < r.rescaled.checkpoints.size(); ++k) {
        const double s = r.rescaled.checkpoint_times[k];
        r.times.push_back(std::expm1(s));
        r.u.push_back(to_original(r.rescaled.checkpoints[k], s, p));
    }
    return r;
}

struct EntropyReport {
    double worst_step_increase = 0.0;      // max over steps of V(n+1) - V(n) (exact V)
    double worst_step_excess = 0.0;        // same minus its tolerance 10 newton_tol (1 + |V(n)|)
    double worst_step_time = 0.0;
    double worst_step_increase_reg = 0.0;  // with V_delta
    double worst_step_excess_reg = 0.0;
    double lp1_defect = 0.0;               // max over T of V(T) + D(T) - V(0)
    double lp1_defect_reg = 0.0;           // with V_delta
    double lp1_excess = 0.0;               // max over T of defect minus C (tau + h^2) T
    double lp1_excess_reg = 0.0;
    double lp1_worst_time = 0.0;
    double lp1_constant = 0.0;
    bool steps_ok = false;
    bool lp1_ok = false;
    bool dissipation_monotone = false;
};

/// Per-step monotonicity and the cumulative entropy / dissipation ledger,
/// for the unregularized V and for the regularized V_delta that the scheme
/// dissipates exactly. The pass flags refer to the unregularized V.
inline EntropyReport entropy_report(const SimulationTrace& tr, double lp1_constant) {
    EntropyReport r;
    r.lp1_constant = lp1_constant;
    r.worst_step_excess = -INFINITY;
    r.worst_step_excess_reg = -INFINITY;
    r.lp1_excess = -INFINITY;
    r.lp1_excess_reg = -INFINITY;
    r.worst_step_increase = -INFINITY;
    r.worst_step_increase_reg = -INFINITY;
    r.lp1_defect = -INFINITY;
    r.lp1_defect_reg = -INFINITY;
    r.dissipation_monotone = true;
    const double V0 = tr.lyapunov.front(), W0 = tr.lyapunov_reg.front();
    for (std::size_t n = 1; n < tr.times.size(); ++n) {
        const double inc = tr.lyapunov[n] - tr.lyapunov[n - 1];
        const double tol = 10.0 * tr.newton_tol * (1.0 + std::fabs(tr.lyapunov[n - 1]));
        if (inc - tol > r.worst_step_excess) {
            r.worst_step_excess = inc - tol;
            r.worst_step_time = tr.times[n];
        }
        r.worst_step_increase = std::max(r.worst_step_increase, inc);
        const double inc_r = tr.lyapunov_reg[n] - tr.lyapunov_reg[n - 1];
        const double tol_r = 10.0 * tr.newton_tol * (1.0 + std::fabs(tr.lyapunov_reg[n - 1]));
        r.worst_step_increase_reg = std::max(r.worst_step_increase_reg, inc_r);
        r.worst_step_excess_reg = std::max(r.worst_step_excess_reg, inc_r - tol_r);
        if (tr.dissipation_cum[n] < tr.dissipation_cum[n - 1]) r.dissipation_monotone = false;

        const double T = tr.times[n];
        const double lp_tol = lp1_constant * (tr.tau + tr.h2) * T;
        const double def = tr.lyapunov[n] + tr.dissipation_cum[n] - V0;
        const double def_r = tr.lyapunov_reg[n] + tr.dissipation_cum[n] - W0;
        r.lp1_defect = std::max(r.lp1_defect, def);
        r.lp1_defect_reg = std::max(r.lp1_defect_reg, def_r);
        if (def - lp_tol > r.lp1_excess) {
            r.lp1_excess = def - lp_tol;
            r.lp1_worst_time = T;
        }
        r.lp1_excess_reg = std::max(r.lp1_excess_reg, def_r - lp_tol);
    }
    if (tr.times.size() < 2) {
        r.worst_step_excess = r.worst_step_excess_reg = r.lp1_excess = r.lp1_excess_reg = 0.0;
        r.worst_step_increase = r.worst_step_increase_reg = r.lp1_defect = r.lp1_defect_reg = 0.0;
    }
    r.steps_ok = r.worst_step_excess <= 0.0;
    r.lp1_ok = r.lp1_excess <= 0.0;
    return r;
}

/// C for the ledger tolerance C (tau + h^2) T, from a run whose exact
/// solution is stationary: the largest observed defect per unit (tau + h^2) T,
/// floored at `floor` so that rounding alone never fails the check.
inline double calibrate_lp1_constant(const SimulationTrace& stationary, double floor = 1e-8) {
    double c = 0.0;
    const double V0 = stationary.lyapunov.front();
    for (std::size_t n = 1; n < stationary.times.size(); ++n) {
        const double def = stationary.lyapunov[n] + stationary.dissipation_cum[n] - V0;
        c = std::max(c, def / ((stationary.tau + stationary.h2) * stationary.times[n]));
    }
    return std::max(c, floor);
}

/// Checkpoint rows: t, V, dissipation_cum, newton iterations of the step that
/// produced the checkpoint, and, when a target U = Phi^{-1}(w) is given, the
/// sup distances to U and -U.
inline std::string trace_csv(const SimulationTrace& tr, const Field* target = nullptr) {
    std::ostringstream os;
    os << "t,V,dissipation_cum,newton_iters";
    if (target) os << ",sup_dist_plus,sup_dist_minus";
    os << '\n';
    std::size_t n = 0;
    for (std::size_t c = 0; c < tr.checkpoints.size(); ++c) {
        const double t = tr.checkpoint_times[c];
        while (n + 1 < tr.times.size() && tr.times[n] < t - 1e-12) ++n;
        os << detail::format_double(t) << ',' << detail::format_double(tr.lyapunov[n]) << ','
           << detail::format_double(tr.dissipation_cum[n]) << ',' << (n == 0 ? 0 : tr.steps[n - 1].newton_iterations);
        if (target) {
            os << ',' << detail::format_double(sup_distance(tr.checkpoints[c], *target)) << ','
               << detail::format_double(sup_distance(tr.checkpoints[c], -*target));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace pmelab
