#pragma once

// Long-time diagnostics of the rescaled flow. Omega-limits are classified
// against +-Phi^{-1}(w) and compared with the energy-based sign selection
// rule, using generated sign-changing data that satisfy its hypothesis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmelab/energy.hpp"
#include "pmelab/errors.hpp"
#include "pmelab/field_io.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/groundstate.hpp"
#include "pmelab/pme.hpp"

namespace pmelab {

enum class Classification { Positive, Negative, Other, NotStabilized };

inline const char* to_string(Classification c) {
    switch (c) {
        case Classification::Positive: return "Positive";
        case Classification::Negative: return "Negative";
        case Classification::Other: return "Other";
        case Classification::NotStabilized: return "NotStabilized";
    }
    return "?";
}

enum class Prediction { Positive, Undetermined };

inline const char* to_string(Prediction p) { return p == Prediction::Positive ? "Positive" : "Undetermined"; }

struct OmegaControls {
    double window = 1.0;       // rescaled time between compared checkpoints
    double stab_tol = 1e-6;    // relative L^{m+1} distance over one window
    double class_tol = 1e-2;   // sup distance of Phi(limit) to +-w, relative to sup w
};

struct OmegaLimitReport {
    std::optional<Field> limit_field;
    std::optional<double> stabilization_time;
    Classification classification = Classification::NotStabilized;
    double lane_emden_residual = 0.0;
    double distance_plus = 0.0;    // sup |Phi(limit) - w| / sup w
    double distance_minus = 0.0;   // sup |Phi(limit) + w| / sup w
    std::vector<double> window_times;
    std::vector<double> window_distances;
};

inline Field phi_field(const Field& v, const MediumParams& p) {
    return v.map([&](double x) { return phi(x, p); });
}

inline Field phi_inverse_field(const Field& w, const MediumParams& p) {
    return w.map([&](double x) { return phi_inverse(x, p); });
}

/// Stabilization: every later pair of checkpoints one window apart is within
/// stab_tol in relative L^{m+1} distance.
inline OmegaLimitReport detect_omega_limit(const SimulationTrace& tr, const Field& w, const MediumParams& p,
                                           const OmegaControls& ctl = {}) {
    if (tr.checkpoints.size() < 3 || tr.checkpoint_times.back() < 2.0 * ctl.window)
        throw ContractViolation("detect_omega_limit: trace shorter than two windows");
    const double mp1 = p.m() + 1.0;
    OmegaLimitReport r;
    // Pair each checkpoint with the first one at least a window later.
    std::size_t j = 0;
    for (std::size_t i = 0; i < tr.checkpoints.size(); ++i) {
        const double target = tr.checkpoint_times[i] + ctl.window - 1e-9;
        j = std::max(j, i + 1);
        while (j < tr.checkpoints.size() && tr.checkpoint_times[j] < target) ++j;
        if (j >= tr.checkpoints.size()) break;
        const double num = std::pow(lp_norm_pow(tr.checkpoints[j] - tr.checkpoints[i], mp1), 1.0 / mp1);
        const double den = std::pow(lp_norm_pow(tr.checkpoints[j], mp1), 1.0 / mp1);
        r.window_times.push_back(tr.checkpoint_times[i]);
        r.window_distances.push_back(den > 0.0 ? num / den : num);
    }
    std::optional<std::size_t> first_good;
    for (std::size_t i = r.window_distances.size(); i-- > 0;) {
        if (r.window_distances[i] > ctl.stab_tol) break;
        first_good = i;
    }
    const Field& last = tr.checkpoints.back();
    const Field th = phi_field(last, p);
    r.lane_emden_residual = residual_norm(th, p);
    const double ws = w.sup_norm();
    r.distance_plus = sup_distance(th, w) / ws;
    r.distance_minus = sup_distance(th, -w) / ws;
    if (!first_good) return r;
    r.limit_field = last;
    r.stabilization_time = r.window_times[*first_good];
    if (r.distance_plus <= ctl.class_tol) r.classification = Classification::Positive;
    else if (r.distance_minus <= ctl.class_tol) r.classification = Classification::Negative;
    else r.classification = Classification::Other;
    return r;
}

struct SelectionVerdict {
    double energy_plus = 0.0;    // F(Phi(u0^+))
    double energy_minus = 0.0;   // F(Phi(u0^-)), unsigned negative part
    double energy = 0.0;         // F(Phi(u0))
    double threshold = 0.0;      // Lambda_2 estimate minus the margin
    bool condition_A = false;
    bool condition_B = false;
    bool hypothesis_ok = false;
    Prediction prediction = Prediction::Undetermined;
};

/// margin = margin_frac * (lambda2_est - lambda1).
inline double hypothesis_threshold(const LevelReport& lv, double margin_frac = 0.05) {
    return lv.lambda2_est - margin_frac * (lv.lambda2_est - lv.lambda1);
}

inline SelectionVerdict selection_predict(const Field& u0, const LevelReport& lv, const MediumParams& p,
                                          double margin_frac = 0.05) {
    u0.require_same_domain(lv.w);
    SelectionVerdict s;
    s.energy_plus = functional(phi_field(positive_part(u0), p), p).total;
    s.energy_minus = functional(phi_field(negative_part_magnitude(u0), p), p).total;
    s.energy = functional(phi_field(u0, p), p).total;
    s.threshold = hypothesis_threshold(lv, margin_frac);
    s.hypothesis_ok = s.energy < s.threshold;
    s.condition_A = s.energy_minus >= 0.0;
    s.condition_B = s.energy_minus < 0.0 && s.energy_plus < s.threshold;
    s.prediction = s.hypothesis_ok && (s.condition_A || s.condition_B) ? Prediction::Positive : Prediction::Undetermined;
    return s;
}

// ---------------------------------------------------------------------------
// Admissible data.

enum class DatumKind { ConditionA, ConditionB };

struct GeneratorOptions {
    DatumKind kind = DatumKind::ConditionA;
    // Layers removed from the domain. Empty: fractions of the shorter axis
    // (nodes), deepest first, never below two layers.
    std::vector<int> erosion_ladder;
    std::vector<double> erosion_fractions{0.2, 0.14, 0.1, 0.07, 0.04};
    double radius_ratio = 0.8;                      // bump radius ladder factor
    int max_radius_tries = 40;
    double margin_frac = 0.05;
    DescentControls ground;
};

struct GeneratedDatum {
    Field u0;               // Phi^{-1}(phi)
    Field phi;              // w_eroded - bump
    int erosion = 0;
    double radius = 0.0;
    double amplitude = 0.0; // bump height
    std::array<double, 2> center{};
    double energy = 0.0;    // F(phi)
    double bump_energy = 0.0;
    std::string ladder;     // attempted (erosion, radius) pairs
};

namespace detail {

/// (1 - |y|^2)^2 on the unit ball.
inline double bump_profile(double r2) { return r2 < 1.0 ? (1.0 - r2) * (1.0 - r2) : 0.0; }

/// Interior nodes of `d` that are neither in `inner` nor stencil-adjacent to it.
inline std::vector<std::uint8_t> vacated_frame(const Domain& d, const Domain& inner) {
    std::vector<std::uint8_t> frame(d.mask().size(), 0);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto [i, j] = d.lattice_position(k);
        bool free = inner.index_of(i, j) < 0;
        for (int dj = -1; free && dj <= 1; ++dj)
            for (int di = -1; free && di <= 1; ++di)
                if (inner.index_of(i + di, j + dj) >= 0) free = false;
        if (free) frame[static_cast<std::size_t>(i + d.lattice_nx() * j)] = 1;
    }
    return frame;
}

}  // namespace detail

/// Sign-changing datum with energy strictly between Lambda_1 and the
/// Lambda_2 estimate minus the margin: the ground state of an eroded domain
/// minus a small bump placed in the vacated frame. ConditionA data use a
/// bump of nonnegative energy; ConditionB data use a bump scaled below the
/// zero of its energy, so F(phi^-) < 0.
inline GeneratedDatum generate_admissible_datum(const LevelReport& lv, const MediumParams& p, std::uint64_t seed,
                                                const GeneratorOptions& opts = {}) {
    const DomainHandle& d = lv.w.handle();
    const auto h = d->spacing();
    const double hmin = d->dimension() == 1 ? h[0] : std::min(h[0], h[1]);
    const double threshold = hypothesis_threshold(lv, opts.margin_frac);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::ostringstream ladder;

    std::vector<int> erosions = opts.erosion_ladder;
    if (erosions.empty()) {
        const int nmin = d->dimension() == 1 ? d->lattice_nx() : std::min(d->lattice_nx(), d->lattice_ny());
        for (double f : opts.erosion_fractions) {
            const int k = std::max(2, static_cast<int>(std::lround(f * nmin)));
            if (std::find(erosions.begin(), erosions.end(), k) == erosions.end()) erosions.push_back(k);
        }
    }
    if (erosions.empty()) throw ContractViolation("generate_admissible_datum: empty erosion ladder");
    std::rotate(erosions.begin(), erosions.begin() + static_cast<long>(rng() % erosions.size()), erosions.end());
    for (int k : erosions) {
        DomainHandle inner;
        std::optional<GroundState> g;
        try {
            inner = d->eroded(k);
            g.emplace(solve_ground_state(inner, p, opts.ground));
        } catch (const ContractViolation&) {
            ladder << "(erosion " << k << ": domain too small) ";
            continue;
        }
        const Field wk = transfer(g->w, d);
        if (functional(wk, p).total >= threshold) {
            ladder << "(erosion " << k << ": F(w) above threshold) ";
            continue;
        }
        const auto frame = detail::vacated_frame(*d, *inner);
        // Frame node farthest from the rest of the domain: its distance to
        // the nearest non-frame lattice point bounds the bump radius.
        std::vector<std::pair<double, std::size_t>> centers;
        for (std::size_t n = 0; n < d->size(); ++n) {
            const auto [i, j] = d->lattice_position(n);
            if (!frame[static_cast<std::size_t>(i + d->lattice_nx() * j)]) continue;
            double room = INFINITY;
            const int reach = k + 2;
            for (int dj = (d->dimension() == 1 ? 0 : -reach); dj <= (d->dimension() == 1 ? 0 : reach); ++dj) {
                for (int di = -reach; di <= reach; ++di) {
                    const int ii = i + di, jj = j + dj;
                    const bool in_frame = ii >= 0 && jj >= 0 && ii < d->lattice_nx() && jj < d->lattice_ny() &&
                                          frame[static_cast<std::size_t>(ii + d->lattice_nx() * jj)];
                    if (in_frame) continue;
                    const double dx = di * h[0], dy = d->dimension() == 1 ? 0.0 : dj * h[1];
                    room = std::min(room, std::hypot(dx, dy));
                }
            }
            centers.emplace_back(room, n);
        }
        if (centers.empty()) {
            ladder << "(erosion " << k << ": empty frame) ";
            continue;
        }
        std::sort(centers.begin(), centers.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        // Random choice among the roomiest centers.
        std::size_t pool = 1;
        while (pool < centers.size() && centers[pool].first >= centers[0].first - 1e-12) ++pool;
        const std::size_t pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(pool)) % pool;
        const double room = centers[pick].first;
        const std::size_t cn = centers[pick].second;
        const auto x0 = d->coordinates(cn);
        // Height as a multiple of the zero t_zero of t -> F(t psi_r): above it
        // the bump energy is nonnegative, below it negative.
        const double tfac = opts.kind == DatumKind::ConditionA ? 1.5 + 1.5 * unit(rng) : 0.2 + 0.7 * unit(rng);

        auto make_bump = [&](double r, double height) {
            return Field::sample(d, [&](double x, double y) {
                const double dx = (x - x0[0]) / r, dy = d->dimension() == 1 ? 0.0 : (y - x0[1]) / r;
                return height * detail::bump_profile(dx * dx + dy * dy);
            });
        };
        double r = room;
        for (int tr = 0; tr < opts.max_radius_tries && r >= hmin; ++tr, r *= opts.radius_ratio) {
            const Field unit_bump = make_bump(r, 1.0);
            const double D = dirichlet_energy(unit_bump), P = lp_norm_pow(unit_bump, p.q());
            if (!(P > 0.0)) break;
            const double t_zero = std::pow(2.0 * p.alpha() * P / (p.q() * D), 1.0 / (2.0 - p.q()));
            const double height = tfac * t_zero;
            const Field bump = height * unit_bump;
            const double Fb = functional(bump, p).total;
            const Field ph = wk - bump;
            const double F = functional(ph, p).total;
            ladder << "(erosion " << k << ", r " << detail::format_double(r) << ", F " << detail::format_double(F) << ") ";
            const bool bump_ok = opts.kind == DatumKind::ConditionA ? Fb >= 0.0 : Fb < 0.0;
            const bool window_ok = F > lv.lambda1 && F < threshold;
            const bool sign_ok = ph.max() > 0.0 && ph.min() < 0.0;
            if (bump_ok && window_ok && sign_ok) {
                return GeneratedDatum{phi_inverse_field(ph, p), ph, k, r, height, x0, F, Fb, ladder.str()};
            }
        }
    }
    throw GenerationFailure("generate_admissible_datum: no admissible datum; tried " + ladder.str());
}

// ---------------------------------------------------------------------------

struct StudyControls {
    SolverControls solver;
    OmegaControls omega;
    double margin_frac = 0.05;
    double energy_tol_rel = 1e-4;   // |F(Phi(v_end)) - Lambda_1| / |Lambda_1|
    double grad_tol = 1e-2;         // || grad(Phi(v_end) -+ w) ||_{L^2}
    double barrier_tol = 1e-10;     // relative slack on max_t F(Phi(v)) <= F(Phi(u0))
};

struct StudyReport {
    SelectionVerdict verdict;
    OmegaLimitReport omega;
    SimulationTrace trace;
    std::vector<double> times;              // rescaled checkpoint times
    std::vector<double> original_times;     // e^s - 1
    std::vector<double> decay;              // || t^alpha u - Phi^{-1}(+-w) ||_inf, target by classification
    std::vector<double> energy;             // F(Phi(v)) at checkpoints
    std::vector<double> grad_distance;      // || grad(Phi(v) -+ w) ||_{L^2}
    double final_decay = 0.0;
    bool decay_decreasing_late = false;     // non-increasing over the last half of the run
    double energy_gap_rel = 0.0;
    double final_grad_distance = 0.0;
    double barrier_excess = 0.0;            // max_t F(Phi(v)) - F(Phi(u0))
    bool prediction_consistent = false;     // not (prediction Positive and observed != Positive)
    int target_sign = 1;
};

/// Runs the flow from u0 and compares the observed limit with the selection
/// rule. Rejects data that violate the energy hypothesis before simulating.
inline StudyReport convergence_study(const Field& u0, const LevelReport& lv, const MediumParams& p,
                                     const StudyControls& ctl) {
    StudyReport r;
    r.verdict = selection_predict(u0, lv, p, ctl.margin_frac);
    if (!r.verdict.hypothesis_ok)
        throw ContractViolation("convergence_study: F(Phi(u0)) = " + detail::format_double(r.verdict.energy) +
                                " is not below the Lambda_2 estimate minus the margin (" +
                                detail::format_double(r.verdict.threshold) + ")");
    r.trace = simulate_rescaled(u0, p, ctl.solver);
    r.omega = detect_omega_limit(r.trace, lv.w, p, ctl.omega);
    const Field& last = r.trace.checkpoints.back();
    r.target_sign = r.omega.classification == Classification::Negative ? -1
                    : r.omega.classification == Classification::Positive ? 1
                    : (r.omega.distance_minus < r.omega.distance_plus ? -1 : 1);
    const Field w_t = static_cast<double>(r.target_sign) * lv.w;
    const Field U = phi_inverse_field(w_t, p);
    const double E0 = functional(phi_field(u0, p), p).total;
    double emax = -INFINITY;
    for (std::size_t c = 0; c < r.trace.checkpoints.size(); ++c) {
        const double s = r.trace.checkpoint_times[c];
        const Field& v = r.trace.checkpoints[c];
        const Field th = phi_field(v, p);
        r.times.push_back(s);
        r.original_times.push_back(std::expm1(s));
        // t^alpha u(t) = (1 - e^{-s})^alpha v(s).
        r.decay.push_back(sup_distance(std::pow(-std::expm1(-s), p.alpha()) * v, U));
        r.energy.push_back(functional(th, p).total);
        r.grad_distance.push_back(std::sqrt(dirichlet_energy(th - w_t)));
    }
    for (double e : r.trace.lyapunov) emax = std::max(emax, e);
    r.barrier_excess = emax - E0;
    r.final_decay = r.decay.back();
    const double half = 0.5 * r.times.back();
    r.decay_decreasing_late = true;
    for (std::size_t c = 1; c < r.decay.size(); ++c) {
        if (r.times[c - 1] >= half && r.decay[c] > r.decay[c - 1]) r.decay_decreasing_late = false;
    }
    r.energy_gap_rel = std::fabs(functional(phi_field(last, p), p).total - lv.lambda1) / std::fabs(lv.lambda1);
    r.final_grad_distance = r.grad_distance.back();
    r.prediction_consistent =
        !(r.verdict.prediction == Prediction::Positive && r.omega.classification != Classification::Positive);
    return r;
}

inline nlohmann::json to_json(const SelectionVerdict& s) {
    return {{"energy_plus", s.energy_plus},   {"energy_minus", s.energy_minus}, {"energy", s.energy},
            {"threshold", s.threshold},       {"condition_A", s.condition_A},   {"condition_B", s.condition_B},
            {"hypothesis_ok", s.hypothesis_ok}, {"prediction", to_string(s.prediction)}};
}

inline nlohmann::json to_json(const OmegaLimitReport& o) {
    nlohmann::json j{{"classification", to_string(o.classification)},
                     {"lane_emden_residual", o.lane_emden_residual},
                     {"distance_plus", o.distance_plus},
                     {"distance_minus", o.distance_minus}};
    j["stabilization_time"] = o.stabilization_time ? nlohmann::json(*o.stabilization_time) : nlohmann::json(nullptr);
    return j;
}

/// Decay curve rows: s, t, ||t^alpha u - U||_inf, F(Phi(v)), ||grad(Phi(v) - w)||.
inline std::string decay_csv(const StudyReport& r) {
    std::ostringstream os;
    os << "s,t,decay,energy,grad_distance\n";
    for (std::size_t c = 0; c < r.times.size(); ++c) {
        os << detail::format_double(r.times[c]) << ',' << detail::format_double(r.original_times[c]) << ','
           << detail::format_double(r.decay[c]) << ',' << detail::format_double(r.energy[c]) << ','
           << detail::format_double(r.grad_distance[c]) << '\n';
    }
    return os.str();
}

}  // namespace pmelab
