#pragma once

// Experiment orchestration: a JSON-serializable configuration and the six
// studies behind the command line. Exit codes: 0 ok, 2 invalid config,
// 3 numerical failure, 4 invariant defect.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmelab/asymptotics.hpp"
#include "pmelab/energy.hpp"
#include "pmelab/errors.hpp"
#include "pmelab/field_io.hpp"
#include "pmelab/grid.hpp"
#include "pmelab/groundstate.hpp"
#include "pmelab/mountainpass.hpp"
#include "pmelab/pme.hpp"
#include "pmelab/properties.hpp"

namespace pmelab {

using nlohmann::json;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitDefect = 4 };

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "PMELAB_OUTPUT_DIR";

struct DomainSpec {
    std::string kind = "interval";  // interval | rectangle | disk
    double lx = 1.0, ly = 1.0;      // interval length / rectangle sides; disk radius in lx
    int nx = 128, ny = 0;

    DomainHandle build() const {
        if (kind == "interval") return Domain::interval(lx, nx);
        if (kind == "rectangle") return Domain::rectangle(lx, ly, nx, ny);
        if (kind == "disk") return Domain::disk(lx, nx);
        throw ConfigError("domain.kind must be interval, rectangle or disk, got '" + kind + "'");
    }
};

struct SimulateSpec {
    std::string datum = "stationary";  // stationary | generated | generated-b | half-ground
    double t_original = 0.0;           // > 0: integrate to this original time instead of solver.t_end
    double decay_tol = 5e-3;           // relative sup error allowed against (1+t)^{-alpha} u0
};

struct SelectionSpec {
    int count = 10;
    std::string kinds = "mixed";  // A | B | mixed
};

struct VerifySpec {
    long scalar_trials = 100000;
    long field_pairs = 1000;
    long sbp_pairs = 200;
};

struct ExperimentConfig {
    std::string study = "ground-state";
    DomainSpec domain;
    double m = 2.0;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output_dir = "pmelab-out";
    SolverControls solver;
    DescentControls descent;
    NodalControls nodal;
    StringControls string;
    OmegaControls omega;
    double margin_frac = 0.05;
    double energy_tol_rel = 1e-4;
    double grad_tol = 1e-2;
    double lp1_constant = 1e-8;
    SimulateSpec simulate;
    SelectionSpec selection;
    VerifySpec verify;

    void validate() const {
        static const std::set<std::string> studies{"ground-state", "lambda2",         "mountain-pass",
                                                   "simulate",     "selection-study", "verify"};
        if (!studies.count(study)) throw ConfigError("unknown study '" + study + "'");
        if (!(m > 1.0)) throw ConfigError("m must be > 1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        if (selection.count < 1) throw ConfigError("selection.count must be >= 1");
        if (selection.kinds != "A" && selection.kinds != "B" && selection.kinds != "mixed")
            throw ConfigError("selection.kinds must be A, B or mixed");
        static const std::set<std::string> data{"stationary", "generated", "generated-b", "half-ground"};
        if (!data.count(simulate.datum)) throw ConfigError("simulate.datum '" + simulate.datum + "' is not known");
        if (!(margin_frac > 0.0 && margin_frac < 1.0)) throw ConfigError("margin_frac must lie in (0, 1)");
        try {
            solver.validate(MediumParams(m));
            (void)domain.build();
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }
};

// JSON mapping. Every field is written; reading accepts missing keys (the
// defaults apply) and rejects unknown ones.

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
    return {
        {"study", c.study},
        {"domain", {{"kind", c.domain.kind}, {"lx", c.domain.lx}, {"ly", c.domain.ly}, {"nx", c.domain.nx}, {"ny", c.domain.ny}}},
        {"m", c.m},
        {"seed", c.seed},
        {"threads", c.threads},
        {"output_dir", c.output_dir},
        {"solver",
         {{"tau", c.solver.tau},
          {"delta", c.solver.delta.delta},
          {"newton_tol", c.solver.newton_tol},
          {"newton_max_iters", c.solver.newton_max_iters},
          {"max_halvings", c.solver.max_halvings},
          {"checkpoint_interval", c.solver.checkpoint_interval},
          {"t_end", c.solver.t_end}}},
        {"descent",
         {{"tol", c.descent.tol},
          {"max_iters", c.descent.max_iters},
          {"eps_start", c.descent.eps_start},
          {"eps_stages", c.descent.eps_stages},
          {"newton_max_iters", c.descent.newton_max_iters},
          {"seed", c.descent.seed}}},
        {"nodal",
         {{"tol", c.nodal.tol},
          {"newton_max_iters", c.nodal.newton_max_iters},
          {"random_seeds", c.nodal.random_seeds},
          {"seed", c.nodal.seed},
          {"gap_floor_rel", c.nodal.gap_floor_rel}}},
        {"string",
         {{"nodes", c.string.nodes},
          {"max_iters", c.string.max_iters},
          {"step", c.string.step},
          {"eps_start", c.string.eps_start},
          {"eps_end", c.string.eps_end},
          {"eps_stages", c.string.eps_stages},
          {"rtol", c.string.rtol},
          {"converge_tol", c.string.converge_tol},
          {"tol", c.string.tol}}},
        {"omega", {{"window", c.omega.window}, {"stab_tol", c.omega.stab_tol}, {"class_tol", c.omega.class_tol}}},
        {"tolerances",
         {{"margin_frac", c.margin_frac},
          {"energy_tol_rel", c.energy_tol_rel},
          {"grad_tol", c.grad_tol},
          {"lp1_constant", c.lp1_constant}}},
        {"simulate", {{"datum", c.simulate.datum}, {"t_original", c.simulate.t_original}, {"decay_tol", c.simulate.decay_tol}}},
        {"selection", {{"count", c.selection.count}, {"kinds", c.selection.kinds}}},
        {"verify",
         {{"scalar_trials", c.verify.scalar_trials},
          {"field_pairs", c.verify.field_pairs},
          {"sbp_pairs", c.verify.sbp_pairs}}},
    };
}

inline ExperimentConfig config_from_json(const json& j) {
    using detail::read;
    using detail::reject_unknown;
    ExperimentConfig c;
    reject_unknown(j,
                   {"study", "domain", "m", "seed", "threads", "output_dir", "solver", "descent", "nodal", "string",
                    "omega", "tolerances", "simulate", "selection", "verify"},
                   "config");
    read(j, "study", c.study);
    read(j, "m", c.m);
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    read(j, "output_dir", c.output_dir);
    if (j.contains("domain")) {
        const json& d = j["domain"];
        reject_unknown(d, {"kind", "lx", "ly", "nx", "ny"}, "domain");
        read(d, "kind", c.domain.kind);
        read(d, "lx", c.domain.lx);
        read(d, "ly", c.domain.ly);
        read(d, "nx", c.domain.nx);
        read(d, "ny", c.domain.ny);
    }
    if (j.contains("solver")) {
        const json& s = j["solver"];
        reject_unknown(s, {"tau", "delta", "newton_tol", "newton_max_iters", "max_halvings", "checkpoint_interval", "t_end"},
                       "solver");
        read(s, "tau", c.solver.tau);
        double delta = c.solver.delta.delta;
        read(s, "delta", delta);
        if (!(delta >= 0.0)) throw ConfigError("solver.delta must be >= 0");
        c.solver.delta = RegularizationParam(delta);
        read(s, "newton_tol", c.solver.newton_tol);
        read(s, "newton_max_iters", c.solver.newton_max_iters);
        read(s, "max_halvings", c.solver.max_halvings);
        read(s, "checkpoint_interval", c.solver.checkpoint_interval);
        read(s, "t_end", c.solver.t_end);
    }
    if (j.contains("descent")) {
        const json& s = j["descent"];
        reject_unknown(s, {"tol", "max_iters", "eps_start", "eps_stages", "newton_max_iters", "seed"}, "descent");
        read(s, "tol", c.descent.tol);
        read(s, "max_iters", c.descent.max_iters);
        read(s, "eps_start", c.descent.eps_start);
        read(s, "eps_stages", c.descent.eps_stages);
        read(s, "newton_max_iters", c.descent.newton_max_iters);
        read(s, "seed", c.descent.seed);
    }
    if (j.contains("nodal")) {
        const json& s = j["nodal"];
        reject_unknown(s, {"tol", "newton_max_iters", "random_seeds", "seed", "gap_floor_rel"}, "nodal");
        read(s, "tol", c.nodal.tol);
        read(s, "newton_max_iters", c.nodal.newton_max_iters);
        read(s, "random_seeds", c.nodal.random_seeds);
        read(s, "seed", c.nodal.seed);
        read(s, "gap_floor_rel", c.nodal.gap_floor_rel);
    }
    if (j.contains("string")) {
        const json& s = j["string"];
        reject_unknown(s, {"nodes", "max_iters", "step", "eps_start", "eps_end", "eps_stages", "rtol", "converge_tol", "tol"},
                       "string");
        read(s, "nodes", c.string.nodes);
        read(s, "max_iters", c.string.max_iters);
        read(s, "step", c.string.step);
        read(s, "eps_start", c.string.eps_start);
        read(s, "eps_end", c.string.eps_end);
        read(s, "eps_stages", c.string.eps_stages);
        read(s, "rtol", c.string.rtol);
        read(s, "converge_tol", c.string.converge_tol);
        read(s, "tol", c.string.tol);
    }
    if (j.contains("omega")) {
        const json& s = j["omega"];
        reject_unknown(s, {"window", "stab_tol", "class_tol"}, "omega");
        read(s, "window", c.omega.window);
        read(s, "stab_tol", c.omega.stab_tol);
        read(s, "class_tol", c.omega.class_tol);
    }
    if (j.contains("tolerances")) {
        const json& s = j["tolerances"];
        reject_unknown(s, {"margin_frac", "energy_tol_rel", "grad_tol", "lp1_constant"}, "tolerances");
        read(s, "margin_frac", c.margin_frac);
        read(s, "energy_tol_rel", c.energy_tol_rel);
        read(s, "grad_tol", c.grad_tol);
        read(s, "lp1_constant", c.lp1_constant);
    }
    if (j.contains("simulate")) {
        const json& s = j["simulate"];
        reject_unknown(s, {"datum", "t_original", "decay_tol"}, "simulate");
        read(s, "datum", c.simulate.datum);
        read(s, "t_original", c.simulate.t_original);
        read(s, "decay_tol", c.simulate.decay_tol);
    }
    if (j.contains("selection")) {
        const json& s = j["selection"];
        reject_unknown(s, {"count", "kinds"}, "selection");
        read(s, "count", c.selection.count);
        read(s, "kinds", c.selection.kinds);
    }
    if (j.contains("verify")) {
        const json& s = j["verify"];
        reject_unknown(s, {"scalar_trials", "field_pairs", "sbp_pairs"}, "verify");
        read(s, "scalar_trials", c.verify.scalar_trials);
        read(s, "field_pairs", c.verify.field_pairs);
        read(s, "sbp_pairs", c.verify.sbp_pairs);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Plot data.

/// s, t, V, dissipation_cum; header only for an empty trace.
inline std::string energy_time_csv(const SimulationTrace& tr) {
    std::ostringstream os;
    os << "s,t,V,dissipation_cum\n";
    for (std::size_t n = 0; n < tr.times.size(); ++n)
        os << detail::format_double(tr.times[n]) << ',' << detail::format_double(std::expm1(tr.times[n])) << ','
           << detail::format_double(tr.lyapunov[n]) << ',' << detail::format_double(tr.dissipation_cum[n]) << '\n';
    return os.str();
}

/// s, sup |v - U|, sup |v + U| at checkpoints; header only for an empty trace.
inline std::string sup_distance_csv(const SimulationTrace& tr, const Field& U) {
    std::ostringstream os;
    os << "s,sup_dist_plus,sup_dist_minus\n";
    for (std::size_t c = 0; c < tr.checkpoints.size(); ++c)
        os << detail::format_double(tr.checkpoint_times[c]) << ','
           << detail::format_double(sup_distance(tr.checkpoints[c], U)) << ','
           << detail::format_double(sup_distance(tr.checkpoints[c], -U)) << '\n';
    return os.str();
}

inline std::string path_profile_csv(const std::vector<double>& profile) {
    std::ostringstream os;
    os << "node,energy\n";
    for (std::size_t k = 0; k < profile.size(); ++k) os << k << ',' << detail::format_double(profile[k]) << '\n';
    return os.str();
}

inline std::string series_csv(const std::vector<double>& series) {
    std::ostringstream os;
    os << "iteration,max_energy\n";
    for (std::size_t k = 0; k < series.size(); ++k) os << k << ',' << detail::format_double(series[k]) << '\n';
    return os.str();
}

/// Energy levels with how each was obtained.
inline json level_diagram(const LevelReport& lv, std::optional<double> lambda_star) {
    json levels = json::array();
    levels.push_back({{"name", "Lambda1"}, {"value", lv.lambda1}, {"provenance", "positive ground state (descent + Newton)"}});
    levels.push_back({{"name", "Lambda2_est"},
                      {"value", lv.lambda2_est},
                      {"provenance", "least-energy nodal critical point found (seed " + lv.nodal_seed + ")"}});
    if (lambda_star)
        levels.push_back({{"name", "Lambda_star_est"}, {"value", *lambda_star}, {"provenance", "string method max node"}});
    levels.push_back({{"name", "zero"}, {"value", 0.0}, {"provenance", "F(0)"}});
    return {{"levels", levels}};
}

/// One checked quantity with its tolerance context.
inline json checked(double value, double tol, bool pass) { return {{"value", value}, {"tol", tol}, {"pass", pass}}; }

// ---------------------------------------------------------------------------
// Running.

struct RunOutcome {
    int exit_code = kExitOk;
    json manifest;
    std::filesystem::path out_dir;
};

namespace detail {

class Artifacts {
public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_ / "fields");
    }
    void text(const std::string& name, const std::string& content) {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << content;
        if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
        files_.push_back(name);
    }
    void field(const std::string& stem, const Field& f) {
        save_field((dir_ / "fields" / (stem + ".bin")).string(), f);
        files_.push_back("fields/" + stem + ".bin");
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

/// Runs body(i) for i in [0, n) on `threads` workers. Results must be written
/// by index, so the outcome does not depend on scheduling.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, n); ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline int study_ground_state(const ExperimentConfig& c, const DomainHandle& d, const MediumParams& p, Artifacts& a,
                              json& res) {
    const GroundState g = solve_ground_state(d, p, c.descent);
    a.field("w", g.w);
    res["lambda1"] = g.lambda1;
    res["residual"] = checked(g.residual, c.descent.tol, g.residual <= c.descent.tol);
    res["descent_iterations"] = g.descent_iterations;
    res["newton_iterations"] = g.newton_iterations;
    bool ok = g.residual <= c.descent.tol && g.w.min() >= 0.0;
    if (d->dimension() == 1) {
        const ShootingResult s = shooting_oracle_1d(d, p);
        const double erel = std::fabs(g.lambda1 - s.lambda1) / std::fabs(s.lambda1);
        const double sup = sup_distance(g.w, s.profile) / s.profile.sup_norm();
        res["shooting_lambda1"] = s.lambda1;
        res["energy_rel_error"] = checked(erel, 5e-3, erel <= 5e-3);
        res["profile_sup_rel_error"] = checked(sup, 1e-3, sup <= 1e-3);
        a.text("profile.csv", field_csv_1d(g.w));
        ok = ok && erel <= 5e-3 && sup <= 1e-3;
    }
    return ok ? kExitOk : kExitDefect;
}

inline int study_lambda2(const ExperimentConfig& c, const DomainHandle& d, const MediumParams& p, Artifacts& a,
                         json& res, std::optional<double> lambda_star = std::nullopt) {
    const LevelReport lv = compute_levels(d, p, c.descent, c.nodal);
    a.field("w", lv.w);
    a.field("nodal", lv.nodal);
    json levels = to_json(lv);
    levels["diagram"] = level_diagram(lv, lambda_star);
    a.text("levels.json", levels.dump(2) + "\n");
    res["levels"] = levels;
    return verify_gap(lv) ? kExitOk : kExitDefect;
}

inline int study_mountain_pass(const ExperimentConfig& c, const DomainHandle& d, const MediumParams& p, Artifacts& a,
                               json& res) {
    const LevelReport lv = compute_levels(d, p, c.descent, c.nodal);
    const StringResult s = string_method_lambda_star(lv.w, p, c.string);
    a.field("w", lv.w);
    a.field("nodal", lv.nodal);
    a.field("saddle", s.path[s.saddle_index]);
    a.text("path_profile.csv", path_profile_csv(path_energy_profile(s.path, p)));
    a.text("max_energy_series.csv", series_csv(s.max_energy_series));
    json levels = to_json(lv);
    levels["diagram"] = level_diagram(lv, s.saddle_energy);
    a.text("levels.json", levels.dump(2) + "\n");
    res["levels"] = levels;
    bool monotone = true;
    for (std::size_t k = 1; k < s.max_energy_series.size(); ++k) {
        const double prev = s.max_energy_series[k - 1];
        if (s.max_energy_series[k] > prev + c.string.rtol * (1.0 + std::fabs(prev))) monotone = false;
    }
    const double tol = 1e-6 * std::fabs(lv.lambda1);
    const bool lower = s.saddle_energy >= lv.lambda2_est - tol;
    const bool above = s.saddle_energy > lv.lambda1 + lv.gap_floor;
    res["lambda_star_est"] = s.saddle_energy;
    res["saddle_residual"] = s.saddle_residual;
    res["string_iterations"] = s.iterations;
    res["string_converged"] = s.converged;
    res["string_polished"] = s.polished;
    res["series_non_increasing"] = checked(0.0, c.string.rtol, monotone);
    res["lambda_star_ge_lambda2_est"] = checked(lv.lambda2_est - s.saddle_energy, tol, lower);
    res["lambda_star_gt_lambda1"] = checked(s.saddle_energy - lv.lambda1, lv.gap_floor, above);
    res["lambda_star_negative"] = checked(s.saddle_energy, 0.0, s.saddle_energy < 0.0);
    return monotone && lower && above && s.saddle_energy < 0.0 ? kExitOk : kExitDefect;
}

inline Field simulate_datum(const ExperimentConfig& c, const LevelReport& lv, const MediumParams& p) {
    if (c.simulate.datum == "stationary") return phi_inverse_field(lv.w, p);
    if (c.simulate.datum == "half-ground") return phi_inverse_field(0.5 * lv.w, p);
    GeneratorOptions o;
    o.kind = c.simulate.datum == "generated-b" ? DatumKind::ConditionB : DatumKind::ConditionA;
    o.margin_frac = c.margin_frac;
    o.ground = c.descent;
    return generate_admissible_datum(lv, p, c.seed, o).u0;
}

inline int study_simulate(const ExperimentConfig& c, const DomainHandle& d, const MediumParams& p, Artifacts& a,
                          json& res) {
    const LevelReport lv = compute_levels(d, p, c.descent, c.nodal);
    const Field u0 = simulate_datum(c, lv, p);
    SolverControls sc = c.solver;
    if (c.simulate.t_original > 0.0) sc.t_end = std::log1p(c.simulate.t_original);
    const SimulationTrace tr = simulate_rescaled(u0, p, sc);
    const Field U = phi_inverse_field(lv.w, p);
    a.field("u0", u0);
    a.field("v_final", tr.checkpoints.back());
    a.text("trace.csv", trace_csv(tr, &U));
    a.text("energy_time.csv", energy_time_csv(tr));
    a.text("sup_distance_time.csv", sup_distance_csv(tr, U));
    const EntropyReport er = entropy_report(tr, c.lp1_constant);
    res["entropy"] = {{"worst_step_increase", checked(er.worst_step_increase, 10.0 * sc.newton_tol, er.steps_ok)},
                      {"lp1_defect", checked(er.lp1_defect, er.lp1_defect - er.lp1_excess, er.lp1_ok)},
                      {"lp1_constant", er.lp1_constant},
                      {"dissipation_monotone", er.dissipation_monotone},
                      {"worst_step_increase_regularized", er.worst_step_increase_reg},
                      {"lp1_defect_regularized", er.lp1_defect_reg}};
    bool ok = er.steps_ok && er.lp1_ok && er.dissipation_monotone;
    if (c.simulate.datum == "stationary") {
        // u(t) = (1+t)^{-alpha} u0 exactly; u = e^{-alpha s} v.
        std::ostringstream os;
        os << "t,measured_ratio,exact_ratio,rel_error,tol,pass\n";
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.checkpoints.size(); ++k) {
            const double s = tr.checkpoint_times[k], t = std::expm1(s);
            const Field u = to_original(tr.checkpoints[k], s, p);
            const double exact = std::pow(1.0 + t, -p.alpha());
            const double err = sup_distance(u, exact * u0) / (exact * u0.sup_norm());
            worst = std::max(worst, err);
            os << detail::format_double(t) << ',' << detail::format_double(u.sup_norm() / u0.sup_norm()) << ','
               << detail::format_double(exact) << ',' << detail::format_double(err) << ','
               << detail::format_double(c.simulate.decay_tol) << ',' << (err <= c.simulate.decay_tol ? 1 : 0) << '\n';
        }
        a.text("decay.csv", os.str());
        res["stationary_decay_rel_error"] = checked(worst, c.simulate.decay_tol, worst <= c.simulate.decay_tol);
        ok = ok && worst <= c.simulate.decay_tol;
    }
    return ok ? kExitOk : kExitDefect;
}

struct SelectionRow {
    std::uint64_t seed = 0;
    std::string kind;
    SelectionVerdict verdict;
    Classification observed = Classification::NotStabilized;
    std::optional<double> stabilization_time;
    double final_decay = 0.0;
    bool decreasing_late = false;
    double energy_gap_rel = 0.0;
    double grad_distance = 0.0;
    double barrier_excess = 0.0;
    bool consistent = false;
    std::string decay;
};

inline std::string selection_csv(const std::vector<SelectionRow>& rows) {
    std::ostringstream os;
    os << "seed,kind,energy,energy_plus,energy_minus,condition_A,condition_B,prediction,observed,"
          "stabilization_time,final_decay,decreasing_late,energy_gap_rel,grad_distance,barrier_excess,consistent\n";
    for (const auto& r : rows) {
        os << r.seed << ',' << r.kind << ',' << format_double(r.verdict.energy) << ','
           << format_double(r.verdict.energy_plus) << ',' << format_double(r.verdict.energy_minus) << ','
           << r.verdict.condition_A << ',' << r.verdict.condition_B << ',' << to_string(r.verdict.prediction) << ','
           << to_string(r.observed) << ','
           << (r.stabilization_time ? format_double(*r.stabilization_time) : std::string("nan")) << ','
           << format_double(r.final_decay) << ',' << r.decreasing_late << ',' << format_double(r.energy_gap_rel) << ','
           << format_double(r.grad_distance) << ',' << format_double(r.barrier_excess) << ',' << r.consistent << '\n';
    }
    return os.str();
}

inline int study_selection(const ExperimentConfig& c, const DomainHandle& d, const MediumParams& p, Artifacts& a,
                           json& res) {
    const LevelReport lv = compute_levels(d, p, c.descent, c.nodal);
    std::vector<SelectionRow> rows(static_cast<std::size_t>(c.selection.count));
    StudyControls sc;
    sc.solver = c.solver;
    sc.omega = c.omega;
    sc.margin_frac = c.margin_frac;
    sc.energy_tol_rel = c.energy_tol_rel;
    sc.grad_tol = c.grad_tol;
    parallel_for(c.selection.count, c.threads, [&](int i) {
        SelectionRow& row = rows[static_cast<std::size_t>(i)];
        row.seed = c.seed + static_cast<std::uint64_t>(i);
        const bool b = c.selection.kinds == "B" || (c.selection.kinds == "mixed" && i % 2 == 1);
        row.kind = b ? "B" : "A";
        GeneratorOptions o;
        o.kind = b ? DatumKind::ConditionB : DatumKind::ConditionA;
        o.margin_frac = c.margin_frac;
        o.ground = c.descent;
        const GeneratedDatum g = generate_admissible_datum(lv, p, row.seed, o);
        const StudyReport r = convergence_study(g.u0, lv, p, sc);
        row.verdict = r.verdict;
        row.observed = r.omega.classification;
        row.stabilization_time = r.omega.stabilization_time;
        row.final_decay = r.final_decay;
        row.decreasing_late = r.decay_decreasing_late;
        row.energy_gap_rel = r.energy_gap_rel;
        row.grad_distance = r.final_grad_distance;
        row.barrier_excess = r.barrier_excess;
        row.consistent = r.prediction_consistent;
        row.decay = decay_csv(r);
    });
    a.text("selection.csv", selection_csv(rows));
    int matched = 0, predicted = 0, other = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        a.text("decay_" + std::to_string(rows[i].seed) + ".csv", rows[i].decay);
        if (rows[i].verdict.prediction == Prediction::Positive) {
            ++predicted;
            if (rows[i].observed == Classification::Positive) ++matched;
        }
        if (rows[i].observed == Classification::Other) ++other;
    }
    json levels = to_json(lv);
    levels["diagram"] = level_diagram(lv, std::nullopt);
    a.text("levels.json", levels.dump(2) + "\n");
    res["levels"] = levels;
    res["predicted_positive"] = predicted;
    res["matched"] = checked(matched, predicted, matched == predicted);
    res["classified_other"] = other;
    return matched == predicted && other == 0 ? kExitOk : kExitDefect;
}

inline int study_verify(const ExperimentConfig& c, Artifacts& a, json& res) {
    std::vector<PropertyOutcome> all = scalar_inequality_suite(c.verify.scalar_trials, c.seed);
    all.push_back(summation_by_parts_suite(c.verify.sbp_pairs, c.seed + 1));
    for (auto& o : path_bound_suite(c.verify.field_pairs, c.seed + 2)) all.push_back(o);
    all.push_back(lyapunov_canned_run());
    std::ostringstream os;
    os << "invariant,trials,failures,worst,tol,pass\n";
    json list = json::array();
    bool ok = true;
    for (const auto& o : all) {
        os << o.name << ',' << o.trials << ',' << o.failures << ',' << format_double(o.worst) << ','
           << format_double(o.tol) << ',' << (o.pass() ? 1 : 0) << '\n';
        list.push_back(to_json(o));
        ok = ok && o.pass();
    }
    a.text("verify.csv", os.str());
    res["invariants"] = list;
    return ok ? kExitOk : kExitDefect;
}

}  // namespace detail

/// Output directory: the explicit override, else the environment variable,
/// else the configured one.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c, const std::optional<std::string>& cli_out) {
    if (cli_out) return *cli_out;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return c.output_dir;
}

/// Executes the configured study. Never throws for study failures: they are
/// mapped to exit codes and recorded in manifest.json.
inline RunOutcome run(ExperimentConfig config, const std::optional<std::string>& cli_out = std::nullopt) {
    RunOutcome out;
    out.out_dir = resolve_output_dir(config, cli_out);
    config.output_dir = out.out_dir.string();
    json& man = out.manifest;
    man["config"] = to_json(config);
    json res = json::object();
    std::optional<detail::Artifacts> arts;
    try {
        config.validate();
        arts.emplace(out.out_dir);
        const MediumParams p(config.m);
        const std::string& s = config.study;
        if (s == "verify") {
            out.exit_code = detail::study_verify(config, *arts, res);
        } else {
            const DomainHandle d = config.domain.build();
            if (s == "ground-state") out.exit_code = detail::study_ground_state(config, d, p, *arts, res);
            else if (s == "lambda2") out.exit_code = detail::study_lambda2(config, d, p, *arts, res);
            else if (s == "mountain-pass") out.exit_code = detail::study_mountain_pass(config, d, p, *arts, res);
            else if (s == "simulate") out.exit_code = detail::study_simulate(config, d, p, *arts, res);
            else out.exit_code = detail::study_selection(config, d, p, *arts, res);
        }
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfig;
        man["error"] = {{"kind", "config"}, {"message", e.what()}};
    } catch (const ContractViolation& e) {
        out.exit_code = kExitConfig;
        man["error"] = {{"kind", "contract"}, {"message", e.what()}};
    } catch (const NumericalFailure& e) {
        out.exit_code = kExitNumerical;
        man["error"] = {{"kind", "numerical"}, {"message", e.what()}};
    } catch (const GenerationFailure& e) {
        out.exit_code = kExitNumerical;
        man["error"] = {{"kind", "generation"}, {"message", e.what()}};
    }
    man["results"] = res;
    man["exit_code"] = out.exit_code;
    man["status"] = out.exit_code == kExitOk ? "ok"
                    : out.exit_code == kExitConfig ? "config-invalid"
                    : out.exit_code == kExitNumerical ? "numerical-failure"
                                                      : "invariant-defect";
    if (arts) man["artifacts"] = arts->files();
    // A manifest is written even when validation failed, if the directory can be made.
    std::error_code ec;
    std::filesystem::create_directories(out.out_dir, ec);
    if (!ec) {
        std::ofstream os(out.out_dir / "manifest.json", std::ios::binary);
        os << man.dump(2) << '\n';
    }
    return out;
}

}  // namespace pmelab
