// Command-line front end: one subcommand per study.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pmelab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Porous medium / Lane-Emden numerical laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    bool print_config = false;

    const char* studies[][2] = {
        {"ground-state", "positive ground state w and Lambda_1 (1D: shooting comparison)"},
        {"lambda2", "least-energy nodal critical point and the level report"},
        {"mountain-pass", "string-method estimate of the mountain-pass level"},
        {"simulate", "rescaled flow from a chosen datum, with entropy ledger"},
        {"selection-study", "seeded sign-changing data: predicted vs observed limits"},
        {"verify", "randomized invariant suite"},
    };
    for (const auto& s : studies) {
        CLI::App* sub = app.add_subcommand(s[0], s[1]);
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory (overrides config and PMELAB_OUTPUT_DIR)");
        sub->add_option("--seed", seed, "base seed (overrides config)");
        sub->add_option("--threads", threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pmelab::kExitConfig;
    }

    const CLI::App* sub = app.get_subcommands().front();
    pmelab::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = pmelab::load_config(config_path);
    } catch (const pmelab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return pmelab::kExitConfig;
    }
    cfg.study = sub->get_name();
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--threads")) cfg.threads = threads;
    if (print_config) {
        std::cout << pmelab::to_json(cfg).dump(2) << '\n';
        return 0;
    }

    const std::optional<std::string> out = sub->count("--out") ? std::optional<std::string>(out_dir) : std::nullopt;
    const pmelab::RunOutcome r = pmelab::run(cfg, out);
    std::cout << "study " << cfg.study << ": " << r.manifest["status"].get<std::string>() << " (exit " << r.exit_code
              << "), artifacts in " << r.out_dir.string() << '\n';
    if (r.manifest.contains("error")) std::cerr << r.manifest["error"]["message"].get<std::string>() << '\n';
    return r.exit_code;
}
