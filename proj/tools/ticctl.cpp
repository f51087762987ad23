#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "tic/commands.hpp"
#include "tic/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Equilibrium strategies for time-inconsistent control problems with recursive costs"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", scenario;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool verbose = false;

    for (const auto& name : tic::command_names()) {
        auto* sub = app.add_subcommand(name);
        if (name == "list-scenarios") continue;
        sub->add_option("--config", config_path, "INI configuration file");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Monte Carlo seed (overrides the config)");
        sub->add_option("--workers", workers, "worker threads (overrides the config)");
        sub->add_option("--scenario", scenario, "scenario id when no config file is given");
        sub->add_flag("--verbose", verbose, "write convergence_log.csv");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    tic::RunConfig cfg;
    try {
        if (!config_path.empty()) {
            cfg = tic::load_config(config_path);
            if (!scenario.empty() && scenario != cfg.scenario)
                throw tic::ConfigError("--scenario conflicts with the config file");
        } else if (!scenario.empty()) {
            std::istringstream in("[scenario]\nid = " + scenario + "\n");
            cfg = tic::parse_config(in, "--scenario");
        }
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        if (verbose) cfg.verbose = true;
    } catch (const tic::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return tic::run_command(cmd, cfg, out_dir, cmd == "list-scenarios" ? std::cout : std::cerr);
}
