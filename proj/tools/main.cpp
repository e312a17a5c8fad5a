#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "freeflow/cli/config.hpp"
#include "freeflow/cli/runner.hpp"
#include "freeflow/errors.hpp"
#include "freeflow/version.hpp"

int main(int argc, char** argv) {
    using namespace freeflow::cli;

    CLI::App app{"Free-probability diffusion experiments"};
    app.set_version_flag("--version", std::string(freeflow::version()));
    std::string subcommand;
    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("subcommand", subcommand,
                   "forward | reverse | heat | mc | jko | ineq | debruijn | universality (must match the config)");
    app.add_option("--config", config_path, "experiment config file (key = value)")->required();
    app.add_option("--output-dir", output_dir, "overrides output_dir from the config");
    app.add_option("--seed", seed, "overrides seed from the config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        auto cfg = load_config(config_path);
        if (!subcommand.empty()) {
            const auto sub = parse_subcommand(subcommand);
            if (!sub) throw freeflow::ConfigError("unknown subcommand '" + subcommand + "'");
            if (*sub != cfg.subcommand) {
                throw freeflow::ConfigError("subcommand '" + subcommand + "' does not match config subcommand '" +
                                            to_string(cfg.subcommand) + "'");
            }
        }
        if (output_dir) {
            cfg.output_dir = *output_dir;
            cfg.echo["output_dir"] = *output_dir;
        }
        if (seed) {
            cfg.seed = *seed;
            cfg.echo["seed"] = std::to_string(*seed);
        }
        const auto manifest = run(cfg);
        std::cout << "wrote " << manifest.outputs.size() + 1 << " files to " << cfg.output_dir.string() << " in "
                  << manifest.wall_clock_seconds << " s\n";
        return kExitOk;
    } catch (const freeflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
