#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "koopctl/errors.hpp"
#include "koopctl/pipeline.hpp"

using namespace koopctl;

int main(int argc, char** argv) {
    CLI::App app{"Koopman identification, mismatch bounds and dual-loop robust control"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_out = false, have_seed = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment configuration JSON")->required();
        cmd->add_option("--out", out_dir, "output directory override")
            ->each([&](const std::string&) { have_out = true; });
        cmd->add_option("--seed", seed, "base data seed override")
            ->each([&](const std::string&) { have_seed = true; });
    };

    auto* generate = app.add_subcommand("generate", "write snapshot data sets per noise level");
    auto* identify = app.add_subcommand("identify", "fit lifted linear models");
    auto* synthesize = app.add_subcommand("synthesize", "design gains, bounds and the Q filter");
    auto* simulate = app.add_subcommand("simulate", "run closed-loop batches");
    auto* report = app.add_subcommand("report", "collate plot-data bundles");
    for (auto* cmd : {generate, identify, synthesize, simulate, report}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path);
        cfg = apply_overrides(cfg, have_out ? std::optional<std::string>(out_dir) : std::nullopt,
                              have_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (generate->parsed()) cmd_generate(cfg);
        if (identify->parsed()) cmd_identify(cfg);
        if (synthesize->parsed()) cmd_synthesize(cfg);
        if (simulate->parsed()) cmd_simulate(cfg);
        if (report->parsed()) cmd_report(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "koopctl: config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "koopctl: i/o error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "koopctl: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "koopctl: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
