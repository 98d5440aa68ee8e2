#include <iostream>

#include <CLI11.hpp>

#include "experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Davies generator spectra, thermalisation and Mpemba transforms"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t chains = 1;
    bool dense_fallback = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "output directory (overrides QMPEMBA_OUT_DIR and the config)");
        cmd->add_option("--seed", seed, "seed for random states and the optimizer");
        cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        cmd->add_flag("--dense-fallback", dense_fallback, "use the dense generator for degenerate spectra");
    };
    for (const char* name : {"spectrum", "evolve", "mpemba", "metropolis"}) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common(cmd);
        if (std::string(name) != "spectrum")
            cmd->add_option("--chains", chains, "independent optimizer chains; the best one is kept")
                ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qmpemba::cli::kExitConfig;
    }

    qmpemba::cli::RunOptions opts;
    if (!out.empty()) opts.out_dir = out;
    if (app.get_subcommands().front()->count("--seed")) opts.seed = seed;
    opts.threads = threads;
    opts.chains = chains;
    opts.dense_fallback = dense_fallback;
    return qmpemba::cli::run(app.get_subcommands().front()->get_name(), config, opts, std::cout, std::cerr);
}
