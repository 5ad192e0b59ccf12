// Batch CLI over the arena C API.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "arena/arena.h"

namespace {

int report(int status) {
    if (status != ARENA_OK) {
        std::fprintf(stderr, "error (%d): %s\n", status, arena_last_error());
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arena: incentivized multi-agent policy-gradient experiments"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "train a roster and emit CSV/plot outputs");
    std::string config_path, preset, out_dir;
    int seeds = 1, parallel = 1, episodes = -1;
    run->add_option("--config", config_path, "flat key = value config file");
    run->add_option("--preset", preset, "named preset to start from");
    run->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
    run->add_option("--parallel", parallel, "max concurrent runs")->check(CLI::PositiveNumber);
    run->add_option("--episodes", episodes, "override training episode count");
    run->add_option("--out", out_dir, "output directory");

    // check-gradients
    auto* check = app.add_subcommand("check-gradients", "finite-difference gradient suites");
    int trials = 50;
    check->add_option("--trials", trials, "random draws per suite")->check(CLI::PositiveNumber);

    // probe
    auto* probe = app.add_subcommand("probe", "emit probe.csv from stored run records");
    std::string in_dir;
    probe->add_option("--in", in_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (config_path.empty() && preset.empty()) {
            std::fprintf(stderr, "error: run needs --config and/or --preset\n");
            return ARENA_ERR_CONFIG;
        }
        arena_config* cfg = nullptr;
        int status = ARENA_OK;
        if (!preset.empty()) status = arena_config_preset(preset.c_str(), &cfg);
        if (status == ARENA_OK && !config_path.empty()) {
            status = arena_config_load(config_path.c_str(), &cfg);
        }
        if (status == ARENA_OK && episodes >= 0) {
            status = arena_config_set(cfg, "episodes", std::to_string(episodes).c_str());
        }
        if (status == ARENA_OK) {
            status = arena_run(cfg, out_dir.empty() ? nullptr : out_dir.c_str(), seeds, parallel);
        }
        arena_config_free(cfg);
        return report(status);
    }

    if (check->parsed()) {
        const int status = arena_check_gradients(trials);
        // Suite details land in the error slot even on success.
        std::fprintf(status == ARENA_OK ? stdout : stderr, "%s", arena_last_error());
        if (status == ARENA_OK) std::fprintf(stdout, "gradient checks passed\n");
        return status;
    }

    if (probe->parsed()) {
        const std::string out_path = in_dir + "/probe.csv";
        const int status = arena_probe(in_dir.c_str(), out_path.c_str());
        if (status == ARENA_OK) std::fprintf(stdout, "wrote %s\n", out_path.c_str());
        return report(status);
    }
    return 0;
}
