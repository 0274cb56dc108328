// Command-line front end: training runs, scenario replay, and density
// sweeps over the highway driving stack.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "highway/harness.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string filter;
    std::string out;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 0;
    bool episodes_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file");
    cmd->add_option("--filter", f.filter, "Safety filter: none|rule|cbf");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint path");
    cmd->add_option("--seed", f.seed, "Random seed")->each([&](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--episodes", f.episodes, "Episode count")
        ->each([&](const std::string&) { f.episodes_set = true; });
}

int build_config(const CommonFlags& f, highway::harness::ExperimentConfig& cfg) {
    try {
        if (!f.config.empty()) {
            cfg = highway::harness::load_config(f.config);
        }
        if (!f.filter.empty()) cfg.filter = highway::harness::parse_filter(f.filter);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return highway::harness::kExitConfigError;
    }
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
    if (f.seed_set) cfg.seed = f.seed;
    if (f.episodes_set) cfg.episodes = f.episodes;
    return highway::harness::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Highway driving policy stack"};
    app.require_subcommand(1);

    CommonFlags tf, ef, sf, wf;
    CLI::App* train = app.add_subcommand("train", "Train the DDQN agent");
    add_common(train, tf);
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(eval, ef);
    ef.episodes = 10;

    std::string scenario_path;
    CLI::App* scen = app.add_subcommand("scenario", "Replay a scripted scenario");
    add_common(scen, sf);
    scen->add_option("script", scenario_path, "Scenario script path")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "Density sweep over policies");
    add_common(sweep, wf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : highway::harness::kExitConfigError;
    }

    highway::harness::ExperimentConfig cfg;
    if (train->parsed()) {
        if (int rc = build_config(tf, cfg)) return rc;
        return highway::harness::cmd_train(cfg);
    }
    if (eval->parsed()) {
        if (int rc = build_config(ef, cfg)) return rc;
        if (ef.episodes_set) cfg.eval_episodes = ef.episodes;
        return highway::harness::cmd_eval(cfg);
    }
    if (scen->parsed()) {
        if (int rc = build_config(sf, cfg)) return rc;
        cfg.scenario_path = scenario_path;
        return highway::harness::cmd_scenario(cfg);
    }
    if (sweep->parsed()) {
        if (int rc = build_config(wf, cfg)) return rc;
        return highway::harness::cmd_sweep(cfg);
    }
    return highway::harness::kExitConfigError;
}
