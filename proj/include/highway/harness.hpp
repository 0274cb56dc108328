#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "highway/agent.hpp"
#include "highway/baselines.hpp"
#include "highway/scenario.hpp"

// Experiment harness: training runs, scenario replay, density sweeps, and
// artifact management behind the CLI.

namespace highway::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

struct ExperimentConfig {
    std::uint64_t seed = 1;
    int episodes = 2000;
    agent::FilterChoice filter = agent::FilterChoice::cbf;
    std::string out_dir = "out";
    std::string checkpoint;      // load path (resume / eval / sweep)
    std::string scenario_path;   // scenario command
    int eval_every = 100;
    int eval_episodes = 5;       // episodes per evaluation point
    std::vector<int> densities = {5, 10, 15, 20, 25, 30};
    int sweep_episodes = 6;      // seeded episodes per sweep cell
    double sweep_duration = 120.0;  // s per sweep episode

    env::EnvConfig env;
    agent::AgentConfig agent;
    motion::MotionController::Config motion;
    rules::RuleFilterConfig rule;
    cbf::CbfConfig cbf;

    // Canonical text used for the config hash stamped into CSVs.
    std::string canonical() const;
    std::uint64_t hash() const;
};

// Loads a JSON config file over the defaults. Throws std::runtime_error on
// unreadable or malformed input.
ExperimentConfig load_config(const std::string& path);
agent::FilterChoice parse_filter(const std::string& name);

struct TrainOutcome {
    std::vector<agent::EpisodeStats> train_episodes;
    std::vector<std::pair<int, agent::EpisodeStats>> evals;
    int start_episode = 0;
    std::string checkpoint_path;
};

TrainOutcome run_training(const ExperimentConfig& cfg);

struct SweepRow {
    int density = 0;
    std::string policy;
    double mean_speed = 0.0;
};
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::vector<std::string>& policies);

// CLI entry points; return process exit codes.
int cmd_train(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg);
int cmd_scenario(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg);

}  // namespace highway::harness
