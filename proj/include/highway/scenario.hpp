#pragma once

#include <string>
#include <vector>

#include "highway/action.hpp"
#include "highway/agent.hpp"
#include "highway/highway_env.hpp"

// Scripted scenario replay: explicit placements, timed target events, and a
// scheduled nominal policy for the ego.

namespace highway::scenario {

struct ScenarioScript {
    std::string name = "scenario";
    double duration = 10.0;
    double lane_width = 3.8;
    int num_lanes = 3;
    int ego_lane = 1;
    double ego_speed = 30.0;

    std::vector<env::ScriptedVehicle> vehicles;

    struct EgoAction {
        double t = 0.0;
        HighLevelAction action;
    };
    std::vector<EgoAction> ego_actions;  // time-ordered

    struct Event {
        double t = 0.0;
        int id = 0;
        double accel = 0.0;     // m/s^2, used when duration > 0
        double duration = 0.0;  // s
        int change_dir = 0;     // +1 left / -1 right, used when nonzero
    };
    std::vector<Event> events;

    // Parses the plain-text format; throws std::runtime_error with the
    // offending line number on malformed input.
    static ScenarioScript parse_file(const std::string& path);
    static ScenarioScript parse(const std::string& text, const std::string& origin);
};

struct ScenarioVerdict {
    bool collision = false;
    double min_edge_distance = std::numeric_limits<double>::infinity();
    int interventions = 0;  // decisions the filter modified
    double min_active_h = std::numeric_limits<double>::infinity();
    double min_invariant_h = std::numeric_limits<double>::infinity();
    bool infeasible_any = false;
    double final_ego_speed = 0.0;
};

struct ScenarioOptions {
    agent::FilterChoice filter = agent::FilterChoice::cbf;
    std::uint64_t seed = 1;
    std::string trajectory_csv;  // empty: no log
    motion::MotionController::Config motion;
    rules::RuleFilterConfig rule;
    cbf::CbfConfig cbf;
    env::EnvConfig env;  // lane geometry defaults; placements from script
};

ScenarioVerdict run_scenario(const ScenarioScript& script,
                             const ScenarioOptions& options);

}  // namespace highway::scenario
