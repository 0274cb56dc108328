#include "highway/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "highway/csv_log.hpp"

namespace highway::scenario {

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

// key=value token access
double num_field(const std::string& tok, const std::string& origin, int line) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) fail(origin, line, "expected key=value, got '" + tok + "'");
    try {
        return std::stod(tok.substr(eq + 1));
    } catch (const std::exception&) {
        fail(origin, line, "bad number in '" + tok + "'");
    }
}

std::string str_field(const std::string& tok) {
    const auto eq = tok.find('=');
    return eq == std::string::npos ? std::string{} : tok.substr(eq + 1);
}

std::string key_of(const std::string& tok) {
    return tok.substr(0, tok.find('='));
}

LonAction parse_lon(const std::string& s, const std::string& origin, int line) {
    if (s == "maintain") return LonAction::maintain;
    if (s == "accelerate") return LonAction::accelerate;
    if (s == "brake") return LonAction::brake;
    if (s == "hard_brake") return LonAction::hard_brake;
    fail(origin, line, "unknown longitudinal action '" + s + "'");
}

LatAction parse_lat(const std::string& s, const std::string& origin, int line) {
    if (s == "keep") return LatAction::keep;
    if (s == "change_left") return LatAction::change_left;
    if (s == "change_right") return LatAction::change_right;
    fail(origin, line, "unknown lateral action '" + s + "'");
}

}  // namespace

ScenarioScript ScenarioScript::parse(const std::string& text,
                                     const std::string& origin) {
    ScenarioScript sc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t) tok.push_back(t);
        if (tok.empty()) continue;

        const std::string& head = tok[0];
        auto need = [&](std::size_t n) {
            if (tok.size() < n + 1) fail(origin, lineno, "'" + head + "' needs " +
                                         std::to_string(n) + " fields");
        };
        if (head == "name") {
            need(1);
            sc.name = tok[1];
        } else if (head == "duration") {
            need(1);
            try { sc.duration = std::stod(tok[1]); }
            catch (...) { fail(origin, lineno, "bad duration"); }
        } else if (head == "lane_width") {
            need(1);
            sc.lane_width = std::stod(tok[1]);
        } else if (head == "lanes") {
            need(1);
            sc.num_lanes = std::stoi(tok[1]);
        } else if (head == "ego") {
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const std::string k = key_of(tok[i]);
                if (k == "lane") sc.ego_lane = static_cast<int>(num_field(tok[i], origin, lineno));
                else if (k == "speed") sc.ego_speed = num_field(tok[i], origin, lineno);
                else fail(origin, lineno, "unknown ego field '" + k + "'");
            }
        } else if (head == "vehicle") {
            env::ScriptedVehicle v;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const std::string k = key_of(tok[i]);
                if (k == "id") v.id = static_cast<int>(num_field(tok[i], origin, lineno));
                else if (k == "lane") v.lane = static_cast<int>(num_field(tok[i], origin, lineno));
                else if (k == "ahead") v.gap_ahead = num_field(tok[i], origin, lineno);
                else if (k == "speed") v.speed = num_field(tok[i], origin, lineno);
                else if (k == "behavior") v.scripted = str_field(tok[i]) != "traffic";
                else fail(origin, lineno, "unknown vehicle field '" + k + "'");
            }
            if (v.id <= 0) fail(origin, lineno, "vehicle needs id>0");
            sc.vehicles.push_back(v);
        } else if (head == "ego_action") {
            EgoAction ea;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const std::string k = key_of(tok[i]);
                if (k == "t") ea.t = num_field(tok[i], origin, lineno);
                else if (k == "lon") ea.action.lon = parse_lon(str_field(tok[i]), origin, lineno);
                else if (k == "lat") ea.action.lat = parse_lat(str_field(tok[i]), origin, lineno);
                else fail(origin, lineno, "unknown ego_action field '" + k + "'");
            }
            sc.ego_actions.push_back(ea);
        } else if (head == "event") {
            Event ev;
            bool have_id = false;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const std::string k = key_of(tok[i]);
                if (k == "t") ev.t = num_field(tok[i], origin, lineno);
                else if (k == "id") { ev.id = static_cast<int>(num_field(tok[i], origin, lineno)); have_id = true; }
                else if (k == "accel") ev.accel = num_field(tok[i], origin, lineno);
                else if (k == "duration") ev.duration = num_field(tok[i], origin, lineno);
                else if (k == "change") {
                    const std::string d = str_field(tok[i]);
                    if (d == "left") ev.change_dir = +1;
                    else if (d == "right") ev.change_dir = -1;
                    else fail(origin, lineno, "change must be left or right");
                } else fail(origin, lineno, "unknown event field '" + k + "'");
            }
            if (!have_id) fail(origin, lineno, "event needs id=");
            sc.events.push_back(ev);
        } else {
            fail(origin, lineno, "unknown directive '" + head + "'");
        }
    }
    std::sort(sc.ego_actions.begin(), sc.ego_actions.end(),
              [](const EgoAction& a, const EgoAction& b) { return a.t < b.t; });
    std::sort(sc.events.begin(), sc.events.end(),
              [](const Event& a, const Event& b) { return a.t < b.t; });
    return sc;
}

ScenarioScript ScenarioScript::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open scenario script");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

ScenarioVerdict run_scenario(const ScenarioScript& script,
                             const ScenarioOptions& options) {
    env::EnvConfig ecfg = options.env;
    ecfg.lane_width = script.lane_width;
    ecfg.num_lanes = script.num_lanes;
    ecfg.ego_lane_init = script.ego_lane;
    ecfg.ego_speed_init = script.ego_speed;
    ecfg.max_traffic = 0;

    motion::MotionController::Config mcfg = options.motion;
    mcfg.lateral.lane_width = script.lane_width;
    mcfg.lateral.road_width = script.lane_width * script.num_lanes;
    cbf::CbfConfig ccfg = options.cbf;
    ccfg.lane_width = script.lane_width;
    ccfg.num_lanes = script.num_lanes;

    env::Environment world(ecfg, options.seed);
    world.reset_scripted(script.vehicles);
    for (const ScenarioScript::Event& ev : script.events) {
        if (ev.change_dir != 0) world.script_lane_change(ev.id, ev.change_dir, ev.t);
        if (ev.duration > 0.0) world.script_accel(ev.id, ev.accel, ev.t, ev.duration);
    }

    agent::VehiclePilot pilot(world, mcfg, options.rule, ccfg);

    std::unique_ptr<harness::TrajectoryLogger> log;
    if (!options.trajectory_csv.empty()) {
        log = std::make_unique<harness::TrajectoryLogger>(
            options.trajectory_csv, harness::fnv1a(script.name));
    }

    ScenarioVerdict verdict;
    const agent::TickSink sink = [&](const agent::TickRecord& rec) {
        verdict.min_edge_distance =
            std::min(verdict.min_edge_distance, world.min_edge_distance());
        if (rec.cbf_used) {
            verdict.min_active_h = std::min(verdict.min_active_h, rec.cbf.min_active_h);
            verdict.min_invariant_h =
                std::min(verdict.min_invariant_h, rec.cbf.min_invariant_h);
            if (rec.cbf.lateral_infeasible) verdict.infeasible_any = true;
        }
        if (log) log->log(world, rec);
    };

    // Scheduled actions persist until the next scheduled one; an in-progress
    // lane change absorbs a repeated request for the same direction.
    const int decisions = static_cast<int>(std::ceil(script.duration));
    std::size_t next_action = 0;
    HighLevelAction a{LonAction::maintain, LatAction::keep};
    for (int t = 0; t < decisions; ++t) {
        while (next_action < script.ego_actions.size() &&
               script.ego_actions[next_action].t <= world.time() + 1e-9) {
            a = script.ego_actions[next_action].action;
            ++next_action;
        }

        HighLevelAction exec = a;
        bool overrode = false;
        if (options.filter == agent::FilterChoice::rule) {
            const rules::FilterResult fr =
                rules::filter_action(a, pilot.rule_input(), options.rule);
            if (fr.abort_lane_change) pilot.abort_lane_change();
            overrode = fr.overridden;
            exec = fr.action;
        }
        const agent::VehiclePilot::DecisionResult dr =
            pilot.run_decision(exec, options.filter, 10, 0.1, sink);
        if (dr.overridden || overrode) verdict.interventions++;
        if (dr.collision) {
            verdict.collision = true;
            verdict.min_edge_distance = 0.0;
            break;
        }
    }
    verdict.final_ego_speed = std::hypot(world.ego().v_lon, world.ego().v_lat);
    return verdict;
}

}  // namespace highway::scenario
