#include "highway/harness.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "highway/csv_log.hpp"

namespace highway::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream s;
    s << "seed=" << seed << ";episodes=" << episodes
      << ";filter=" << static_cast<int>(filter) << ";max_traffic=" << env.max_traffic
      << ";lane_width=" << env.lane_width << ";loop=" << env.loop_length
      << ";gamma=" << agent.gamma << ";batch=" << agent.batch_size
      << ";lr=" << agent.adam.learning_rate << ";v_set=" << agent.reward.v_set
      << ";kv=" << cbf.k_v << ";dxmin=" << cbf.d_x_min << ";dymin=" << cbf.d_y_min
      << ";cb=" << cbf.c_b << ";fixed=" << env.fixed_count;
    return s.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

agent::FilterChoice parse_filter(const std::string& name) {
    if (name == "none") return agent::FilterChoice::none;
    if (name == "rule") return agent::FilterChoice::rule;
    if (name == "cbf") return agent::FilterChoice::cbf;
    throw std::runtime_error("unknown filter '" + name + "' (none|rule|cbf)");
}

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }

    cfg.seed = j.value("seed", cfg.seed);
    cfg.episodes = j.value("episodes", cfg.episodes);
    if (j.contains("filter")) cfg.filter = parse_filter(j["filter"].get<std::string>());
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
    cfg.scenario_path = j.value("scenario", cfg.scenario_path);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
    if (j.contains("densities")) cfg.densities = j["densities"].get<std::vector<int>>();
    cfg.sweep_episodes = j.value("sweep_episodes", cfg.sweep_episodes);
    cfg.sweep_duration = j.value("sweep_duration", cfg.sweep_duration);

    if (j.contains("env")) {
        const json& e = j["env"];
        cfg.env.max_traffic = e.value("max_traffic", cfg.env.max_traffic);
        cfg.env.spawn_radius = e.value("spawn_radius", cfg.env.spawn_radius);
        cfg.env.lane_width = e.value("lane_width", cfg.env.lane_width);
        cfg.env.loop_length = e.value("loop_length", cfg.env.loop_length);
        cfg.env.fixed_count = e.value("fixed_count", cfg.env.fixed_count);
        cfg.env.ego_speed_init = e.value("ego_speed_init", cfg.env.ego_speed_init);
    }
    if (j.contains("agent")) {
        const json& a = j["agent"];
        cfg.agent.gamma = a.value("gamma", cfg.agent.gamma);
        cfg.agent.batch_size = a.value("batch_size", cfg.agent.batch_size);
        cfg.agent.max_decisions = a.value("max_decisions", cfg.agent.max_decisions);
        cfg.agent.adam.learning_rate =
            a.value("learning_rate", cfg.agent.adam.learning_rate);
        cfg.agent.reward.v_set = a.value("v_set", cfg.agent.reward.v_set);
        cfg.agent.target_copy_every =
            a.value("target_copy_every", cfg.agent.target_copy_every);
        cfg.agent.net_seed = a.value("net_seed", cfg.agent.net_seed);
    }
    // Reward y_des follows the lane geometry unless pinned explicitly.
    cfg.agent.reward.y_des = cfg.env.lane_center(1);
    if (j.contains("agent") && j["agent"].contains("y_des")) {
        cfg.agent.reward.y_des = j["agent"]["y_des"].get<double>();
    }
    cfg.motion.acc.v_set = cfg.agent.reward.v_set;
    cfg.motion.lateral.lane_width = cfg.env.lane_width;
    cfg.motion.lateral.road_width = cfg.env.road_width();
    cfg.cbf.lane_width = cfg.env.lane_width;
    cfg.cbf.num_lanes = cfg.env.num_lanes;
    return cfg;
}

TrajectoryLogger::TrajectoryLogger(const std::string& path, std::uint64_t config_hash) {
    file_.open(path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64, config_hash);
    file_ << buf << '\n';
    file_ << "t,id,lane,x,y,v_x,v_y,phi,alpha_nominal,delta_nominal,alpha_safe,"
             "delta_safe,barrier_mask,h_min,j_left,j_right,side,feas_left,feas_right\n";
}

void TrajectoryLogger::log(const env::Environment& env, const agent::TickRecord& rec) {
    char buf[512];
    const env::VehicleState ego = env.ego_vehicle();
    if (rec.cbf_used) {
        const cbf::SafeControl& c = rec.cbf;
        const double hmin = std::isfinite(c.min_active_h) ? c.min_active_h : 9999.0;
        std::snprintf(buf, sizeof buf,
                      "%.1f,%d,%d,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%u,%.4f,"
                      "%.6g,%.6g,%d,%d,%d",
                      rec.t, ego.id, ego.lane, ego.x, ego.y, ego.v_x, ego.v_y,
                      ego.heading, rec.alpha_nominal, rec.delta_nominal,
                      rec.alpha_safe, rec.delta_safe, c.active_mask, hmin,
                      c.cost_left, c.cost_right, c.side, c.feasible_left ? 1 : 0,
                      c.feasible_right ? 1 : 0);
    } else {
        std::snprintf(buf, sizeof buf,
                      "%.1f,%d,%d,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,,,,,,,",
                      rec.t, ego.id, ego.lane, ego.x, ego.y, ego.v_x, ego.v_y,
                      ego.heading, rec.alpha_nominal, rec.delta_nominal,
                      rec.alpha_safe, rec.delta_safe);
    }
    file_ << buf << '\n';
    for (const env::VehicleState& v : env.traffic()) {
        std::snprintf(buf, sizeof buf, "%.1f,%d,%d,%.4f,%.4f,%.4f,%.4f,%.6f,,,,,,,,,,,",
                      rec.t, v.id, v.lane, v.x, v.y, v.v_x, v.v_y, v.heading);
        file_ << buf << '\n';
    }
}

MetricsLogger::MetricsLogger(const std::string& path, std::uint64_t config_hash,
                             const std::string& header) {
    file_.open(path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64, config_hash);
    file_ << buf << '\n' << header << '\n';
}

namespace {

std::string checkpoint_meta_path(const std::string& base) { return base + ".meta"; }
std::string checkpoint_target_path(const std::string& base) { return base + ".target"; }

void save_checkpoint(const std::string& base, const agent::Trainer& trainer,
                     mlp::Network& target, int next_episode) {
    trainer.net().save(base);
    target.save(checkpoint_target_path(base));
    std::ofstream meta(checkpoint_meta_path(base));
    meta << "episode " << next_episode << '\n';
}

int load_checkpoint(const std::string& base, agent::Trainer& trainer) {
    trainer.net() = mlp::Network::load(base);
    const std::string tpath = checkpoint_target_path(base);
    if (fs::exists(tpath)) {
        trainer.target_net() = mlp::Network::load(tpath);
    } else {
        trainer.copy_target();
    }
    int episode = 0;
    std::ifstream meta(checkpoint_meta_path(base));
    if (meta) {
        std::string key;
        meta >> key >> episode;
    }
    return episode;
}

}  // namespace

TrainOutcome run_training(const ExperimentConfig& cfg) {
    TrainOutcome out;
    fs::create_directories(cfg.out_dir);

    agent::Trainer trainer(cfg.env, cfg.agent, cfg.motion, cfg.rule, cfg.cbf, cfg.seed);
    int start = 0;
    if (!cfg.checkpoint.empty()) start = load_checkpoint(cfg.checkpoint, trainer);
    out.start_episode = start;

    const std::uint64_t hash = cfg.hash();
    MetricsLogger train_log(cfg.out_dir + "/metrics_train.csv", hash,
                            "episode,reward_per_decision,decisions,collision,"
                            "overrides,safe_actions,mean_speed,epsilon");
    MetricsLogger eval_log(cfg.out_dir + "/metrics_eval.csv", hash,
                           "episode,reward_per_decision,collisions,overrides,"
                           "safe_actions");
    if (!train_log.ok() || !eval_log.ok()) {
        throw std::runtime_error("cannot write metrics under " + cfg.out_dir);
    }

    const int total = start + cfg.episodes;
    char buf[256];
    for (int ep = start; ep < total; ++ep) {
        const double eps = agent::epsilon_for_episode(ep, total);
        const std::uint64_t ep_seed = cfg.seed * 1000003ull + ep;
        const agent::EpisodeStats st =
            trainer.run_episode(cfg.filter, agent::Mode::train, eps, ep_seed);
        out.train_episodes.push_back(st);
        std::snprintf(buf, sizeof buf, "%d,%.6f,%d,%d,%d,%d,%.4f,%.4f", ep,
                      st.reward_per_decision(), st.decisions, st.collision ? 1 : 0,
                      st.overrides, st.safe_actions, st.mean_speed, eps);
        train_log.row(buf);

        if ((ep + 1) % cfg.agent.target_copy_every == 0) trainer.copy_target();

        if ((ep + 1) % cfg.eval_every == 0) {
            double reward = 0.0;
            int collisions = 0, overrides = 0, safe = 0;
            for (int k = 0; k < cfg.eval_episodes; ++k) {
                const std::uint64_t eval_seed =
                    cfg.seed * 1000003ull + 777000000ull + ep * 31ull + k;
                const agent::EpisodeStats es = trainer.run_episode(
                    cfg.filter, agent::Mode::eval, 0.0, eval_seed);
                reward += es.reward_per_decision();
                collisions += es.collision ? 1 : 0;
                overrides += es.overrides;
                safe += es.safe_actions;
            }
            reward /= std::max(cfg.eval_episodes, 1);
            std::snprintf(buf, sizeof buf, "%d,%.6f,%d,%d,%d", ep, reward,
                          collisions, overrides, safe);
            eval_log.row(buf);
            out.evals.emplace_back(ep, agent::EpisodeStats{});
            out.evals.back().second.reward_sum = reward;
            out.evals.back().second.decisions = 1;
        }
    }

    out.checkpoint_path = cfg.out_dir + "/checkpoint.mlp";
    save_checkpoint(out.checkpoint_path, trainer, trainer.target_net(), total);
    return out;
}

namespace {

// One policy-driven episode without learning; returns the mean ego speed.
double sweep_episode(const ExperimentConfig& cfg, const std::string& policy,
                     const mlp::Network* net, int density, std::uint64_t seed) {
    env::EnvConfig ecfg = cfg.env;
    ecfg.fixed_count = density;
    env::Environment world(ecfg, seed);
    world.reset();
    agent::VehiclePilot pilot(world, cfg.motion, cfg.rule, cfg.cbf);

    baselines::IdmPolicyConfig bcfg;
    bcfg.rule = cfg.rule;
    bcfg.v_set = cfg.agent.reward.v_set;
    const double halfsum =
        0.5 * (cfg.env.ego_params.length + cfg.env.vehicle_length);

    const int decisions = static_cast<int>(cfg.sweep_duration);
    double speed_sum = 0.0;
    int counted = 0;
    for (int t = 0; t < decisions; ++t) {
        const env::AffordanceVector av = world.affordances();
        HighLevelAction a;
        if (policy == "idm") {
            a = baselines::idm_policy(av, bcfg, halfsum);
        } else if (policy == "idm_lc") {
            a = baselines::idm_lane_change_policy(av, bcfg, halfsum,
                                                  world.ego_lane(),
                                                  cfg.env.num_lanes,
                                                  pilot.lane_change_in_progress());
        } else {
            const std::array<double, agent::kStateDim> s = agent::normalize(av);
            const std::vector<double> q =
                net->forward(std::span<const double>(s.data(), s.size()));
            int best = 0;
            for (int i = 1; i < kNumActions; ++i) {
                if (q[i] > q[best]) best = i;
            }
            a = HighLevelAction::from_index(best);
        }
        if (cfg.filter == agent::FilterChoice::rule) {
            const rules::FilterResult fr =
                rules::filter_action(a, pilot.rule_input(), cfg.rule);
            if (fr.abort_lane_change) pilot.abort_lane_change();
            a = fr.action;
        }
        const agent::VehiclePilot::DecisionResult dr =
            pilot.run_decision(a, cfg.filter, 10, 0.1);
        speed_sum += world.affordances().ego_speed;
        ++counted;
        if (dr.collision) break;
    }
    return counted > 0 ? speed_sum / counted : 0.0;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::vector<std::string>& policies) {
    std::vector<SweepRow> rows;
    mlp::Network net;
    bool have_net = false;
    for (const std::string& p : policies) {
        if (p == "agent") {
            net = mlp::Network::load(cfg.checkpoint);
            have_net = true;
        }
    }
    for (int density : cfg.densities) {
        for (const std::string& policy : policies) {
            double mean = 0.0;
            for (int k = 0; k < cfg.sweep_episodes; ++k) {
                const std::uint64_t seed = cfg.seed * 7919ull + density * 131ull + k;
                mean += sweep_episode(cfg, policy,
                                      have_net && policy == "agent" ? &net : nullptr,
                                      density, seed);
            }
            mean /= std::max(cfg.sweep_episodes, 1);
            rows.push_back({density, policy, mean});
        }
    }
    return rows;
}

int cmd_train(const ExperimentConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory " << cfg.out_dir
                  << ": " << ec.message() << '\n';
        return kExitConfigError;
    }
    try {
        const TrainOutcome out = run_training(cfg);
        double last = 0.0;
        const int window = std::min<std::size_t>(100, out.train_episodes.size());
        for (int i = 0; i < window; ++i) {
            last += out.train_episodes[out.train_episodes.size() - 1 - i]
                        .reward_per_decision();
        }
        if (window > 0) last /= window;
        std::cout << "trained episodes=" << out.train_episodes.size()
                  << " final_window_reward=" << last << " checkpoint="
                  << out.checkpoint_path << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}

int cmd_eval(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty()) {
        std::cerr << "error: eval requires --checkpoint\n";
        return kExitConfigError;
    }
    try {
        agent::Trainer trainer(cfg.env, cfg.agent, cfg.motion, cfg.rule, cfg.cbf,
                               cfg.seed);
        load_checkpoint(cfg.checkpoint, trainer);
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) return kExitConfigError;
        MetricsLogger log(cfg.out_dir + "/metrics_eval.csv", cfg.hash(),
                          "episode,reward_per_decision,collisions,overrides,"
                          "safe_actions");
        char buf[256];
        double reward = 0.0;
        for (int k = 0; k < cfg.eval_episodes; ++k) {
            const agent::EpisodeStats st =
                trainer.run_episode(cfg.filter, agent::Mode::eval, 0.0,
                                    cfg.seed * 1000003ull + 555000000ull + k);
            reward += st.reward_per_decision();
            std::snprintf(buf, sizeof buf, "%d,%.6f,%d,%d,%d", k,
                          st.reward_per_decision(), st.collision ? 1 : 0,
                          st.overrides, st.safe_actions);
            log.row(buf);
        }
        std::cout << "eval mean_reward_per_decision="
                  << reward / std::max(cfg.eval_episodes, 1) << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}

int cmd_scenario(const ExperimentConfig& cfg) {
    scenario::ScenarioScript script;
    try {
        script = scenario::ScenarioScript::parse_file(cfg.scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
    try {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) return kExitConfigError;
        scenario::ScenarioOptions opt;
        opt.filter = cfg.filter;
        opt.seed = cfg.seed;
        opt.motion = cfg.motion;
        opt.rule = cfg.rule;
        opt.cbf = cfg.cbf;
        opt.env = cfg.env;
        const std::string filter_name =
            cfg.filter == agent::FilterChoice::none
                ? "none"
                : cfg.filter == agent::FilterChoice::rule ? "rule" : "cbf";
        opt.trajectory_csv =
            cfg.out_dir + "/trajectory_" + script.name + "_" + filter_name + ".csv";
        const scenario::ScenarioVerdict v = scenario::run_scenario(script, opt);
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "scenario=%s filter=%s collision=%d min_edge=%.3f "
                      "interventions=%d",
                      script.name.c_str(), filter_name.c_str(), v.collision ? 1 : 0,
                      v.min_edge_distance, v.interventions);
        std::cout << buf << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}

int cmd_sweep(const ExperimentConfig& cfg) {
    std::vector<std::string> policies = {"idm", "idm_lc"};
    if (!cfg.checkpoint.empty()) policies.push_back("agent");
    try {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) return kExitConfigError;
        const std::vector<SweepRow> rows = run_sweep(cfg, policies);
        MetricsLogger log(cfg.out_dir + "/sweep.csv", cfg.hash(),
                          "density,policy,mean_speed");
        char buf[128];
        for (const SweepRow& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%s,%.4f", r.density,
                          r.policy.c_str(), r.mean_speed);
            log.row(buf);
            std::cout << buf << '\n';
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}

}  // namespace highway::harness
