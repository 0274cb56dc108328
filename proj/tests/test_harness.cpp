#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "highway/harness.hpp"

using namespace highway;
using namespace highway::harness;

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string tmp_dir(const std::string& tag) {
    const std::string d = "/tmp/highway_test_" + tag;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("scenario parser reads the checked-in scripts") {
    const scenario::ScenarioScript sc =
        scenario::ScenarioScript::parse_file(std::string(SCENARIO_DIR) +
                                             "/rb_vs_cbf.scn");
    CHECK(sc.name == "rb_vs_cbf");
    CHECK(sc.duration == doctest::Approx(12.0));
    CHECK(sc.ego_speed == doctest::Approx(31.3));
    REQUIRE(sc.vehicles.size() == 1);
    CHECK(sc.vehicles[0].gap_ahead == doctest::Approx(18.0));
    REQUIRE(sc.events.size() == 1);
    CHECK(sc.events[0].accel == doctest::Approx(-3.43));
    REQUIRE(sc.ego_actions.size() == 1);
    CHECK(sc.ego_actions[0].action.lat == LatAction::change_left);
}

TEST_CASE("scenario parser reports the offending line") {
    const std::string bad = "name x\nduration 5\nvehicle id=1 lane=zz\n";
    try {
        scenario::ScenarioScript::parse(bad, "inline");
        FAIL("expected parse error");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("inline:3") != std::string::npos);
    }
}

TEST_CASE("config loads from json and rejects garbage") {
    const std::string dir = tmp_dir("config");
    const std::string good = dir + "/good.json";
    {
        std::ofstream f(good);
        f << R"({"seed": 9, "episodes": 42, "filter": "rule",
                 "env": {"max_traffic": 12, "lane_width": 3.4},
                 "agent": {"gamma": 0.8}})";
    }
    const ExperimentConfig cfg = load_config(good);
    CHECK(cfg.seed == 9);
    CHECK(cfg.episodes == 42);
    CHECK(cfg.filter == agent::FilterChoice::rule);
    CHECK(cfg.env.max_traffic == 12);
    CHECK(cfg.env.lane_width == doctest::Approx(3.4));
    CHECK(cfg.agent.gamma == doctest::Approx(0.8));
    CHECK(cfg.agent.reward.y_des == doctest::Approx(1.5 * 3.4));

    const std::string bad = dir + "/bad.json";
    {
        std::ofstream f(bad);
        f << "{not json";
    }
    CHECK_THROWS(load_config(bad));
    CHECK_THROWS(load_config(dir + "/missing.json"));
}

TEST_CASE("scenario runs are reproducible byte for byte") {
    const std::string dir = tmp_dir("repro");
    const scenario::ScenarioScript sc = scenario::ScenarioScript::parse_file(
        std::string(SCENARIO_DIR) + "/cut_in.scn");
    scenario::ScenarioOptions opt;
    opt.filter = agent::FilterChoice::cbf;
    opt.seed = 5;
    for (int run = 0; run < 2; ++run) {
        opt.trajectory_csv = dir + "/traj_" + std::to_string(run) + ".csv";
        scenario::run_scenario(sc, opt);
    }
    const std::string a = slurp(dir + "/traj_0.csv");
    const std::string b = slurp(dir + "/traj_1.csv");
    REQUIRE(!a.empty());
    CHECK(a == b);
}

TEST_CASE("training smoke run writes metrics and a resumable checkpoint") {
    ExperimentConfig cfg;
    cfg.out_dir = tmp_dir("train");
    cfg.episodes = 3;
    cfg.eval_every = 2;
    cfg.eval_episodes = 1;
    cfg.env.max_traffic = 8;
    cfg.agent.max_decisions = 10;
    const TrainOutcome out = run_training(cfg);
    CHECK(out.train_episodes.size() == 3);
    CHECK(fs::exists(cfg.out_dir + "/metrics_train.csv"));
    CHECK(fs::exists(cfg.out_dir + "/metrics_eval.csv"));
    CHECK(fs::exists(out.checkpoint_path));

    const std::string metrics = slurp(cfg.out_dir + "/metrics_train.csv");
    CHECK(metrics.rfind("# config_hash=", 0) == 0);
    CHECK(metrics.find("episode,reward_per_decision") != std::string::npos);

    // resume continues the episode numbering
    ExperimentConfig resume = cfg;
    resume.checkpoint = out.checkpoint_path;
    resume.out_dir = tmp_dir("train_resume");
    resume.episodes = 2;
    const TrainOutcome out2 = run_training(resume);
    CHECK(out2.start_episode == 3);
    const std::string m2 = slurp(resume.out_dir + "/metrics_train.csv");
    CHECK(m2.find("\n3,") != std::string::npos);
    CHECK(m2.find("\n4,") != std::string::npos);
}

TEST_CASE("sweep produces rows for every density and policy") {
    ExperimentConfig cfg;
    cfg.densities = {4, 12};
    cfg.sweep_episodes = 1;
    cfg.sweep_duration = 20.0;
    const std::vector<SweepRow> rows = run_sweep(cfg, {"idm", "idm_lc"});
    REQUIRE(rows.size() == 4);
    for (const SweepRow& r : rows) {
        CHECK(r.mean_speed > 0.0);
        CHECK(r.mean_speed < 40.0);
    }
}

TEST_CASE("cli exit codes and outputs") {
    const std::string dir = tmp_dir("cli");
    const std::string bin = CLI_BINARY_PATH;
    const std::string scen = std::string(SCENARIO_DIR) + "/blind_spot.scn";

    int rc = std::system((bin + " scenario " + scen + " --filter cbf --out " +
                          dir + " > " + dir + "/out.txt 2>&1")
                             .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    const std::string out = slurp(dir + "/out.txt");
    CHECK(out.find("scenario=blind_spot") != std::string::npos);
    CHECK(fs::exists(dir + "/trajectory_blind_spot_cbf.csv"));

    rc = std::system((bin + " scenario /nonexistent.scn --out " + dir +
                      " > /dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    rc = std::system((bin + " train --filter bogus --out " + dir +
                      " > /dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    rc = std::system((bin + " eval --out " + dir + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 2);  // missing checkpoint
}

TEST_CASE("smoke training improves between evaluation windows") {
    ExperimentConfig cfg;
    cfg.out_dir = tmp_dir("train200");
    cfg.seed = 11;
    cfg.episodes = 200;
    cfg.eval_every = 50;
    cfg.eval_episodes = 2;
    cfg.filter = agent::FilterChoice::cbf;
    const TrainOutcome out = run_training(cfg);
    REQUIRE(out.evals.size() == 4);
    const double first = out.evals.front().second.reward_per_decision();
    const double last = out.evals.back().second.reward_per_decision();
    CHECK(last > first);
}
