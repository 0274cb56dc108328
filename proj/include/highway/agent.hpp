#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "highway/action.hpp"
#include "highway/cbf_filter.hpp"
#include "highway/highway_env.hpp"
#include "highway/mlp.hpp"
#include "highway/motion_control.hpp"
#include "highway/rule_filter.hpp"

// DDQN decision maker: epsilon-greedy policy over the 12 actions, dual
// replay buffers, double-Q targets, safety-filter coupling, reward assembly,
// and action translation.

namespace highway::agent {

enum class FilterChoice { none, rule, cbf };
enum class Mode { train, eval, adapt };

inline constexpr int kStateDim = 27;
inline constexpr std::array<int, 4> kNetworkLayers = {27, 100, 100, 12};

// Fixed input scaling: distances /100 m, velocities /40 m/s, lateral
// positions /12 m.
std::array<double, kStateDim> normalize(const env::AffordanceVector& av);

int select_action(const mlp::Network& net, std::span<const double> state,
                  double epsilon, std::mt19937_64& rng);

double epsilon_for_episode(int episode, int total_episodes,
                           double eps_start = 1.0, double eps_end = 0.2,
                           double anneal_fraction = 0.7);

struct RewardWeights {
    double v_set = 30.0;       // desired free speed (m/s)
    double y_des = 5.7;        // desired lateral position (m)
    double headway_floor = 1.3;  // s, minimum time headway
    double r_col = -10.0;
    // Divergence penalty scales. Buf_C rows do not bootstrap, so the
    // penalty has to outweigh a discounted continuation for the filter
    // never to look like an attractive episode exit.
    double w_lon = 10.0;  // per g of longitudinal divergence
    double w_lat = 8.0;
};

struct RewardContext {
    double ego_speed = 0.0;
    double ego_y = 0.0;
    bool lead_present = false;
    double lead_speed = 0.0;
    double lead_gap = 0.0;  // bumper gap (m)
};

// mean(r_v, r_y, r_x), each component in [-1, 0].
double base_reward(const RewardContext& ctx, const RewardWeights& w);
double desired_speed(const RewardContext& ctx, const RewardWeights& w);

struct ControlTrace {
    std::vector<double> accel_g;
    std::vector<double> steer;
};

// Safety reward component from the divergence between the nominal and the
// executed (safe) control windows. Zero when the traces agree.
double safety_penalty(const ControlTrace& nominal, const ControlTrace& safe,
                      const RewardWeights& w, double ego_speed,
                      double ego_heading, double wheelbase, double lane_width);

// Maps a safe control window back into the discrete action space.
HighLevelAction translate_action(const ControlTrace& safe, double ego_speed,
                                 double ego_heading, double wheelbase,
                                 double lane_width);

// Lateral intent of a steering trace: -1 right, 0 keep, +1 left.
int lateral_intent(std::span<const double> steer, double ego_speed,
                   double ego_heading, double wheelbase, double lane_width,
                   double dt = 0.1, double coast = 2.0);

struct Transition {
    std::array<float, kStateDim> state;
    int action = 0;
    bool terminal = false;  // stored without a successor
    std::array<float, kStateDim> next_state;
    float reward = 0.0f;
};

class DualBuffer {
  public:
    DualBuffer(std::size_t safe_capacity = 100000,
               std::size_t collision_capacity = 10000);

    void push_safe(const Transition& t);
    void push_collision(const Transition& t);
    std::size_t safe_size() const { return safe_.size(); }
    std::size_t collision_size() const { return collision_.size(); }

    // Minibatch with a 1:3 collision:safe mix when both are populated.
    std::vector<Transition> sample(int batch, std::mt19937_64& rng) const;

  private:
    void push(std::vector<Transition>& buf, std::size_t cap, std::size_t& next,
              const Transition& t);
    std::vector<Transition> safe_, collision_;
    std::size_t safe_cap_, collision_cap_;
    std::size_t safe_next_ = 0, collision_next_ = 0;
};

// Double-Q targets: y = r for terminal rows, r + gamma * Qhat(s', argmax Q)
// otherwise.
std::vector<double> ddqn_targets(std::span<const Transition> batch,
                                 const mlp::Network& net,
                                 const mlp::Network& target_net, double gamma);

struct AgentConfig {
    double gamma = 0.9;
    int batch_size = 32;
    int target_copy_every = 25;   // episodes
    int max_decisions = 200;
    std::size_t safe_capacity = 100000;
    std::size_t collision_capacity = 10000;
    double adapt_learning_rate = 1e-5;
    std::uint64_t net_seed = 7;
    RewardWeights reward;
    mlp::AdamConfig adam;
    int decision_ticks = 10;  // controller ticks per decision
    double tick_dt = 0.1;
};

struct EpisodeStats {
    int decisions = 0;
    double reward_sum = 0.0;
    int overrides = 0;
    bool collision = false;
    double mean_speed = 0.0;
    int safe_actions = 0;
    double min_active_h = std::numeric_limits<double>::infinity();
    bool cbf_infeasible = false;

    double reward_per_decision() const {
        return decisions > 0 ? reward_sum / decisions : 0.0;
    }
};

// Per-tick record the harness can log to the trajectory CSV.
struct TickRecord {
    double t;
    double alpha_nominal, delta_nominal;
    double alpha_safe, delta_safe;
    cbf::SafeControl cbf;
    bool cbf_used = false;
};
using TickSink = std::function<void(const TickRecord&)>;

// Drives the ego through one decision window: motion control at 10 Hz, the
// selected safety filter, and the environment step.
class VehiclePilot {
  public:
    VehiclePilot(env::Environment& env, const motion::MotionController::Config& mcfg,
                 const rules::RuleFilterConfig& rcfg, const cbf::CbfConfig& ccfg);

    struct DecisionResult {
        ControlTrace nominal, safe;
        bool collision = false;
        bool overridden = false;  // filter materially changed the window
        double min_active_h = std::numeric_limits<double>::infinity();
        double min_invariant_h = std::numeric_limits<double>::infinity();
        bool infeasible = false;
        bool lane_change_rejected = false;
    };

    DecisionResult run_decision(const HighLevelAction& a, FilterChoice filter,
                                int ticks, double dt, const TickSink& sink = {});

    rules::FilterInput rule_input() const;
    const motion::MotionController& controller() const { return motion_; }
    motion::MotionController& controller() { return motion_; }
    void abort_lane_change();
    int lane_change_in_progress() const;

  private:
    env::Environment& env_;
    motion::MotionController motion_;
    rules::RuleFilterConfig rule_cfg_;
    cbf::CbfFilter cbf_;
};

class Trainer {
  public:
    Trainer(const env::EnvConfig& env_cfg, const AgentConfig& acfg,
            const motion::MotionController::Config& mcfg,
            const rules::RuleFilterConfig& rcfg, const cbf::CbfConfig& ccfg,
            std::uint64_t seed);

    EpisodeStats run_episode(FilterChoice filter, Mode mode, double epsilon,
                             std::uint64_t episode_seed,
                             const TickSink& sink = {});

    mlp::Network& net() { return net_; }
    const mlp::Network& net() const { return net_; }
    mlp::Network& target_net() { return target_net_; }
    void copy_target() { target_net_ = net_; }
    DualBuffer& buffers() { return buffers_; }
    const AgentConfig& config() const { return cfg_; }
    env::Environment& environment() { return env_; }

  private:
    void train_step(std::mt19937_64& rng, Mode mode);
    RewardContext reward_context() const;

    env::EnvConfig env_cfg_;
    AgentConfig cfg_;
    motion::MotionController::Config motion_cfg_;
    rules::RuleFilterConfig rule_cfg_;
    cbf::CbfConfig cbf_cfg_;
    env::Environment env_;
    mlp::Network net_, target_net_;
    DualBuffer buffers_;
};

}  // namespace highway::agent
