#include "highway/agent.hpp"

#include <algorithm>
#include <cmath>

namespace highway::agent {

namespace {
constexpr double kDistScale = 100.0;
constexpr double kSpeedScale = 40.0;
constexpr double kLatScale = 12.0;
constexpr double kSteerDivergenceTol = 1e-3;  // rad
// Material-override thresholds: corrections below these are barrier
// grazing, not a changed decision.
constexpr double kOverrideTolAccel = 0.01;   // g (~0.1 m/s^2)
constexpr double kOverrideTolSteer = 2e-3;   // rad
}  // namespace

std::array<double, kStateDim> normalize(const env::AffordanceVector& av) {
    std::array<double, kStateDim> out;
    int k = 0;
    for (const env::TargetSlot& s : av.slots) {
        out[k++] = s.dx / kDistScale;
        out[k++] = s.dvx / kSpeedScale;
        out[k++] = s.dy / kLatScale;
        out[k++] = s.dvy / kSpeedScale;
    }
    out[k++] = av.ego_speed / kSpeedScale;
    out[k++] = av.ego_lat_pos / kLatScale;
    out[k++] = av.ego_lat_vel / kSpeedScale;
    return out;
}

int select_action(const mlp::Network& net, std::span<const double> state,
                  double epsilon, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    if (uni(rng) < epsilon) {
        return std::uniform_int_distribution<int>(0, kNumActions - 1)(rng);
    }
    const std::vector<double> q = net.forward(state);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
        if (q[a] > q[best]) best = a;  // ties resolve to the lowest index
    }
    return best;
}

double epsilon_for_episode(int episode, int total_episodes, double eps_start,
                           double eps_end, double anneal_fraction) {
    const double span = anneal_fraction * total_episodes;
    if (span <= 0.0 || episode >= span) return eps_end;
    return eps_start + (eps_end - eps_start) * (episode / span);
}

double desired_speed(const RewardContext& ctx, const RewardWeights& w) {
    if (!ctx.lead_present) return w.v_set;
    const double d_safe = std::max(w.headway_floor * ctx.ego_speed, 6.0);
    if (ctx.lead_gap >= 1.5 * d_safe) return w.v_set;
    const double constrained = ctx.lead_speed + std::max(0.0, ctx.lead_gap - d_safe) / 4.0;
    return std::clamp(constrained, 0.0, w.v_set);
}

double base_reward(const RewardContext& ctx, const RewardWeights& w) {
    const double v_des = desired_speed(ctx, w);
    const double dv = ctx.ego_speed - v_des;
    const double r_v = std::exp(-dv * dv / 10.0) - 1.0;

    const double dy = ctx.ego_y - w.y_des;
    const double r_y = std::exp(-dy * dy / 10.0) - 1.0;

    double r_x = 0.0;
    if (ctx.lead_present) {
        const double d_safe = std::max(w.headway_floor * ctx.ego_speed, 6.0);
        if (ctx.lead_gap < d_safe) {
            const double dd = ctx.lead_gap - d_safe;
            r_x = std::exp(-dd * dd / (10.0 * d_safe)) - 1.0;
        }
    }
    return (r_v + r_y + r_x) / 3.0;
}

int lateral_intent(std::span<const double> steer, double ego_speed,
                   double ego_heading, double wheelbase, double lane_width,
                   double dt, double coast) {
    double heading = ego_heading;
    double y = 0.0;
    const double v = std::max(ego_speed, 1.0);
    for (double d : steer) {
        heading += v / wheelbase * d * dt;
        y += v * std::sin(heading) * dt;
    }
    y += v * std::sin(heading) * coast;
    if (y > 0.5 * lane_width) return +1;
    if (y < -0.5 * lane_width) return -1;
    return 0;
}

double safety_penalty(const ControlTrace& nominal, const ControlTrace& safe,
                      const RewardWeights& w, double ego_speed,
                      double ego_heading, double wheelbase, double lane_width) {
    const std::size_t n = std::min(nominal.accel_g.size(), safe.accel_g.size());
    if (n == 0) return 0.0;

    double mean_dev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mean_dev += std::fabs(nominal.accel_g[k] - safe.accel_g[k]);
    }
    mean_dev /= static_cast<double>(n);
    const double f_lon = -w.w_lon * mean_dev;

    double f_lat = 0.0;
    const int nominal_intent = lateral_intent(nominal.steer, ego_speed,
                                              ego_heading, wheelbase, lane_width);
    const int safe_intent = lateral_intent(safe.steer, ego_speed, ego_heading,
                                           wheelbase, lane_width);
    if (nominal_intent != safe_intent) {
        std::size_t first = 1;  // 1-based first divergent sub-step
        for (std::size_t k = 0; k < n; ++k) {
            if (std::fabs(nominal.steer[k] - safe.steer[k]) > kSteerDivergenceTol) {
                first = k + 1;
                break;
            }
        }
        f_lat = -w.w_lat * static_cast<double>(n - first) / static_cast<double>(n);
    }
    return f_lon + f_lat;
}

HighLevelAction translate_action(const ControlTrace& safe, double ego_speed,
                                 double ego_heading, double wheelbase,
                                 double lane_width) {
    HighLevelAction a;
    double mean_acc = 0.0;
    for (double g : safe.accel_g) mean_acc += g * dynamics::kGravity;
    if (!safe.accel_g.empty()) mean_acc /= static_cast<double>(safe.accel_g.size());

    const LonAction order[4] = {LonAction::maintain, LonAction::accelerate,
                                LonAction::brake, LonAction::hard_brake};
    double best = std::numeric_limits<double>::infinity();
    for (LonAction cand : order) {
        const double d = std::fabs(mean_acc - accel_level(cand));
        if (d < best) {
            best = d;
            a.lon = cand;
        }
    }

    const int intent = lateral_intent(safe.steer, ego_speed, ego_heading,
                                      wheelbase, lane_width);
    a.lat = intent > 0   ? LatAction::change_left
            : intent < 0 ? LatAction::change_right
                         : LatAction::keep;
    return a;
}

DualBuffer::DualBuffer(std::size_t safe_capacity, std::size_t collision_capacity)
    : safe_cap_(safe_capacity), collision_cap_(collision_capacity) {}

void DualBuffer::push(std::vector<Transition>& buf, std::size_t cap,
                      std::size_t& next, const Transition& t) {
    if (buf.size() < cap) {
        buf.push_back(t);
    } else {
        buf[next] = t;
        next = (next + 1) % cap;
    }
}

void DualBuffer::push_safe(const Transition& t) {
    push(safe_, safe_cap_, safe_next_, t);
}

void DualBuffer::push_collision(const Transition& t) {
    push(collision_, collision_cap_, collision_next_, t);
}

std::vector<Transition> DualBuffer::sample(int batch, std::mt19937_64& rng) const {
    std::vector<Transition> out;
    out.reserve(batch);
    const bool have_collision = !collision_.empty();
    const bool have_safe = !safe_.empty();
    if (!have_collision && !have_safe) return out;

    int from_collision = 0;
    if (have_collision) from_collision = have_safe ? batch / 4 : batch;
    const int from_safe = batch - from_collision;

    for (int i = 0; i < from_collision; ++i) {
        out.push_back(collision_[std::uniform_int_distribution<std::size_t>(
            0, collision_.size() - 1)(rng)]);
    }
    for (int i = 0; i < from_safe && have_safe; ++i) {
        out.push_back(safe_[std::uniform_int_distribution<std::size_t>(
            0, safe_.size() - 1)(rng)]);
    }
    return out;
}

std::vector<double> ddqn_targets(std::span<const Transition> batch,
                                 const mlp::Network& net,
                                 const mlp::Network& target_net, double gamma) {
    std::vector<double> y;
    y.reserve(batch.size());
    std::vector<double> state(kStateDim);
    for (const Transition& t : batch) {
        if (t.terminal) {
            y.push_back(t.reward);
            continue;
        }
        for (int i = 0; i < kStateDim; ++i) state[i] = t.next_state[i];
        const std::vector<double> q_online = net.forward(state);
        int best = 0;
        for (int a = 1; a < kNumActions; ++a) {
            if (q_online[a] > q_online[best]) best = a;
        }
        const std::vector<double> q_target = target_net.forward(state);
        y.push_back(t.reward + gamma * q_target[best]);
    }
    return y;
}

VehiclePilot::VehiclePilot(env::Environment& env,
                           const motion::MotionController::Config& mcfg,
                           const rules::RuleFilterConfig& rcfg,
                           const cbf::CbfConfig& ccfg)
    : env_(env), motion_(mcfg, env.config().lane_center(env.config().ego_lane_init)),
      rule_cfg_(rcfg), cbf_(ccfg) {}

rules::FilterInput VehiclePilot::rule_input() const {
    const env::AffordanceVector av = env_.affordances();
    const double half_len =
        0.5 * (env_.config().ego_params.length + env_.config().vehicle_length);
    rules::FilterInput in;
    auto to_neighbor = [&](const env::TargetSlot& s, bool front) {
        rules::Neighbor n;
        if (!s.present) return n;
        n.present = true;
        n.gap = std::fabs(s.dx) - half_len;  // center distance minus lengths
        n.closing_speed = front ? -s.dvx : s.dvx;
        return n;
    };
    in.front_center = to_neighbor(av.slots[env::kCenterFront], true);
    in.front_left = to_neighbor(av.slots[env::kLeftFront], true);
    in.rear_left = to_neighbor(av.slots[env::kLeftRear], false);
    in.front_right = to_neighbor(av.slots[env::kRightFront], true);
    in.rear_right = to_neighbor(av.slots[env::kRightRear], false);
    in.ego_lane = env_.ego_lane();
    in.num_lanes = env_.config().num_lanes;
    in.lane_change_in_progress = lane_change_in_progress();
    return in;
}

void VehiclePilot::abort_lane_change() { motion_.lateral().abort_lane_change(); }

int VehiclePilot::lane_change_in_progress() const {
    if (!motion_.lateral().lane_change_active()) return 0;
    return motion_.lateral().lane_change_direction();
}

VehiclePilot::DecisionResult VehiclePilot::run_decision(const HighLevelAction& a,
                                                        FilterChoice filter,
                                                        int ticks, double dt,
                                                        const TickSink& sink) {
    DecisionResult res;
    res.lane_change_rejected = !motion_.decide(a);

    for (int k = 0; k < ticks; ++k) {
        const env::AffordanceVector av = env_.affordances();
        const dynamics::BicycleState& ego = env_.ego();
        const double ego_speed = std::hypot(ego.v_lon, ego.v_lat);
        const double half_len =
            0.5 * (env_.config().ego_params.length + env_.config().vehicle_length);

        std::vector<motion::Lead> leads;
        if (av.slots[env::kCenterFront].present) {
            leads.push_back({std::fabs(av.slots[env::kCenterFront].dx) - half_len,
                             av.slots[env::kCenterFront].dvx});
        }
        if (motion_.lane_change_phase1(ego.y)) {
            const int slot = motion_.lateral().lane_change_direction() > 0
                                 ? env::kLeftFront
                                 : env::kRightFront;
            if (av.slots[slot].present) {
                leads.push_back({std::fabs(av.slots[slot].dx) - half_len,
                                 av.slots[slot].dvx});
            }
        }

        const motion::MotionController::Controls nominal =
            motion_.tick(ego.y, ego.heading, ego.v_lon, leads, dt);

        double alpha = nominal.accel_g;
        double delta = nominal.steer;
        TickRecord rec;
        rec.t = env_.time();
        rec.alpha_nominal = alpha;
        rec.delta_nominal = delta;

        if (filter == FilterChoice::cbf) {
            const std::vector<env::CbfTarget> targets = env_.cbf_targets();
            cbf::EgoContext ctx;
            ctx.y = ego.y;
            ctx.heading = ego.heading + std::atan2(ego.v_lat, std::max(ego.v_lon, 0.5));
            ctx.speed = ego_speed;
            ctx.wheelbase = env_.config().ego_params.wheelbase();
            const cbf::SafeControl safe = cbf_.filter(alpha, delta, targets, ctx);
            alpha = safe.accel_g;
            delta = safe.steer;
            rec.cbf = safe;
            rec.cbf_used = true;
            res.min_active_h = std::min(res.min_active_h, safe.min_active_h);
            res.min_invariant_h = std::min(res.min_invariant_h, safe.min_invariant_h);
            if (safe.lateral_infeasible) res.infeasible = true;
            if (std::fabs(alpha - rec.alpha_nominal) > kOverrideTolAccel ||
                std::fabs(delta - rec.delta_nominal) > kOverrideTolSteer) {
                res.overridden = true;
            }
        }
        rec.alpha_safe = alpha;
        rec.delta_safe = delta;

        res.nominal.accel_g.push_back(rec.alpha_nominal);
        res.nominal.steer.push_back(rec.delta_nominal);
        res.safe.accel_g.push_back(alpha);
        res.safe.steer.push_back(delta);

        const env::StepEvents ev = env_.step(alpha, delta, dt);
        if (sink) sink(rec);
        if (ev.collision) {
            res.collision = true;
            break;
        }
    }
    return res;
}

Trainer::Trainer(const env::EnvConfig& env_cfg, const AgentConfig& acfg,
                 const motion::MotionController::Config& mcfg,
                 const rules::RuleFilterConfig& rcfg, const cbf::CbfConfig& ccfg,
                 std::uint64_t seed)
    : env_cfg_(env_cfg),
      cfg_(acfg),
      motion_cfg_(mcfg),
      rule_cfg_(rcfg),
      cbf_cfg_(ccfg),
      env_(env_cfg, seed),
      net_(std::vector<int>(kNetworkLayers.begin(), kNetworkLayers.end()),
           acfg.net_seed),
      target_net_(net_),
      buffers_(acfg.safe_capacity, acfg.collision_capacity) {}

RewardContext Trainer::reward_context() const {
    const env::AffordanceVector av = env_.affordances();
    RewardContext ctx;
    ctx.ego_speed = av.ego_speed;
    ctx.ego_y = av.ego_lat_pos;
    const env::TargetSlot& lead = av.slots[env::kCenterFront];
    if (lead.present) {
        ctx.lead_present = true;
        ctx.lead_speed = av.ego_speed + lead.dvx;
        ctx.lead_gap = std::fabs(lead.dx) -
                       0.5 * (env_.config().ego_params.length +
                              env_.config().vehicle_length);
    }
    return ctx;
}

void Trainer::train_step(std::mt19937_64& rng, Mode mode) {
    const std::size_t total = buffers_.safe_size() + buffers_.collision_size();
    if (total < static_cast<std::size_t>(cfg_.batch_size)) return;
    const std::vector<Transition> batch = buffers_.sample(cfg_.batch_size, rng);
    const std::vector<double> y = ddqn_targets(batch, net_, target_net_, cfg_.gamma);

    std::vector<mlp::TrainSample> samples(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        samples[i].input.assign(batch[i].state.begin(), batch[i].state.end());
        samples[i].output_index = batch[i].action;
        samples[i].target = y[i];
    }
    mlp::AdamConfig adam = cfg_.adam;
    if (mode == Mode::adapt) adam.learning_rate = cfg_.adapt_learning_rate;
    net_.train_batch(samples, adam);
}

EpisodeStats Trainer::run_episode(FilterChoice filter, Mode mode, double epsilon,
                                  std::uint64_t episode_seed, const TickSink& sink) {
    EpisodeStats stats;
    std::mt19937_64 rng(episode_seed ^ 0x9e3779b97f4a7c15ull);

    env_ = env::Environment(env_cfg_, episode_seed);
    env_.reset();
    VehiclePilot pilot(env_, motion_cfg_, rule_cfg_, cbf_cfg_);

    const double eff_epsilon = mode == Mode::train ? epsilon : 0.0;

    env::AffordanceVector av = env_.affordances();
    std::array<double, kStateDim> s = normalize(av);
    double speed_sum = 0.0;

    for (int t = 0; t < cfg_.max_decisions; ++t) {
        const int a_idx = select_action(
            net_, std::span<const double>(s.data(), s.size()), eff_epsilon, rng);
        const HighLevelAction a = HighLevelAction::from_index(a_idx);

        HighLevelAction a_exec = a;
        bool rule_overrode = false;
        if (filter == FilterChoice::rule) {
            const rules::FilterInput in = pilot.rule_input();
            const rules::FilterResult fr = rules::filter_action(a, in, rule_cfg_);
            if (fr.abort_lane_change) pilot.abort_lane_change();
            a_exec = fr.action;
            rule_overrode = fr.overridden;
        }

        const VehiclePilot::DecisionResult dr = pilot.run_decision(
            a_exec, filter, cfg_.decision_ticks, cfg_.tick_dt, sink);

        stats.decisions++;
        stats.min_active_h = std::min(stats.min_active_h, dr.min_active_h);
        if (dr.infeasible) stats.cbf_infeasible = true;

        const RewardContext ctx = reward_context();
        speed_sum += ctx.ego_speed;
        const std::array<double, kStateDim> s2 = normalize(env_.affordances());
        const double r_base = base_reward(ctx, cfg_.reward);

        auto to_f = [](const std::array<double, kStateDim>& v) {
            std::array<float, kStateDim> f;
            for (int i = 0; i < kStateDim; ++i) f[i] = static_cast<float>(v[i]);
            return f;
        };

        const bool learning = mode != Mode::eval;
        if (dr.collision) {
            stats.collision = true;
            stats.reward_sum += cfg_.reward.r_col;
            if (learning) {
                Transition tr;
                tr.state = to_f(s);
                tr.action = a_idx;
                tr.terminal = true;
                tr.reward = static_cast<float>(cfg_.reward.r_col);
                buffers_.push_collision(tr);
                train_step(rng, mode);
            }
            break;
        }

        const bool overrode =
            rule_overrode || (filter == FilterChoice::cbf && dr.overridden);
        if (overrode) {
            stats.overrides++;
        } else {
            stats.safe_actions++;
        }

        double r_decision = r_base;
        if (learning) {
            const dynamics::BicycleState& ego = env_.ego();
            if (filter == FilterChoice::rule && rule_overrode) {
                // Unsafe choice recorded with the collision reward, the
                // executed safe action credited separately.
                Transition bad;
                bad.state = to_f(s);
                bad.action = a_idx;
                bad.terminal = true;
                bad.reward = static_cast<float>(cfg_.reward.r_col);
                buffers_.push_collision(bad);

                Transition good;
                good.state = to_f(s);
                good.action = a_exec.index();
                good.next_state = to_f(s2);
                good.reward = static_cast<float>(r_base);
                buffers_.push_safe(good);
            } else if (filter == FilterChoice::cbf && dr.overridden) {
                const double r_s = safety_penalty(
                    dr.nominal, dr.safe, cfg_.reward, ctx.ego_speed, ego.heading,
                    env_cfg_.ego_params.wheelbase(), env_cfg_.lane_width);
                r_decision = r_base + r_s;
                Transition bad;
                bad.state = to_f(s);
                bad.action = a_idx;
                bad.terminal = true;
                bad.reward = static_cast<float>(r_decision);
                buffers_.push_collision(bad);

                const HighLevelAction translated = translate_action(
                    dr.safe, ctx.ego_speed, ego.heading,
                    env_cfg_.ego_params.wheelbase(), env_cfg_.lane_width);
                Transition good;
                good.state = to_f(s);
                good.action = translated.index();
                good.next_state = to_f(s2);
                good.reward = static_cast<float>(r_base);
                buffers_.push_safe(good);
            } else {
                Transition tr;
                tr.state = to_f(s);
                tr.action = a_exec.index();
                tr.next_state = to_f(s2);
                tr.reward = static_cast<float>(r_base);
                buffers_.push_safe(tr);
            }
            train_step(rng, mode);
        } else if (filter == FilterChoice::cbf && dr.overridden) {
            const dynamics::BicycleState& ego = env_.ego();
            r_decision = r_base + safety_penalty(dr.nominal, dr.safe, cfg_.reward,
                                                 ctx.ego_speed, ego.heading,
                                                 env_cfg_.ego_params.wheelbase(),
                                                 env_cfg_.lane_width);
        }

        stats.reward_sum += r_decision;
        s = s2;
    }

    stats.mean_speed = stats.decisions > 0 ? speed_sum / stats.decisions : 0.0;
    return stats;
}

}  // namespace highway::agent
