#include "highway/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace highway::baselines {

namespace {

// Car-following acceleration from one slot, used only for lane-change
// incentive comparison.
double follow_accel(const env::TargetSlot& slot, double ego_speed,
                    double bumper_halfsum, const IdmPolicyConfig& cfg) {
    const double v0 = std::max(cfg.v_set, 1.0);
    const double free_term = 1.0 - std::pow(ego_speed / v0, 4.0);
    if (!slot.present) return cfg.idm_accel * free_term;
    const double gap = std::max(std::fabs(slot.dx) - bumper_halfsum, 0.1);
    const double closing = -slot.dvx;
    const double s_star = cfg.idm_min_gap + ego_speed * cfg.idm_headway +
                          ego_speed * closing /
                              (2.0 * std::sqrt(cfg.idm_accel * cfg.idm_decel));
    return cfg.idm_accel * (free_term - (s_star / gap) * (s_star / gap));
}

}  // namespace

HighLevelAction idm_policy(const env::AffordanceVector& av,
                           const IdmPolicyConfig& cfg, double bumper_halfsum) {
    HighLevelAction a{LonAction::maintain, LatAction::keep};
    const env::TargetSlot& lead = av.slots[env::kCenterFront];
    double ttc = std::numeric_limits<double>::infinity();
    if (lead.present) {
        const double gap = std::fabs(lead.dx) - bumper_halfsum;
        ttc = rules::time_to_collision(gap, -lead.dvx);
    }
    if (ttc <= cfg.rule.ttc_hard_brake) {
        a.lon = LonAction::hard_brake;
    } else if (ttc <= cfg.rule.ttc_brake) {
        a.lon = LonAction::brake;
    } else if (ttc > cfg.ttc_accelerate && av.ego_speed < cfg.v_set - 0.5) {
        a.lon = LonAction::accelerate;
    }
    return a;
}

HighLevelAction idm_lane_change_policy(const env::AffordanceVector& av,
                                       const IdmPolicyConfig& cfg,
                                       double bumper_halfsum, int ego_lane,
                                       int num_lanes, int lc_in_progress) {
    HighLevelAction a = idm_policy(av, cfg, bumper_halfsum);
    if (lc_in_progress != 0) return a;  // finish the maneuver first

    const double a_keep =
        follow_accel(av.slots[env::kCenterFront], av.ego_speed, bumper_halfsum, cfg);

    double best_gain = cfg.incentive_threshold;
    int best_dir = 0;
    for (int dir : {+1, -1}) {
        const int target = ego_lane + dir;
        if (target < 0 || target >= num_lanes) continue;
        const env::TargetSlot& front =
            av.slots[dir > 0 ? env::kLeftFront : env::kRightFront];
        const env::TargetSlot& rear =
            av.slots[dir > 0 ? env::kLeftRear : env::kRightRear];

        // Safety: incoming follower must not need more than the comfortable
        // emergency deceleration, and the gaps must pass the rule check.
        rules::Neighbor nf, nr;
        if (front.present) {
            nf.present = true;
            nf.gap = std::fabs(front.dx) - bumper_halfsum;
            nf.closing_speed = -front.dvx;
        }
        if (rear.present) {
            nr.present = true;
            nr.gap = std::fabs(rear.dx) - bumper_halfsum;
            nr.closing_speed = rear.dvx;
        }
        if (nf.present && !rules::gap_ok(nf.gap, nf.closing_speed, cfg.rule)) continue;
        if (nr.present && !rules::gap_ok(nr.gap, nr.closing_speed, cfg.rule)) continue;
        if (nr.present && nr.closing_speed > 0.0) {
            const double need = nr.closing_speed * nr.closing_speed /
                                (2.0 * std::max(nr.gap, 0.1));
            if (need > cfg.safe_follower_decel) continue;
        }

        const double a_target = follow_accel(front, av.ego_speed, bumper_halfsum, cfg);
        double follower_cost = 0.0;
        if (nr.present && nr.closing_speed > 0.0) {
            follower_cost = nr.closing_speed * nr.closing_speed /
                            (2.0 * std::max(nr.gap, 0.1));
        }
        const double gain = a_target - a_keep - cfg.politeness * follower_cost;
        if (gain > best_gain) {
            best_gain = gain;
            best_dir = dir;
        }
    }
    if (best_dir > 0) a.lat = LatAction::change_left;
    if (best_dir < 0) a.lat = LatAction::change_right;
    return a;
}

}  // namespace highway::baselines
