#pragma once

#include "highway/action.hpp"
#include "highway/highway_env.hpp"
#include "highway/rule_filter.hpp"

// Model-based driving baselines for the density sweep: the TTC-threshold
// longitudinal controller with an acceleration branch, and the same with
// incentive-based lane changes.

namespace highway::baselines {

struct IdmPolicyConfig {
    rules::RuleFilterConfig rule;
    double ttc_accelerate = 6.0;  // T_A: accelerate above this TTC
    double v_set = 30.0;
    // Lane-change incentive (MOBIL-style).
    double politeness = 0.3;
    double incentive_threshold = 0.2;  // m/s^2
    double safe_follower_decel = 4.0;  // m/s^2
    double idm_accel = 1.5;
    double idm_decel = 2.0;
    double idm_headway = 1.5;
    double idm_min_gap = 2.0;
};

HighLevelAction idm_policy(const env::AffordanceVector& av,
                           const IdmPolicyConfig& cfg, double bumper_halfsum);

HighLevelAction idm_lane_change_policy(const env::AffordanceVector& av,
                                       const IdmPolicyConfig& cfg,
                                       double bumper_halfsum, int ego_lane,
                                       int num_lanes, int lc_in_progress);

}  // namespace highway::baselines
