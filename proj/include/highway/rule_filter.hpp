#pragma once

#include <optional>

#include "highway/action.hpp"

// Short-horizon rule-based safety filter: gap and time-to-collision checks
// over the high-level action.

namespace highway::rules {

struct RuleFilterConfig {
    double min_time_gap = 1.3;      // T_min (s)
    double min_gap = 6.0;           // d_TV_min (m)
    double ttc_hard_brake = 2.0;    // T_HB (s)
    double ttc_brake = 4.0;         // T_B (s)
    double closing_deadband = 0.1;  // m/s, "ego faster" threshold
};

// d - T_min * v > d_min with v the closing speed (positive when closing).
bool gap_ok(double gap, double closing_speed, const RuleFilterConfig& cfg);

// gap / closing speed; infinite when not closing.
double time_to_collision(double gap, double closing_speed);

LonAction safe_longitudinal(double ttc, const RuleFilterConfig& cfg);

// Gap and closing speed to one neighbor, bumper to bumper. present=false
// slots always pass the checks.
struct Neighbor {
    bool present = false;
    double gap = 1e9;
    double closing_speed = 0.0;  // positive when approaching
};

struct FilterInput {
    Neighbor front_center;
    Neighbor front_left;
    Neighbor rear_left;
    Neighbor front_right;
    Neighbor rear_right;
    int ego_lane = 1;
    int num_lanes = 3;
    // Direction of an in-progress lane change (+1 left / -1 right / 0 none);
    // rule 3 keeps monitoring it each decision tick.
    int lane_change_in_progress = 0;
};

struct FilterResult {
    HighLevelAction action;
    bool overridden = false;
    bool abort_lane_change = false;
};

FilterResult filter_action(const HighLevelAction& a, const FilterInput& in,
                           const RuleFilterConfig& cfg);

}  // namespace highway::rules
