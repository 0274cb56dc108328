#include "highway/rule_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace highway::rules {

namespace {
constexpr double kClosingEps = 1e-9;

bool neighbor_ok(const Neighbor& n, const RuleFilterConfig& cfg) {
    if (!n.present) return true;
    return gap_ok(n.gap, n.closing_speed, cfg);
}
}  // namespace

bool gap_ok(double gap, double closing_speed, const RuleFilterConfig& cfg) {
    // Opening gaps earn no credit: the check reduces to gap > min_gap.
    return gap - cfg.min_time_gap * std::max(closing_speed, 0.0) > cfg.min_gap;
}

double time_to_collision(double gap, double closing_speed) {
    if (closing_speed <= kClosingEps) return std::numeric_limits<double>::infinity();
    return std::max(gap, 0.0) / closing_speed;
}

LonAction safe_longitudinal(double ttc, const RuleFilterConfig& cfg) {
    if (ttc <= cfg.ttc_hard_brake) return LonAction::hard_brake;
    if (ttc <= cfg.ttc_brake) return LonAction::brake;
    return LonAction::maintain;
}

FilterResult filter_action(const HighLevelAction& a, const FilterInput& in,
                           const RuleFilterConfig& cfg) {
    FilterResult r;
    r.action = a;

    // Rules 2 and 3: lane change validity.
    const int leftmost = in.num_lanes - 1;
    if (r.action.lat == LatAction::change_left && in.lane_change_in_progress <= 0) {
        if (in.ego_lane >= leftmost) {
            r.action.lat = LatAction::keep;
            r.overridden = true;
        } else if (!neighbor_ok(in.front_center, cfg) ||
                   !neighbor_ok(in.front_left, cfg) ||
                   !neighbor_ok(in.rear_left, cfg)) {
            r.action.lat = LatAction::keep;
            r.overridden = true;
        }
    } else if (r.action.lat == LatAction::change_right &&
               in.lane_change_in_progress >= 0) {
        if (in.ego_lane <= 0) {
            r.action.lat = LatAction::keep;
            r.overridden = true;
        } else if (!neighbor_ok(in.front_center, cfg) ||
                   !neighbor_ok(in.front_right, cfg) ||
                   !neighbor_ok(in.rear_right, cfg)) {
            r.action.lat = LatAction::keep;
            r.overridden = true;
        }
    }

    // Rule 3, continued monitoring of an in-progress maneuver. A request for
    // the opposite direction is the abort itself and passes through.
    if (in.lane_change_in_progress == +1 && r.action.lat != LatAction::change_right) {
        if (!neighbor_ok(in.front_center, cfg) || !neighbor_ok(in.front_left, cfg) ||
            !neighbor_ok(in.rear_left, cfg)) {
            r.abort_lane_change = true;
            r.overridden = true;
            r.action.lat = LatAction::keep;
        }
    } else if (in.lane_change_in_progress == -1 &&
               r.action.lat != LatAction::change_left) {
        if (!neighbor_ok(in.front_center, cfg) || !neighbor_ok(in.front_right, cfg) ||
            !neighbor_ok(in.rear_right, cfg)) {
            r.abort_lane_change = true;
            r.overridden = true;
            r.action.lat = LatAction::keep;
        }
    }

    // Rule 1: replace the longitudinal action when the gap to the preceding
    // vehicle fails and the ego is closing on it.
    if (in.front_center.present &&
        in.front_center.closing_speed > cfg.closing_deadband &&
        !gap_ok(in.front_center.gap, in.front_center.closing_speed, cfg)) {
        const double ttc =
            time_to_collision(in.front_center.gap, in.front_center.closing_speed);
        const LonAction safe = safe_longitudinal(ttc, cfg);
        if (safe != r.action.lon) {
            r.action.lon = safe;
            r.overridden = true;
        }
    }

    return r;
}

}  // namespace highway::rules
