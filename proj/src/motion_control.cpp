#include "highway/motion_control.hpp"

#include <algorithm>
#include <cmath>

#include "highway/dynamics.hpp"

namespace highway::motion {

namespace {
// Gain scheduling floor: K_y, K_psi grow as 1/V^2 and 1/V, so commands from
// the highway-tuned law diverge near standstill. Schedule as if moving.
constexpr double kMinSpeed = 8.0;  // m/s
}

LateralGains gains_from_spec(double damping, double response_time, double v_x) {
    const double v = std::max(v_x, kMinSpeed);
    const double wn = 4.3 * damping / response_time;
    LateralGains g;
    g.k_y = wn * wn / (v * v);
    g.k_psi = 2.0 * damping * wn / v;
    g.damping = damping;
    g.response_time = response_time;
    return g;
}

RoadState poly_to_road_state(double a0, double a1, double a2, double a3) {
    RoadState rs;
    rs.path_offset = a0;
    rs.heading_offset = a1;
    rs.curvature = 2.0 * a2;
    rs.curvature_rate = 6.0 * a3;
    return rs;
}

double quintic_peak_accel(double y_f, double t_f) {
    return 5.77 * y_f / (t_f * t_f);
}

double quintic_peak_jerk(double y_f, double t_f) {
    return 60.0 * y_f / (t_f * t_f * t_f);
}

double acc_command(const AccConfig& cfg, double v_x, std::span<const Lead> leads) {
    double cmd = cfg.k_speed * (cfg.v_set - v_x);
    for (const Lead& lead : leads) {
        const double range_set = cfg.standstill_gap + cfg.time_gap * v_x;
        const double follow = cfg.k_range * (lead.range - range_set) +
                              cfg.k_range_rate * lead.range_rate;
        cmd = std::min(cmd, follow);
    }
    return std::clamp(cmd, cfg.accel_min, cfg.accel_max);
}

double lateral_command(const LateralGains& g, const RoadState& rs, double v_x,
                       double ay_max, double jerk_max, double dt,
                       FeedbackLimiter* limiter) {
    const double v = std::max(v_x, kMinSpeed);
    const double feedforward =
        g.k_ff * (rs.curvature + v * g.preview_time * rs.curvature_rate);
    double feedback = g.k_y * rs.path_offset + g.k_psi * rs.heading_offset;

    const double amp = ay_max / (v * v);
    feedback = std::clamp(feedback, -amp, amp);
    if (limiter) {
        if (limiter->primed) {
            const double step = jerk_max / (v * v) * dt;
            feedback = std::clamp(feedback, limiter->previous - step,
                                  limiter->previous + step);
        } else {
            // First sample ramps from zero so a set-point step cannot inject
            // an instantaneous feedback jump.
            const double step = jerk_max / (v * v) * dt;
            feedback = std::clamp(feedback, -step, step);
        }
        limiter->primed = true;
        limiter->previous = feedback;
    }
    return feedforward + feedback;
}

double curvature_to_steer(double curvature, double wheelbase,
                          double understeer_gradient, double v_x) {
    return curvature * (wheelbase + understeer_gradient * v_x * v_x);
}

LateralController::LateralController(const Config& cfg, double initial_center_y)
    : cfg_(cfg), setpoint_(initial_center_y), origin_setpoint_(initial_center_y) {}

bool LateralController::initiate_lane_change(int direction) {
    const double target = setpoint_ + direction * cfg_.lane_width;
    if (target < 0.0 || target > cfg_.road_width) return false;
    origin_setpoint_ = setpoint_;
    setpoint_ = target;
    lane_change_active_ = true;
    lane_change_direction_ = direction;
    elapsed_ = 0.0;
    return true;
}

void LateralController::abort_lane_change() {
    if (!lane_change_active_) return;
    setpoint_ = origin_setpoint_;
    lane_change_direction_ = -lane_change_direction_;
    elapsed_ = 0.0;
    // Still a maneuver: keep lane-change gains until settled back.
}

void LateralController::force_setpoint(double y) {
    setpoint_ = y;
    origin_setpoint_ = y;
    lane_change_active_ = false;
    lane_change_direction_ = 0;
}

bool LateralController::maneuver_settled(double ego_y) const {
    return std::fabs(setpoint_ - ego_y) <= 0.2;
}

double LateralController::command(double ego_y, double ego_heading, double v_x,
                                  double dt) {
    double damping = cfg_.damping_centering;
    double response = cfg_.response_centering;
    double shift = cfg_.lane_width;
    if (lane_change_active_) {
        damping = cfg_.damping_lane_change;
        response = cfg_.lane_change_duration;
        elapsed_ += dt;
        if (elapsed_ > cfg_.lane_change_duration && maneuver_settled(ego_y)) {
            lane_change_active_ = false;
            lane_change_direction_ = 0;
            origin_setpoint_ = setpoint_;
        }
    }
    const LateralGains base = gains_from_spec(damping, response, v_x);
    LateralGains g = base;
    g.k_ff = cfg_.k_ff;
    g.preview_time = cfg_.preview_time;

    RoadState rs;
    rs.path_offset = setpoint_ - ego_y;
    rs.heading_offset = -ego_heading;

    const double ay_max =
        cfg_.comfort_limits ? quintic_peak_accel(shift, response) : 1e9;
    const double jerk_max =
        cfg_.comfort_limits ? quintic_peak_jerk(shift, response) : 1e9;
    return lateral_command(g, rs, v_x, ay_max, jerk_max, dt, &limiter_);
}

MotionController::MotionController(const Config& cfg, double initial_center_y)
    : cfg_(cfg), lateral_(cfg.lateral, initial_center_y) {}

bool MotionController::decide(const HighLevelAction& a) {
    lon_mode_ = a.lon;
    bool ok = true;
    if (a.lat == LatAction::change_left) {
        if (lateral_.lane_change_active()) {
            if (lateral_.lane_change_direction() < 0) lateral_.abort_lane_change();
        } else {
            ok = lateral_.initiate_lane_change(+1);
        }
    } else if (a.lat == LatAction::change_right) {
        if (lateral_.lane_change_active()) {
            if (lateral_.lane_change_direction() > 0) lateral_.abort_lane_change();
        } else {
            ok = lateral_.initiate_lane_change(-1);
        }
    }
    // keep-lane leaves an in-progress maneuver running.
    return ok;
}

bool MotionController::lane_change_phase1(double ego_y) const {
    if (!lateral_.lane_change_active()) return false;
    return std::fabs(lateral_.setpoint() - ego_y) > cfg_.lateral.lane_width / 2.0;
}

MotionController::Controls MotionController::tick(double ego_y,
                                                  double ego_heading,
                                                  double v_x,
                                                  std::span<const Lead> leads,
                                                  double dt) {
    Controls out;
    double accel_ms2 = 0.0;
    switch (lon_mode_) {
        case LonAction::maintain:
            accel_ms2 = acc_command(cfg_.acc, v_x, leads);
            break;
        case LonAction::accelerate:
        case LonAction::brake:
        case LonAction::hard_brake:
            accel_ms2 = accel_level(lon_mode_);
            break;
    }
    out.accel_g = accel_ms2 / dynamics::kGravity;
    out.curvature_cmd = lateral_.command(ego_y, ego_heading, v_x, dt);
    out.steer = curvature_to_steer(out.curvature_cmd, cfg_.wheelbase,
                                   cfg_.understeer_gradient, v_x);
    return out;
}

}  // namespace highway::motion
