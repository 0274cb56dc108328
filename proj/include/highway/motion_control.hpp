#pragma once

#include <optional>
#include <span>
#include <vector>

#include "highway/action.hpp"

// Longitudinal ACC and the unified lane-centering / lane-change lateral
// controller with calibrated gains and comfort limits.

namespace highway::motion {

struct RoadState {
    double path_offset = 0.0;     // e_y (m), path relative to vehicle
    double heading_offset = 0.0;  // e_psi (rad)
    double curvature = 0.0;       // road curvature (1/m)
    double curvature_rate = 0.0;  // (1/m^2)
    double arc_pos = 0.0;         // s (m)
};

struct LateralGains {
    double k_ff = 1.0;
    double preview_time = 0.2;  // s
    double k_y = 0.0;           // 1/m per m
    double k_psi = 0.0;         // 1/m per rad
    double damping = 0.8;       // zeta
    double response_time = 3.0; // T_r (s)
};

// Gains that place the closed-loop poles at natural frequency 4.3*zeta/T_r
// with the requested damping.
LateralGains gains_from_spec(double damping, double response_time, double v_x);

// Path polynomial a0 + a1 x + a2 x^2 + a3 x^3 read as road state under the
// small-heading assumption.
RoadState poly_to_road_state(double a0, double a1, double a2, double a3);

// Quintic-profile comfort limits for a lateral shift y_f completed in t_f.
double quintic_peak_accel(double y_f, double t_f);  // 5.77 y_f / t_f^2
double quintic_peak_jerk(double y_f, double t_f);   // 60 y_f / t_f^3

struct AccConfig {
    double v_set = 30.0;          // m/s
    double standstill_gap = 6.0;  // R0 (m)
    double time_gap = 1.3;        // tau (s)
    double k_speed = 0.5;         // 1/s
    double k_range = 0.1;         // 1/s^2
    double k_range_rate = 0.6;    // 1/s
    double accel_min = -4.0;      // m/s^2
    double accel_max = 2.0;       // m/s^2
};

struct Lead {
    double range = 0.0;       // bumper-to-bumper gap (m)
    double range_rate = 0.0;  // d(range)/dt (m/s)
};

// Minimum of speed mode and one follow mode per lead, saturated.
double acc_command(const AccConfig& cfg, double v_x, std::span<const Lead> leads);

// Rate/amplitude limiter memory for the feedback part of one controller.
struct FeedbackLimiter {
    bool primed = false;
    double previous = 0.0;
};

// Generic control law: feedforward on road curvature plus limited state
// feedback. Amplitude limit |fb| <= ay_max/Vx^2, rate limit j_max/Vx^2.
double lateral_command(const LateralGains& g, const RoadState& rs, double v_x,
                       double ay_max, double jerk_max, double dt,
                       FeedbackLimiter* limiter);

double curvature_to_steer(double curvature, double wheelbase,
                          double understeer_gradient, double v_x);

// Per-ego lateral controller: holds the lane set-point, schedules gains for
// centering vs. lane change, and applies the comfort limits to the feedback
// term only.
class LateralController {
  public:
    struct Config {
        double lane_width = 3.8;
        double damping_centering = 0.8;
        double response_centering = 3.0;    // s
        double damping_lane_change = 0.75;
        double lane_change_duration = 5.0;  // s
        double preview_time = 0.2;
        double k_ff = 1.0;
        double road_width = 3.0 * 3.8;
        bool comfort_limits = true;  // quintic-derived amplitude/rate limits
    };

    explicit LateralController(const Config& cfg, double initial_center_y);

    // Steps the set-point one lane over. Returns false and leaves the
    // set-point unchanged when the requested lane is off the road.
    bool initiate_lane_change(int direction);
    // Restores the origin-lane set-point at any point of the maneuver.
    void abort_lane_change();
    void force_setpoint(double y);

    // Curvature command from current lateral state; dt is the control period.
    double command(double ego_y, double ego_heading, double v_x, double dt);

    bool lane_change_active() const { return lane_change_active_; }
    int lane_change_direction() const { return lane_change_direction_; }
    double setpoint() const { return setpoint_; }
    double elapsed() const { return elapsed_; }
    // True once the offset to the target center is within the nominal
    // centering band (0.2 m).
    bool maneuver_settled(double ego_y) const;

  private:
    Config cfg_;
    double setpoint_;
    double origin_setpoint_;
    bool lane_change_active_ = false;
    int lane_change_direction_ = 0;
    double elapsed_ = 0.0;
    FeedbackLimiter limiter_;
};

// Executes a HighLevelAction as continuous controls at the 10 Hz rate.
class MotionController {
  public:
    struct Config {
        AccConfig acc;
        LateralController::Config lateral;
        double wheelbase = 2.8;
        double understeer_gradient = 0.002;  // rad s^2 / m
        double vehicle_length = 5.0;
    };

    MotionController(const Config& cfg, double initial_center_y);

    // Applies a decision (1 Hz): sets the longitudinal mode and starts,
    // continues, or aborts lane changes. Returns false if a requested lane
    // change was rejected as off-road.
    bool decide(const HighLevelAction& a);

    struct Controls {
        double accel_g = 0.0;  // alpha_0
        double steer = 0.0;    // delta_0 (rad)
        double curvature_cmd = 0.0;
    };

    // leads: current-lane lead first; during the first phase of a lane
    // change the target-lane lead is appended by the caller.
    Controls tick(double ego_y, double ego_heading, double v_x,
                  std::span<const Lead> leads, double dt);

    const LateralController& lateral() const { return lateral_; }
    LateralController& lateral() { return lateral_; }
    LonAction lon_mode() const { return lon_mode_; }
    // Phase 1 of a lane change: set-point stepped but vehicle has not yet
    // crossed into the target lane.
    bool lane_change_phase1(double ego_y) const;

  private:
    Config cfg_;
    LateralController lateral_;
    LonAction lon_mode_ = LonAction::maintain;
};

}  // namespace highway::motion
