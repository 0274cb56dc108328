#pragma once

#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "highway/highway_env.hpp"
#include "highway/qp.hpp"

// CBF safety filter: decoupled barrier constraints for up to six targets
// plus road keeping, threat assessment, contextual steer/brake selection,
// and minimally invasive corrections via three small QPs.

namespace highway::cbf {

struct CbfConfig {
    double k_v = 1.0;      // time headway (s)
    double d_x_min = 6.0;  // min bumper gap (m)
    double d_y_min = 3.15; // min lateral center distance (m)
    double c_b = 0.0025;   // lateral barrier bowing (1/m)
    double l1_y = 7.0;
    double l0_y = 10.0;
    double l1_rk = 7.0;
    double l0_rk = 10.0;
    double l1_x = 7.0;            // rear (second-order) longitudinal rows
    double l0x_level = 0.4;       // l0_x = 2 sqrt(level * g / |x_T|)
    double l0x_range_floor = 0.5; // singularity guard on |x_T| (m)

    double dec_max = 6.0;    // m/s^2, braking authority
    double accel_max = 2.0;  // m/s^2, acceleration authority
    double ay_max = 3.0;     // m/s^2, steering authority for arbitration
    double steer_min = -0.175;
    double steer_max = 0.175;

    double preempt_adjacent = 3.0;  // car lengths
    double preempt_two_over = 2.0;  // car lengths

    double q_steer = 1.0;
    double q_rk = 1e3;
    double q_sat = 1e4;
    double cost_tie = 1e-5;

    // Robustness margin on the lateral QP rows (m/s^2): absorbs the yaw
    // response lag of the real vehicle and mild target maneuvering, which
    // the instant-steering decoupled model does not see.
    double lat_margin = 0.6;

    double lane_width = 3.8;
    int num_lanes = 3;
    double ego_length = 5.0;
    double ego_width = 2.0;
};

enum class BarrierKind {
    lon_front = 0, lon_rear, lat_left, lat_right, rk_left, rk_right
};

// One barrier with its derivatives as linear functions of the controls:
//   hdot  = hdot_const  + hdot_alpha * alpha
//   hddot = hddot_const + hddot_alpha * alpha + hddot_delta * delta
struct BarrierEval {
    BarrierKind kind = BarrierKind::lon_front;
    int target_id = -1;
    double h = 0.0;
    double hdot_const = 0.0;
    double hdot_alpha = 0.0;
    double hddot_const = 0.0;
    double hddot_alpha = 0.0;
    double hddot_delta = 0.0;
};

BarrierEval eval_lon_barrier(const dynamics::RelativeState& rel,
                             double ego_length, double target_length,
                             const CbfConfig& cfg);
BarrierEval eval_lat_barrier(const dynamics::RelativeState& rel, bool left,
                             double bowing, const CbfConfig& cfg);
// Road-keeping pair evaluated from the ego state; [0] left edge, [1] right.
std::array<BarrierEval, 2> eval_rk_barriers(double ego_y, double ego_heading,
                                            double ego_speed, double wheelbase,
                                            const CbfConfig& cfg);

double l0x_gain(double x_t, const CbfConfig& cfg);

struct ThreatEval {
    double c_x = 0.0;
    double c_y = 0.0;
    bool threat = false;  // c_x < 0 and c_y < 0
};

enum class Response { none, longitudinal, lateral, both };

// Steer/brake arbitration from closing speed and bumper gap.
Response arbitrate(double closing_speed, double gap, const CbfConfig& cfg);
double critical_speed(const CbfConfig& cfg);

// Per-target barrier bundle plus threat-assessment context.
struct TargetBarriers {
    int id = -1;
    int lane = 0;
    double x_t = 0.0, y_t = 0.0;
    double closing = 0.0;  // positive when approaching along x
    double gap = 0.0;      // bumper gap (m)
    BarrierEval lon;
    BarrierEval lat_left, lat_right;    // bowed (c_b = cfg.c_b)
    BarrierEval lat_left0, lat_right0;  // flat (c_b = 0), threat assessment
    ThreatEval threat;
    Response response = Response::none;
};

struct Activation {
    bool lon = false;
    bool lat_left = false;
    bool lat_right = false;
    bool preemptive = false;  // provenance of the lateral activation
    bool demoted = false;
};

struct BarrierSelection {
    std::vector<Activation> active;  // parallel to targets
    int primary = -1;                // index of the primary obstacle
};

std::vector<TargetBarriers> eval_barriers(std::span<const env::CbfTarget> targets,
                                          double alpha0, double delta0,
                                          const CbfConfig& cfg);

BarrierSelection provisional_select(const std::vector<TargetBarriers>& targets,
                                    int ego_lane, const CbfConfig& cfg);

struct SafeControl {
    double accel_g = 0.0;  // alpha_S
    double steer = 0.0;    // delta_S
    double accel_correction = 0.0;
    double steer_correction = 0.0;
    bool lon_overridden = false;
    bool lat_overridden = false;
    bool feasible_left = true;
    bool feasible_right = true;
    bool lateral_infeasible = false;  // both sides failed: max braking
    double cost_left = 0.0;
    double cost_right = 0.0;
    int side = 0;  // +1 left, -1 right, 0 none
    unsigned active_mask = 0;
    double min_active_h = std::numeric_limits<double>::infinity();
    // Minimum over active barriers that entered the active set inside the
    // admissible region (the forward-invariance claim applies to these; a
    // barrier can also join it later by recovering to h >= 0).
    double min_invariant_h = std::numeric_limits<double>::infinity();
    double min_rk_h = std::numeric_limits<double>::infinity();
    int demotions = 0;
    bool pass_through = false;
};

// Ego description needed beyond the relative targets.
struct EgoContext {
    double y = 0.0;
    double heading = 0.0;
    double speed = 0.0;
    double wheelbase = 2.8;
};

class CbfFilter {
  public:
    explicit CbfFilter(const CbfConfig& cfg) : cfg_(cfg) {}

    SafeControl filter(double alpha0, double delta0,
                       std::span<const env::CbfTarget> targets,
                       const EgoContext& ego);

    void reset() {
        last_side_ = 0;
        episodes_.clear();
    }
    const CbfConfig& config() const { return cfg_; }
    int last_side() const { return last_side_; }

  private:
    struct ActiveBarrier {
        std::pair<int, int> key;  // target id, barrier kind
        double h = 0.0;
        bool enforced = true;  // row holds at the applied (clamped) control
        bool in_set = false;   // inside the barrier's forward-invariant set
    };
    void update_invariant(const std::vector<ActiveBarrier>& active,
                          SafeControl& out);

    CbfConfig cfg_;
    int last_side_ = 0;  // hysteresis memory
    // Per (target id, barrier kind): whether the barrier episode counts for
    // the invariance metric.
    std::map<std::pair<int, int>, bool> episodes_;
};

// Exposed for tests: the 7-branch side choice with hysteresis.
int select_side(bool feasible_left, bool feasible_right, double cost_left,
                double cost_right, int last_side, double tie_tol);

}  // namespace highway::cbf
