#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "highway/dynamics.hpp"

// Three-lane circular highway: spawning, IDM traffic with randomized safe
// lane changes, affordance extraction, collision detection.

namespace highway::env {

struct EnvConfig {
    int max_traffic = 30;         // N_T
    double spawn_radius = 250.0;  // m around the ego
    double lane_width = 3.8;      // m
    double loop_length = 2000.0;  // m
    double horizon = 250.0;       // sentinel distance for empty slots
    int num_lanes = 3;
    int fixed_count = -1;  // >= 0 pins the traffic count (density sweeps)

    double vehicle_length = 5.0;
    double vehicle_width = 2.0;

    // Traffic behavior.
    double traffic_speed_min = 18.0;
    double traffic_vmax_min = 22.0;
    double traffic_vmax_max = 32.0;
    double lane_change_rate = 1.0 / 60.0;  // Poisson trigger, per vehicle
    double lane_change_duration = 5.0;     // s

    // IDM parameters for traffic.
    double idm_time_headway = 1.5;
    double idm_accel = 1.5;
    double idm_decel = 2.0;
    double idm_min_gap = 2.0;
    double idm_decel_cap = 8.0;

    dynamics::VehicleParams ego_params;
    double ego_speed_init = 30.0;
    double ego_speed_cap = 40.0;  // drivetrain limit (m/s)
    int ego_lane_init = 1;

    double road_width() const { return num_lanes * lane_width; }
    double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
};

enum class Behavior { ego, traffic, scripted };

struct VehicleState {
    int id = 0;
    int lane = 0;
    double x = 0.0;
    double y = 0.0;
    double v_x = 0.0;
    double v_y = 0.0;
    double heading = 0.0;
    double length = 5.0;
    double width = 2.0;
    Behavior behavior = Behavior::traffic;
};

struct TargetSlot {
    bool present = false;
    double dx = 0.0;   // target minus ego, longitudinal (m)
    double dvx = 0.0;  // relative longitudinal velocity (m/s)
    double dy = 0.0;
    double dvy = 0.0;
    double heading = 0.0;  // target heading (CBF auxiliary)
    int id = -1;
};

// Slot order: left-front, left-rear, center-front, center-rear,
// right-front, right-rear.
enum SlotIndex {
    kLeftFront = 0, kLeftRear, kCenterFront, kCenterRear, kRightFront, kRightRear
};

struct AffordanceVector {
    std::array<TargetSlot, 6> slots;
    double ego_speed = 0.0;
    double ego_lat_pos = 0.0;
    double ego_lat_vel = 0.0;

    // The 27 agent-facing entries: 6 slots x (dx, dvx, dy, dvy) + ego triple.
    std::array<double, 27> flatten() const;
};

// Target handed to the CBF filter: relative state plus geometry.
struct CbfTarget {
    dynamics::RelativeState rel;
    double length = 5.0;
    int lane = 0;
    int id = -1;
    bool front = true;
};

struct StepEvents {
    bool collision = false;
    int collision_partner = -1;
    bool ego_lane_changed = false;  // ego crossed into a new lane index
};

struct ScriptedVehicle {
    int id = 0;
    int lane = 0;
    double gap_ahead = 0.0;  // x relative to ego (m)
    double speed = 0.0;
    bool scripted = true;  // false: give it normal traffic behavior
};

class Environment {
  public:
    Environment(const EnvConfig& cfg, std::uint64_t seed);

    // Random episode initialization; returns the spawned traffic count.
    int reset();
    // Scenario initialization with explicit placements.
    void reset_scripted(const std::vector<ScriptedVehicle>& vehicles);

    // Timed overrides for scripted vehicles.
    void script_accel(int id, double accel, double t_start, double duration);
    void script_lane_change(int id, int direction, double t);

    StepEvents step(double ego_accel_g, double ego_steer, double dt);

    AffordanceVector affordances() const;
    std::vector<CbfTarget> cbf_targets() const;
    bool collision_check() const;
    double min_edge_distance() const;

    const dynamics::BicycleState& ego() const { return ego_; }
    VehicleState ego_vehicle() const;
    int ego_lane() const;
    const std::vector<VehicleState>& traffic() const { return traffic_; }
    const EnvConfig& config() const { return cfg_; }
    double time() const { return time_; }

    double wrapped_dx(double x_from, double x_to) const;
    int lane_of(double y) const;

  private:
    struct Aux {
        double v_max = 30.0;
        bool changing = false;
        bool aborted = false;
        int target_lane = 0;
        double origin_y = 0.0;
        double progress = 0.0;
        struct AccelEvent { double t0, t1, accel; };
        std::vector<AccelEvent> accel_events;
        struct LcEvent { double t; int direction; bool fired = false; };
        std::vector<LcEvent> lc_events;
    };

    void step_traffic(double dt);
    double idm_accel_for(std::size_t i) const;
    const VehicleState* leader_of(const VehicleState& v, double* gap_out) const;
    bool traffic_lane_change_safe(std::size_t i, int target_lane) const;

    EnvConfig cfg_;
    std::mt19937_64 rng_;
    dynamics::BicycleState ego_;
    std::vector<VehicleState> traffic_;
    std::vector<Aux> aux_;
    double time_ = 0.0;
    int prev_ego_lane_ = 1;
};

// Axis-aligned rectangle overlap in the road frame.
bool rectangles_overlap(double dx, double dy, const VehicleState& a,
                        const VehicleState& b);

}  // namespace highway::env
