#pragma once

// Vehicle models: point mass (traffic), dynamic bicycle (ego), and the
// simplified decoupled relative model used by the barrier computations.

namespace highway::dynamics {

inline constexpr double kGravity = 9.81;  // m/s^2

struct PointMassState {
    double x = 0.0;    // longitudinal position (m)
    double y = 0.0;    // lateral position (m)
    double v_x = 0.0;  // longitudinal velocity (m/s)
};

// Euler update of the discrete double integrator. v_x is clamped to
// [0, v_max]; no reversing.
PointMassState step_point_mass(const PointMassState& s, double a_x, double v_y,
                               double dt, double v_max = 60.0);

struct VehicleParams {
    double mass = 1800.0;            // kg
    double dist_front = 1.4;         // front axle to CG (m)
    double dist_rear = 1.4;          // rear axle to CG (m)
    double yaw_inertia = 3270.0;     // kg m^2
    double cornering_front = 6.0e4;  // per-tire cornering stiffness (N/rad)
    double cornering_rear = 6.0e4;
    double length = 5.0;             // m
    double width = 2.0;              // m
    double drag_coeff = 0.0;         // decel = drag_coeff * v_lon^2
    double road_grade = 0.0;         // rad

    double wheelbase() const { return dist_front + dist_rear; }
};

struct BicycleState {
    double x = 0.0;
    double y = 0.0;
    double v_lon = 30.0;    // body-frame longitudinal velocity (m/s)
    double v_lat = 0.0;     // body-frame lateral velocity (m/s)
    double heading = 0.0;   // phi (rad)
    double yaw_rate = 0.0;  // phi_dot (rad/s)
};

// Model is singular at standstill; v_lon is clamped here.
inline constexpr double kMinBicycleSpeed = 1.0;  // m/s

// RK4 integration of the dynamic bicycle model with linear tire forces.
// accel_g is the longitudinal acceleration request in g's, steer the front
// wheel angle in rad. If clamped is non-null it is set when v_lon hit the
// lower clamp.
BicycleState step_bicycle(const BicycleState& s, const VehicleParams& p,
                          double accel_g, double steer, double dt,
                          bool* clamped = nullptr);

// Target-relative state for the simplified decoupled model. Targets are
// assumed to hold speed and heading.
struct RelativeState {
    double x_t = 0.0;          // target minus ego, longitudinal (m)
    double y_t = 0.0;          // target minus ego, lateral (m)
    double v_t = 0.0;          // target absolute speed (m/s)
    double v_h = 0.0;          // ego absolute speed (m/s)
    double heading_t = 0.0;    // target heading w.r.t. road (rad)
    double heading_h = 0.0;    // ego heading w.r.t. road (rad)
    double wheelbase_h = 2.8;  // ego wheelbase (m)
};

// Exact Euler update of the four decoupled equations.
RelativeState step_relative(const RelativeState& s, double accel_g,
                            double steer, double dt);

// Second-order actuator lag. Default-constructed lag is disabled and passes
// commands through unchanged.
class SecondOrderLag {
  public:
    SecondOrderLag() = default;
    SecondOrderLag(double natural_freq, double damping)
        : enabled_(true), natural_freq_(natural_freq), damping_(damping) {}

    double apply(double command, double dt);
    void reset(double value = 0.0);
    bool enabled() const { return enabled_; }
    double output() const { return value_; }

  private:
    bool enabled_ = false;
    double natural_freq_ = 0.0;
    double damping_ = 0.0;
    double value_ = 0.0;
    double rate_ = 0.0;
};

}  // namespace highway::dynamics
