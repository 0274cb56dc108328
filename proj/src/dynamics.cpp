#include "highway/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace highway::dynamics {

namespace {

bool finite(double v) { return std::isfinite(v); }

struct BicycleDeriv {
    double x, y, v_lon, v_lat, heading, yaw_rate;
};

BicycleDeriv bicycle_deriv(const BicycleState& s, const VehicleParams& p,
                           double accel_g, double steer) {
    const double v_lon = std::max(s.v_lon, kMinBicycleSpeed);
    const double speed = std::hypot(v_lon, s.v_lat);
    const double slip = std::atan2(s.v_lat, v_lon);

    const double theta_vf = std::atan((s.v_lat + p.dist_front * s.yaw_rate) / v_lon);
    const double theta_vr = std::atan((s.v_lat - p.dist_rear * s.yaw_rate) / v_lon);
    const double force_front = 2.0 * p.cornering_front * (steer - theta_vf);
    const double force_rear = 2.0 * p.cornering_rear * (-theta_vr);

    BicycleDeriv d;
    d.x = speed * std::cos(s.heading + slip);
    d.y = speed * std::sin(s.heading + slip);
    d.v_lon = kGravity * accel_g - p.drag_coeff * v_lon * v_lon -
              kGravity * std::sin(p.road_grade);
    d.v_lat = (force_front + force_rear) / p.mass - v_lon * s.yaw_rate;
    d.heading = s.yaw_rate;
    d.yaw_rate = (force_front * p.dist_front - force_rear * p.dist_rear) / p.yaw_inertia;
    return d;
}

BicycleState advance(const BicycleState& s, const BicycleDeriv& d, double h) {
    BicycleState r;
    r.x = s.x + h * d.x;
    r.y = s.y + h * d.y;
    r.v_lon = s.v_lon + h * d.v_lon;
    r.v_lat = s.v_lat + h * d.v_lat;
    r.heading = s.heading + h * d.heading;
    r.yaw_rate = s.yaw_rate + h * d.yaw_rate;
    return r;
}

}  // namespace

PointMassState step_point_mass(const PointMassState& s, double a_x, double v_y,
                               double dt, double v_max) {
    if (!finite(s.x) || !finite(s.y) || !finite(s.v_x) || !finite(a_x) ||
        !finite(v_y) || !(dt > 0.0)) {
        throw std::invalid_argument("step_point_mass: non-finite input");
    }
    PointMassState n;
    n.x = s.x + s.v_x * dt;
    n.y = s.y + v_y * dt;
    n.v_x = std::clamp(s.v_x + a_x * dt, 0.0, v_max);
    return n;
}

BicycleState step_bicycle(const BicycleState& s, const VehicleParams& p,
                          double accel_g, double steer, double dt,
                          bool* clamped) {
    BicycleState cur = s;
    if (cur.v_lon < kMinBicycleSpeed) {
        cur.v_lon = kMinBicycleSpeed;
        if (clamped) *clamped = true;
    }

    const BicycleDeriv k1 = bicycle_deriv(cur, p, accel_g, steer);
    const BicycleDeriv k2 = bicycle_deriv(advance(cur, k1, 0.5 * dt), p, accel_g, steer);
    const BicycleDeriv k3 = bicycle_deriv(advance(cur, k2, 0.5 * dt), p, accel_g, steer);
    const BicycleDeriv k4 = bicycle_deriv(advance(cur, k3, dt), p, accel_g, steer);

    BicycleState n;
    const double w = dt / 6.0;
    n.x = cur.x + w * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    n.y = cur.y + w * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    n.v_lon = cur.v_lon + w * (k1.v_lon + 2 * k2.v_lon + 2 * k3.v_lon + k4.v_lon);
    n.v_lat = cur.v_lat + w * (k1.v_lat + 2 * k2.v_lat + 2 * k3.v_lat + k4.v_lat);
    n.heading = cur.heading + w * (k1.heading + 2 * k2.heading + 2 * k3.heading + k4.heading);
    n.yaw_rate = cur.yaw_rate + w * (k1.yaw_rate + 2 * k2.yaw_rate + 2 * k3.yaw_rate + k4.yaw_rate);

    if (n.v_lon < kMinBicycleSpeed) {
        n.v_lon = kMinBicycleSpeed;
        if (clamped) *clamped = true;
    }
    return n;
}

RelativeState step_relative(const RelativeState& s, double accel_g,
                            double steer, double dt) {
    RelativeState n = s;
    n.x_t = s.x_t + dt * (s.v_t * std::cos(s.heading_t) - s.v_h * std::cos(s.heading_h));
    n.y_t = s.y_t + dt * (s.v_t * std::sin(s.heading_t) - s.v_h * std::sin(s.heading_h));
    n.v_h = s.v_h + dt * kGravity * accel_g;
    n.heading_h = s.heading_h + dt * (s.v_h / s.wheelbase_h) * steer;
    return n;
}

double SecondOrderLag::apply(double command, double dt) {
    if (!enabled_) {
        value_ = command;
        return command;
    }
    // Integrate value'' = wn^2 (u - value) - 2 zeta wn value' with small
    // internal steps to keep the response accurate at controller rates.
    const int substeps = std::max(1, static_cast<int>(std::ceil(dt * natural_freq_ * 10.0)));
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
        const double acc = natural_freq_ * natural_freq_ * (command - value_) -
                           2.0 * damping_ * natural_freq_ * rate_;
        value_ += h * rate_ + 0.5 * h * h * acc;
        rate_ += h * acc;
    }
    return value_;
}

void SecondOrderLag::reset(double value) {
    value_ = value;
    rate_ = 0.0;
}

}  // namespace highway::dynamics
