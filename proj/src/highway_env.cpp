#include "highway/highway_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace highway::env {

namespace {
constexpr double kInternalDynamicsStep = 0.01;  // s

// Derivative of the smooth quintic 0..1 profile, used for traffic lane
// change lateral motion.
double quintic_ds(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
}  // namespace

bool rectangles_overlap(double dx, double dy, const VehicleState& a,
                        const VehicleState& b) {
    return std::fabs(dx) < 0.5 * (a.length + b.length) &&
           std::fabs(dy) < 0.5 * (a.width + b.width);
}

std::array<double, 27> AffordanceVector::flatten() const {
    std::array<double, 27> out;
    int k = 0;
    for (const TargetSlot& s : slots) {
        out[k++] = s.dx;
        out[k++] = s.dvx;
        out[k++] = s.dy;
        out[k++] = s.dvy;
    }
    out[k++] = ego_speed;
    out[k++] = ego_lat_pos;
    out[k++] = ego_lat_vel;
    return out;
}

Environment::Environment(const EnvConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {
    ego_.v_lon = cfg_.ego_speed_init;
    ego_.y = cfg_.lane_center(cfg_.ego_lane_init);
    prev_ego_lane_ = cfg_.ego_lane_init;
}

double Environment::wrapped_dx(double x_from, double x_to) const {
    double d = x_to - x_from;
    const double half = 0.5 * cfg_.loop_length;
    while (d >= half) d -= cfg_.loop_length;
    while (d < -half) d += cfg_.loop_length;
    return d;
}

int Environment::lane_of(double y) const {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg_.num_lanes; ++i) {
        const double d = std::fabs(y - cfg_.lane_center(i));
        if (d < best_dist - 1e-9) {  // ties keep the lower index
            best_dist = d;
            best = i;
        }
    }
    return best;
}

VehicleState Environment::ego_vehicle() const {
    VehicleState v;
    v.id = 0;
    v.lane = lane_of(ego_.y);
    v.x = ego_.x;
    v.y = ego_.y;
    const double speed = std::hypot(ego_.v_lon, ego_.v_lat);
    const double slip = std::atan2(ego_.v_lat, std::max(ego_.v_lon, 0.1));
    v.v_x = speed * std::cos(ego_.heading + slip);
    v.v_y = speed * std::sin(ego_.heading + slip);
    v.heading = ego_.heading;
    v.length = cfg_.ego_params.length;
    v.width = cfg_.ego_params.width;
    v.behavior = Behavior::ego;
    return v;
}

int Environment::ego_lane() const { return lane_of(ego_.y); }

int Environment::reset() {
    time_ = 0.0;
    traffic_.clear();
    aux_.clear();
    ego_ = dynamics::BicycleState{};
    ego_.x = 0.5 * cfg_.loop_length;
    ego_.y = cfg_.lane_center(cfg_.ego_lane_init);
    ego_.v_lon = cfg_.ego_speed_init;
    prev_ego_lane_ = cfg_.ego_lane_init;

    int want = cfg_.fixed_count >= 0
                   ? std::min(cfg_.fixed_count, cfg_.max_traffic)
                   : (cfg_.max_traffic > 0
                          ? std::uniform_int_distribution<int>(1, cfg_.max_traffic)(rng_)
                          : 0);

    std::uniform_real_distribution<double> pos_dist(-cfg_.spawn_radius, cfg_.spawn_radius);
    std::uniform_int_distribution<int> lane_dist(0, cfg_.num_lanes - 1);
    std::uniform_real_distribution<double> vmax_dist(cfg_.traffic_vmax_min, cfg_.traffic_vmax_max);

    const VehicleState ego_v = ego_vehicle();
    int placed = 0;
    for (int i = 0; i < want; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            VehicleState cand;
            cand.id = placed + 1;
            cand.lane = lane_dist(rng_);
            cand.y = cfg_.lane_center(cand.lane);
            double off = pos_dist(rng_);
            if (std::fabs(off) < 10.0) continue;  // keep the ego pocket clear
            cand.x = ego_.x + off;
            while (cand.x < 0.0) cand.x += cfg_.loop_length;
            while (cand.x >= cfg_.loop_length) cand.x -= cfg_.loop_length;
            const double v_max = vmax_dist(rng_);
            cand.v_x = std::uniform_real_distribution<double>(
                cfg_.traffic_speed_min, v_max)(rng_);
            cand.length = cfg_.vehicle_length;
            cand.width = cfg_.vehicle_width;
            cand.behavior = Behavior::traffic;

            // Same-lane spacing: bumper gap of at least d_x_min plus a
            // one-second headway for the rear car of each pair.
            bool clear = true;
            auto check_pair = [&](const VehicleState& other) {
                if (other.lane != cand.lane) return;
                const double d = wrapped_dx(other.x, cand.x);
                const double gap = std::fabs(d) - 0.5 * (other.length + cand.length);
                const double rear_speed = d > 0.0 ? other.v_x : cand.v_x;
                if (gap < std::max(6.0, 1.0 * rear_speed)) clear = false;
            };
            check_pair(ego_v);
            for (const VehicleState& t : traffic_) check_pair(t);
            if (!clear) continue;

            traffic_.push_back(cand);
            Aux aux;
            aux.v_max = v_max;
            aux_.push_back(aux);
            ++placed;
            ok = true;
        }
        // Placement budget exhausted: reduce the count.
    }
    return placed;
}

void Environment::reset_scripted(const std::vector<ScriptedVehicle>& vehicles) {
    time_ = 0.0;
    traffic_.clear();
    aux_.clear();
    ego_ = dynamics::BicycleState{};
    ego_.x = 0.5 * cfg_.loop_length;
    ego_.y = cfg_.lane_center(cfg_.ego_lane_init);
    ego_.v_lon = cfg_.ego_speed_init;
    prev_ego_lane_ = cfg_.ego_lane_init;

    for (const ScriptedVehicle& sv : vehicles) {
        VehicleState v;
        v.id = sv.id;
        v.lane = sv.lane;
        v.y = cfg_.lane_center(sv.lane);
        v.x = ego_.x + sv.gap_ahead;
        while (v.x < 0.0) v.x += cfg_.loop_length;
        while (v.x >= cfg_.loop_length) v.x -= cfg_.loop_length;
        v.v_x = sv.speed;
        v.length = cfg_.vehicle_length;
        v.width = cfg_.vehicle_width;
        v.behavior = sv.scripted ? Behavior::scripted : Behavior::traffic;
        traffic_.push_back(v);
        Aux aux;
        aux.v_max = std::max(sv.speed, cfg_.traffic_vmax_max);
        aux_.push_back(aux);
    }
}

void Environment::script_accel(int id, double accel, double t_start, double duration) {
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        if (traffic_[i].id == id) {
            aux_[i].accel_events.push_back({t_start, t_start + duration, accel});
        }
    }
}

void Environment::script_lane_change(int id, int direction, double t) {
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        if (traffic_[i].id == id) {
            aux_[i].lc_events.push_back({t, direction, false});
        }
    }
}

const VehicleState* Environment::leader_of(const VehicleState& v, double* gap_out) const {
    const VehicleState* best = nullptr;
    double best_dx = std::numeric_limits<double>::infinity();
    auto consider = [&](const VehicleState& other) {
        if (&other == &v) return;
        const double dy = other.y - v.y;
        if (std::fabs(dy) > 0.5 * (other.width + v.width) + 0.8) return;
        const double dx = wrapped_dx(v.x, other.x);
        if (dx <= 0.0) return;
        if (dx < best_dx) {
            best_dx = dx;
            best = &other;
        }
    };
    for (const VehicleState& t : traffic_) consider(t);
    static thread_local VehicleState ego_copy;
    ego_copy = ego_vehicle();
    consider(ego_copy);
    if (best && gap_out) *gap_out = best_dx - 0.5 * (best->length + v.length);
    return best;
}

double Environment::idm_accel_for(std::size_t i) const {
    const VehicleState& v = traffic_[i];
    const Aux& aux = aux_[i];
    const double v0 = std::max(aux.v_max, 1.0);
    double a = cfg_.idm_accel * (1.0 - std::pow(v.v_x / v0, 4.0));
    double gap = 0.0;
    const VehicleState* lead = leader_of(v, &gap);
    if (lead) {
        const double dv = v.v_x - lead->v_x;  // closing speed
        const double s_star = cfg_.idm_min_gap + v.v_x * cfg_.idm_time_headway +
                              v.v_x * dv / (2.0 * std::sqrt(cfg_.idm_accel * cfg_.idm_decel));
        const double s = std::max(gap, 0.1);
        a = cfg_.idm_accel * (1.0 - std::pow(v.v_x / v0, 4.0) -
                              (s_star / s) * (s_star / s));
    }
    return std::clamp(a, -cfg_.idm_decel_cap, cfg_.idm_accel);
}

bool Environment::traffic_lane_change_safe(std::size_t i, int target_lane) const {
    const VehicleState& v = traffic_[i];
    if (target_lane < 0 || target_lane >= cfg_.num_lanes) return false;
    const double cy = cfg_.lane_center(target_lane);
    bool safe = true;
    auto consider = [&](const VehicleState& other) {
        if (!safe || &other == &v) return;
        if (std::fabs(other.y - cy) > 0.5 * cfg_.lane_width + 0.5 &&
            std::fabs(other.y - v.y) > 0.5 * cfg_.lane_width + 0.5)
            return;
        const double dx = wrapped_dx(v.x, other.x);
        const double gap = std::fabs(dx) - 0.5 * (other.length + v.length);
        if (dx >= 0.0) {
            const double closing = v.v_x - other.v_x;
            if (gap - 1.5 * std::max(closing, 0.0) < 8.0) safe = false;
        } else {
            const double closing = other.v_x - v.v_x;
            if (gap - 1.5 * std::max(closing, 0.0) < 8.0) safe = false;
        }
    };
    for (const VehicleState& t : traffic_) consider(t);
    static thread_local VehicleState ego_copy;
    ego_copy = ego_vehicle();
    consider(ego_copy);
    return safe;
}

void Environment::step_traffic(double dt) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        VehicleState& v = traffic_[i];
        Aux& aux = aux_[i];

        double accel = 0.0;
        bool scripted_accel = false;
        if (v.behavior == Behavior::scripted) {
            for (const Aux::AccelEvent& e : aux.accel_events) {
                if (time_ >= e.t0 && time_ < e.t1) {
                    accel = e.accel;
                    scripted_accel = true;
                }
            }
            if (!scripted_accel) accel = 0.0;
        } else {
            accel = idm_accel_for(i);
        }

        // Scripted lane changes fire unconditionally at their time.
        for (Aux::LcEvent& e : aux.lc_events) {
            if (!e.fired && time_ >= e.t) {
                e.fired = true;
                const int target = v.lane + e.direction;
                if (target >= 0 && target < cfg_.num_lanes && !aux.changing) {
                    aux.changing = true;
                    aux.target_lane = target;
                    aux.origin_y = v.y;
                    aux.progress = 0.0;
                }
            }
        }

        // Random lane changes, gated by gap checks on both lanes.
        if (v.behavior == Behavior::traffic && !aux.changing &&
            uni(rng_) < cfg_.lane_change_rate * dt) {
            const int dir = uni(rng_) < 0.5 ? 1 : -1;
            const int target = v.lane + dir;
            if (traffic_lane_change_safe(i, target)) {
                aux.changing = true;
                aux.target_lane = target;
                aux.origin_y = v.y;
                aux.progress = 0.0;
            }
        }

        double v_y = 0.0;
        if (aux.changing) {
            // Keep monitoring the target lane; a merge that stops being safe
            // is folded back to the origin lane (once, to avoid dithering).
            if (v.behavior == Behavior::traffic && !aux.aborted &&
                !traffic_lane_change_safe(i, aux.target_lane)) {
                aux.aborted = true;
                aux.target_lane = lane_of(aux.origin_y);
                aux.origin_y = v.y;
                aux.progress = 0.0;
            }
            aux.progress += dt;
            const double u = std::min(aux.progress / cfg_.lane_change_duration, 1.0);
            const double cy = cfg_.lane_center(aux.target_lane);
            v_y = (cy - aux.origin_y) * quintic_ds(u) / cfg_.lane_change_duration;
            if (u >= 1.0) {
                aux.changing = false;
                aux.aborted = false;
                v.y = cy;
                v_y = 0.0;
            }
        }

        dynamics::PointMassState pm{v.x, v.y, v.v_x};
        pm = dynamics::step_point_mass(pm, accel, v_y, dt, aux.v_max);
        v.x = pm.x;
        if (v.x < 0.0) v.x += cfg_.loop_length;
        if (v.x >= cfg_.loop_length) v.x -= cfg_.loop_length;
        v.y = pm.y;
        v.v_x = pm.v_x;
        v.v_y = v_y;
        v.heading = std::atan2(v.v_y, std::max(v.v_x, 0.5));
        v.lane = lane_of(v.y);
    }
}

StepEvents Environment::step(double ego_accel_g, double ego_steer, double dt) {
    StepEvents ev;
    const int substeps = std::max(1, static_cast<int>(std::round(dt / kInternalDynamicsStep)));
    const double h = dt / substeps;
    for (int k = 0; k < substeps; ++k) {
        ego_ = dynamics::step_bicycle(ego_, cfg_.ego_params, ego_accel_g, ego_steer, h);
    }
    if (ego_.x < 0.0) ego_.x += cfg_.loop_length;
    if (ego_.x >= cfg_.loop_length) ego_.x -= cfg_.loop_length;
    ego_.v_lon = std::min(ego_.v_lon, cfg_.ego_speed_cap);
    // Keep the ego on the paved surface even under filter-less policies.
    const double y_min = 0.5 * cfg_.ego_params.width;
    const double y_max = cfg_.road_width() - 0.5 * cfg_.ego_params.width;
    if (ego_.y < y_min) { ego_.y = y_min; if (ego_.heading < 0) ego_.heading = 0; }
    if (ego_.y > y_max) { ego_.y = y_max; if (ego_.heading > 0) ego_.heading = 0; }

    step_traffic(dt);
    time_ += dt;

    const int lane_now = ego_lane();
    if (lane_now != prev_ego_lane_) {
        ev.ego_lane_changed = true;
        prev_ego_lane_ = lane_now;
    }

    const VehicleState ego_v = ego_vehicle();
    for (const VehicleState& t : traffic_) {
        const double dx = wrapped_dx(ego_v.x, t.x);
        if (rectangles_overlap(dx, t.y - ego_v.y, ego_v, t)) {
            ev.collision = true;
            ev.collision_partner = t.id;
            break;
        }
    }
    return ev;
}

bool Environment::collision_check() const {
    const VehicleState ego_v = ego_vehicle();
    for (std::size_t i = 0; i < traffic_.size(); ++i) {
        const double dx = wrapped_dx(ego_v.x, traffic_[i].x);
        if (rectangles_overlap(dx, traffic_[i].y - ego_v.y, ego_v, traffic_[i]))
            return true;
        for (std::size_t j = i + 1; j < traffic_.size(); ++j) {
            const double d = wrapped_dx(traffic_[i].x, traffic_[j].x);
            if (rectangles_overlap(d, traffic_[j].y - traffic_[i].y, traffic_[i],
                                   traffic_[j]))
                return true;
        }
    }
    return false;
}

double Environment::min_edge_distance() const {
    const VehicleState ego_v = ego_vehicle();
    double best = std::numeric_limits<double>::infinity();
    for (const VehicleState& t : traffic_) {
        const double dx = std::fabs(wrapped_dx(ego_v.x, t.x));
        const double dy = std::fabs(t.y - ego_v.y);
        const double gx = std::max(0.0, dx - 0.5 * (t.length + ego_v.length));
        const double gy = std::max(0.0, dy - 0.5 * (t.width + ego_v.width));
        best = std::min(best, std::hypot(gx, gy));
    }
    return best;
}

AffordanceVector Environment::affordances() const {
    AffordanceVector av;
    const VehicleState ego_v = ego_vehicle();
    av.ego_speed = ego_v.v_x;
    av.ego_lat_pos = ego_v.y;
    av.ego_lat_vel = ego_v.v_y;

    const int lane = lane_of(ego_v.y);
    for (int rel = 0; rel < 3; ++rel) {
        const int lane_idx = lane + 1 - rel;  // rel 0: left, 1: center, 2: right
        TargetSlot front, rear;
        const double lane_dy =
            (lane_idx >= 0 && lane_idx < cfg_.num_lanes)
                ? cfg_.lane_center(lane_idx) - ego_v.y
                : (1 - rel) * cfg_.lane_width;
        front.dx = cfg_.horizon;
        front.dy = lane_dy;
        rear.dx = -cfg_.horizon;
        rear.dy = lane_dy;

        if (lane_idx >= 0 && lane_idx < cfg_.num_lanes) {
            double best_front = std::numeric_limits<double>::infinity();
            double best_rear = std::numeric_limits<double>::infinity();
            for (const VehicleState& t : traffic_) {
                if (t.lane != lane_idx) continue;
                const double dx = wrapped_dx(ego_v.x, t.x);
                if (std::fabs(dx) > cfg_.horizon) continue;
                const bool is_front = dx >= 0.0;
                double& best = is_front ? best_front : best_rear;
                TargetSlot& slot = is_front ? front : rear;
                const double adx = std::fabs(dx);
                if (adx < best || (adx == best && t.id < slot.id)) {
                    best = adx;
                    slot.present = true;
                    slot.dx = dx;
                    slot.dvx = t.v_x - ego_v.v_x;
                    slot.dy = t.y - ego_v.y;
                    slot.dvy = t.v_y - ego_v.v_y;
                    slot.heading = t.heading;
                    slot.id = t.id;
                }
            }
        }
        av.slots[2 * rel] = front;
        av.slots[2 * rel + 1] = rear;
    }
    return av;
}

std::vector<CbfTarget> Environment::cbf_targets() const {
    std::vector<CbfTarget> out;
    const VehicleState ego_v = ego_vehicle();
    const double ego_speed = std::hypot(ego_v.v_x, ego_v.v_y);
    // The decoupled-model heading is the direction of travel; for the
    // bicycle ego that is the course angle (heading plus slip).
    const double ego_course = std::atan2(ego_v.v_y, std::max(ego_v.v_x, 0.5));
    for (int lane_idx = 0; lane_idx < cfg_.num_lanes; ++lane_idx) {
        const VehicleState* front = nullptr;
        const VehicleState* rear = nullptr;
        double best_front = std::numeric_limits<double>::infinity();
        double best_rear = std::numeric_limits<double>::infinity();
        double front_dx = 0.0, rear_dx = 0.0;
        for (const VehicleState& t : traffic_) {
            if (t.lane != lane_idx) continue;
            const double dx = wrapped_dx(ego_v.x, t.x);
            if (std::fabs(dx) > cfg_.horizon) continue;
            if (dx >= 0.0 && dx < best_front) {
                best_front = dx;
                front = &t;
                front_dx = dx;
            } else if (dx < 0.0 && -dx < best_rear) {
                best_rear = -dx;
                rear = &t;
                rear_dx = dx;
            }
        }
        auto push = [&](const VehicleState* t, double dx, bool is_front) {
            if (!t) return;
            CbfTarget c;
            c.rel.x_t = dx;
            c.rel.y_t = t->y - ego_v.y;
            c.rel.v_t = std::hypot(t->v_x, t->v_y);
            c.rel.v_h = ego_speed;
            c.rel.heading_t = t->heading;
            c.rel.heading_h = ego_course;
            c.rel.wheelbase_h = cfg_.ego_params.wheelbase();
            c.length = t->length;
            c.lane = t->lane;
            c.id = t->id;
            c.front = is_front;
            out.push_back(c);
        };
        push(front, front_dx, true);
        push(rear, rear_dx, false);
    }
    return out;
}

}  // namespace highway::env
