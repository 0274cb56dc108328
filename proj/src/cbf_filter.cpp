#include "highway/cbf_filter.hpp"

#include <algorithm>
#include <cmath>

namespace highway::cbf {

namespace {
using dynamics::kGravity;

constexpr double kInf = std::numeric_limits<double>::infinity();

unsigned bit(BarrierKind k) { return 1u << static_cast<unsigned>(k); }
}  // namespace

double l0x_gain(double x_t, const CbfConfig& cfg) {
    const double range = std::max(std::fabs(x_t), cfg.l0x_range_floor);
    return 2.0 * std::sqrt(cfg.l0x_level * kGravity / range);
}

BarrierEval eval_lon_barrier(const dynamics::RelativeState& rel,
                             double ego_length, double target_length,
                             const CbfConfig& cfg) {
    BarrierEval b;
    const double dx_rate =
        rel.v_t * std::cos(rel.heading_t) - rel.v_h * std::cos(rel.heading_h);
    const double bumper = cfg.d_x_min + 0.5 * ego_length + 0.5 * target_length;
    if (rel.x_t >= 0.0) {
        b.kind = BarrierKind::lon_front;
        b.h = rel.x_t - cfg.k_v * rel.v_h - bumper;
        b.hdot_const = dx_rate;
        b.hdot_alpha = -kGravity * cfg.k_v;
    } else {
        b.kind = BarrierKind::lon_rear;
        b.h = -rel.x_t - cfg.k_v * rel.v_t - bumper;
        // d/dt(-x_T) with constant target speed; consistent with the alpha
        // coefficient of the second derivative below.
        b.hdot_const = -dx_rate;
        b.hddot_alpha = kGravity * std::cos(rel.heading_h);
    }
    return b;
}

BarrierEval eval_lat_barrier(const dynamics::RelativeState& rel, bool left,
                             double bowing, const CbfConfig& cfg) {
    BarrierEval b;
    b.kind = left ? BarrierKind::lat_left : BarrierKind::lat_right;
    const double sgn = left ? -1.0 : 1.0;  // sign applied to y terms
    const double cos_h = std::cos(rel.heading_h);
    const double sin_h = std::sin(rel.heading_h);
    const double cos_t = std::cos(rel.heading_t);
    const double sin_t = std::sin(rel.heading_t);
    const double dvx = rel.v_t * cos_t - rel.v_h * cos_h;

    b.h = sgn * rel.y_t - cfg.d_y_min + bowing * rel.x_t * rel.x_t;
    b.hdot_const = sgn * (rel.v_t * sin_t - rel.v_h * sin_h) +
                   2.0 * bowing * rel.x_t * dvx;
    b.hddot_delta = (-sgn * cos_h + 2.0 * bowing * rel.x_t * sin_h) *
                    rel.v_h * rel.v_h / rel.wheelbase_h;
    b.hddot_alpha = (-sgn * sin_h - 2.0 * bowing * rel.x_t * cos_h) * kGravity;
    b.hddot_const = 2.0 * bowing * dvx * dvx;
    return b;
}

std::array<BarrierEval, 2> eval_rk_barriers(double ego_y, double ego_heading,
                                            double ego_speed, double wheelbase,
                                            const CbfConfig& cfg) {
    const double road_width = cfg.num_lanes * cfg.lane_width;
    const double steer_gain =
        ego_speed * ego_speed * std::cos(ego_heading) / wheelbase;
    std::array<BarrierEval, 2> out;
    out[0].kind = BarrierKind::rk_left;
    out[0].h = road_width - 0.5 * cfg.ego_width - ego_y;
    out[0].hdot_const = -ego_speed * ego_heading;
    out[0].hddot_delta = -steer_gain;
    out[1].kind = BarrierKind::rk_right;
    out[1].h = ego_y - 0.5 * cfg.ego_width;
    out[1].hdot_const = ego_speed * ego_heading;
    out[1].hddot_delta = steer_gain;
    return out;
}

double critical_speed(const CbfConfig& cfg) {
    return 2.0 * cfg.dec_max * std::sqrt(2.0 * cfg.d_y_min / cfg.ay_max);
}

Response arbitrate(double closing_speed, double gap, const CbfConfig& cfg) {
    if (closing_speed < 0.0) return Response::none;  // opening: nothing to do
    const double d_brake = closing_speed * closing_speed / (2.0 * cfg.dec_max);
    const double d_steer = std::sqrt(2.0 * cfg.d_y_min / cfg.ay_max) * closing_speed;
    if (gap < d_brake && gap < d_steer) return Response::both;
    return closing_speed < critical_speed(cfg) ? Response::longitudinal
                                               : Response::lateral;
}

std::vector<TargetBarriers> eval_barriers(std::span<const env::CbfTarget> targets,
                                          double alpha0, double delta0,
                                          const CbfConfig& cfg) {
    std::vector<TargetBarriers> out;
    out.reserve(targets.size());
    for (const env::CbfTarget& t : targets) {
        TargetBarriers tb;
        tb.id = t.id;
        tb.lane = t.lane;
        tb.x_t = t.rel.x_t;
        tb.y_t = t.rel.y_t;
        tb.gap = std::fabs(t.rel.x_t) - 0.5 * (cfg.ego_length + t.length);
        const double dvx = t.rel.v_h * std::cos(t.rel.heading_h) -
                           t.rel.v_t * std::cos(t.rel.heading_t);
        tb.closing = t.rel.x_t >= 0.0 ? dvx : -dvx;

        tb.lon = eval_lon_barrier(t.rel, cfg.ego_length, t.length, cfg);
        tb.lat_left = eval_lat_barrier(t.rel, true, cfg.c_b, cfg);
        tb.lat_right = eval_lat_barrier(t.rel, false, cfg.c_b, cfg);
        tb.lat_left0 = eval_lat_barrier(t.rel, true, 0.0, cfg);
        tb.lat_right0 = eval_lat_barrier(t.rel, false, 0.0, cfg);

        // Threat assessment at the nominal controls, flat lateral barrier.
        const double l0x = l0x_gain(tb.x_t, cfg);
        if (tb.x_t >= 0.0) {
            tb.threat.c_x = tb.lon.hdot_const + tb.lon.hdot_alpha * alpha0 +
                            l0x * tb.lon.h;
        } else {
            tb.threat.c_x = tb.lon.hddot_alpha * alpha0 +
                            cfg.l1_x * tb.lon.hdot_const + l0x * tb.lon.h;
        }
        const BarrierEval& lat0 = tb.y_t >= 0.0 ? tb.lat_right0 : tb.lat_left0;
        tb.threat.c_y = lat0.hddot_const + lat0.hddot_alpha * alpha0 +
                        lat0.hddot_delta * delta0 + cfg.l1_y * lat0.hdot_const +
                        cfg.l0_y * lat0.h;
        tb.threat.threat = tb.threat.c_x < 0.0 && tb.threat.c_y < 0.0;
        // Brake/steer arbitration only makes sense for targets without
        // lateral clearance; a threat the ego is merely steering towards is
        // handled by its lateral barrier.
        if (tb.threat.threat) {
            tb.response = std::fabs(tb.y_t) < cfg.d_y_min
                              ? arbitrate(tb.closing, tb.gap, cfg)
                              : Response::lateral;
        }
        out.push_back(tb);
    }
    return out;
}

BarrierSelection provisional_select(const std::vector<TargetBarriers>& targets,
                                    int ego_lane, const CbfConfig& cfg) {
    BarrierSelection sel;
    sel.active.resize(targets.size());

    // Threat-derived activations per the steer/brake arbitration.
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const TargetBarriers& t = targets[i];
        Activation& a = sel.active[i];
        switch (t.response) {
            case Response::longitudinal:
                a.lon = true;
                break;
            case Response::lateral:
                (t.y_t >= 0.0 ? a.lat_right : a.lat_left) = true;
                break;
            case Response::both:
                a.lon = true;
                (t.y_t >= 0.0 ? a.lat_right : a.lat_left) = true;
                break;
            case Response::none:
                break;
        }
    }

    // Primary obstacle: the laterally-arbitrated threat closest in x. Both
    // avoidance options are posed for it.
    double best = kInf;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const bool lateral = sel.active[i].lat_left || sel.active[i].lat_right;
        if (targets[i].threat.threat && lateral &&
            std::fabs(targets[i].x_t) < best) {
            best = std::fabs(targets[i].x_t);
            sel.primary = static_cast<int>(i);
        }
    }
    if (sel.primary >= 0) {
        sel.active[sel.primary].lat_left = true;
        sel.active[sel.primary].lat_right = true;
    }

    // Preemptive lateral barriers by lane adjacency zone. The ego-lane zone
    // covers the path ahead; a plain follower is not steered away from, and
    // a dead-centered lead has no meaningful side until relative lateral
    // motion develops (emergency evasion for it goes through the threat
    // arbitration and the dual-sided primary-obstacle programs).
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const TargetBarriers& t = targets[i];
        const int dlane = std::abs(t.lane - ego_lane);
        const double ax = std::fabs(t.x_t);
        bool in_zone = false;
        if (dlane == 0) in_zone = t.x_t >= 0.0 && std::fabs(t.y_t) >= 0.5;
        else if (dlane == 1) in_zone = ax <= cfg.preempt_adjacent * cfg.ego_length;
        else if (dlane == 2) in_zone = ax <= cfg.preempt_two_over * cfg.ego_length;
        if (!in_zone || static_cast<int>(i) == sel.primary) continue;
        Activation& a = sel.active[i];
        bool& side = t.y_t >= 0.0 ? a.lat_right : a.lat_left;
        if (!side) {
            side = true;
            a.preemptive = true;
        }
    }
    return sel;
}

void CbfFilter::update_invariant(const std::vector<ActiveBarrier>& active,
                                 SafeControl& out) {
    std::map<std::pair<int, int>, bool> next;
    for (const ActiveBarrier& b : active) {
        const auto it = episodes_.find(b.key);
        bool admissible = it != episodes_.end() ? it->second : b.in_set;
        if (!admissible && b.in_set) admissible = true;  // recovered
        // A row the applied control cannot satisfy (actuation saturation or
        // slack) is not protected; invariance resumes only after recovery.
        if (!b.enforced) admissible = false;
        next[b.key] = admissible;
        if (admissible) out.min_invariant_h = std::min(out.min_invariant_h, b.h);
    }
    episodes_ = std::move(next);
}

namespace {

// Membership in the forward-invariant set of a second-order barrier row:
// h > 0 and hdot above the fast-eigenvalue ray, so the controlled decay
// cannot undershoot through zero.
bool invariant_set_member(double h, double hdot, double l1, double l0) {
    if (h < 0.0) return false;
    const double disc = l1 * l1 - 4.0 * l0;
    const double lambda_fast = disc >= 0.0 ? (l1 + std::sqrt(disc)) / 2.0 : l1 / 2.0;
    return hdot >= -lambda_fast * h - 1e-9;
}

}  // namespace

int select_side(bool feasible_left, bool feasible_right, double cost_left,
                double cost_right, int last_side, double tie_tol) {
    if (!feasible_left && !feasible_right) return 0;
    if (!feasible_left) return -1;
    if (!feasible_right) return +1;
    if (std::fabs(cost_left - cost_right) < tie_tol) return +1;
    if (cost_left < cost_right && (last_side != -1 || cost_left < 0.5 * cost_right))
        return +1;
    if (cost_right < cost_left && (last_side != +1 || cost_right < 0.5 * cost_left))
        return -1;
    if (last_side == +1) return +1;
    if (last_side == -1) return -1;
    return +1;
}

namespace {

// One linear row in a single control u: coeff * u + rest >= 0, evaluated at
// u = u0 + correction.
struct ControlRow {
    double coeff = 0.0;
    double rest = 0.0;
    int target_idx = -1;
    BarrierKind kind = BarrierKind::lon_front;
    double h = 0.0;
};

ControlRow lateral_row(const TargetBarriers& t, bool left, double alpha0,
                       const CbfConfig& cfg) {
    const BarrierEval& b = left ? t.lat_left : t.lat_right;
    ControlRow row;
    row.coeff = b.hddot_delta;
    row.rest = b.hddot_const + b.hddot_alpha * alpha0 +
               cfg.l1_y * b.hdot_const + cfg.l0_y * b.h - cfg.lat_margin;
    row.kind = b.kind;
    row.h = b.h;
    return row;
}

ControlRow longitudinal_row(const TargetBarriers& t, const CbfConfig& cfg) {
    const BarrierEval& b = t.lon;
    ControlRow row;
    row.kind = b.kind;
    row.h = b.h;
    const double l0x = l0x_gain(t.x_t, cfg);
    if (b.kind == BarrierKind::lon_front) {
        row.coeff = b.hdot_alpha;
        row.rest = b.hdot_const + l0x * b.h;
    } else {
        row.coeff = b.hddot_alpha;
        row.rest = cfg.l1_x * b.hdot_const + l0x * b.h;
    }
    return row;
}

struct LateralOutcome {
    bool feasible = false;
    double correction = 0.0;
    double slack_rk = 0.0;
    double cost = 0.0;
};

// QP over (delta_correction, s_rk, s_sat) for one primary-obstacle side.
LateralOutcome solve_lateral_qp(const std::vector<ControlRow>& lat_rows,
                                const std::array<BarrierEval, 2>& rk,
                                double delta0, const CbfConfig& cfg) {
    // Conflict test on the pure steering rows decides feasibility.
    std::vector<double> coeffs, bounds;
    for (const ControlRow& r : lat_rows) {
        coeffs.push_back(r.coeff);
        bounds.push_back(-(r.coeff * delta0 + r.rest));
    }
    LateralOutcome out;
    if (qp::detect_conflict(coeffs, bounds)) return out;

    qp::QuadraticProgram prog;
    prog.weights = {cfg.q_steer, cfg.q_rk, cfg.q_sat};
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        prog.add_row({coeffs[i], 0.0, 0.0}, bounds[i]);
    }
    for (const BarrierEval& b : rk) {
        const double rest = cfg.l1_rk * b.hdot_const + cfg.l0_rk * b.h +
                            b.hddot_delta * delta0;
        prog.add_row({b.hddot_delta, 1.0, 0.0}, -rest);
    }
    prog.add_row({1.0, 0.0, 1.0}, cfg.steer_min - delta0);
    prog.add_row({-1.0, 0.0, 1.0}, delta0 - cfg.steer_max);

    const qp::QpSolution sol = qp::solve(prog);
    if (sol.status != qp::Status::optimal) return out;  // not reachable: slacks
    out.feasible = true;
    out.correction = sol.x[0];
    out.slack_rk = sol.x[1];
    out.cost = sol.cost;
    return out;
}

}  // namespace

SafeControl CbfFilter::filter(double alpha0, double delta0,
                              std::span<const env::CbfTarget> targets,
                              const EgoContext& ego) {
    SafeControl out;
    out.accel_g = alpha0;
    out.steer = delta0;

    std::vector<TargetBarriers> bars = eval_barriers(targets, alpha0, delta0, cfg_);
    const int ego_lane = std::clamp(
        static_cast<int>(std::floor(ego.y / cfg_.lane_width)), 0, cfg_.num_lanes - 1);
    BarrierSelection sel = provisional_select(bars, ego_lane, cfg_);
    const std::array<BarrierEval, 2> rk =
        eval_rk_barriers(ego.y, ego.heading, ego.speed, ego.wheelbase, cfg_);

    // Demote loop: on a lateral conflict, swap the lateral barrier of the
    // target with the lowest C_x for its longitudinal barrier and retry.
    auto gather_side = [&](bool left) {
        std::vector<ControlRow> rows;
        for (std::size_t i = 0; i < bars.size(); ++i) {
            const Activation& a = sel.active[i];
            const bool is_primary = static_cast<int>(i) == sel.primary;
            if (is_primary) {
                rows.push_back(lateral_row(bars[i], left, alpha0, cfg_));
                rows.back().target_idx = static_cast<int>(i);
            } else if (a.lat_left || a.lat_right) {
                rows.push_back(lateral_row(bars[i], a.lat_left, alpha0, cfg_));
                rows.back().target_idx = static_cast<int>(i);
            }
        }
        return rows;
    };
    auto side_conflicts = [&](bool left) {
        std::vector<double> coeffs, bounds;
        for (const ControlRow& r : gather_side(left)) {
            coeffs.push_back(r.coeff);
            bounds.push_back(-(r.coeff * delta0 + r.rest));
        }
        return qp::detect_conflict(coeffs, bounds);
    };

    const std::size_t max_demotions = bars.size();
    for (std::size_t round = 0; round < max_demotions; ++round) {
        if (!side_conflicts(true) && !side_conflicts(false)) break;
        int worst = -1;
        double worst_cx = kInf;
        for (std::size_t i = 0; i < bars.size(); ++i) {
            const Activation& a = sel.active[i];
            if (static_cast<int>(i) == sel.primary) continue;
            if (!(a.lat_left || a.lat_right)) continue;
            // A longitudinal barrier only protects targets the ego can brake
            // or pull clear of; a car already alongside keeps its lateral row.
            if (bars[i].gap <= 1.0) continue;
            if (bars[i].threat.c_x < worst_cx) {
                worst_cx = bars[i].threat.c_x;
                worst = static_cast<int>(i);
            }
        }
        if (worst < 0) break;  // only the primary's own rows remain
        sel.active[worst].lat_left = false;
        sel.active[worst].lat_right = false;
        sel.active[worst].lon = true;
        sel.active[worst].demoted = true;
        ++out.demotions;
    }

    // Longitudinal rows for QP_x.
    std::vector<ControlRow> lon_rows;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        if (!sel.active[i].lon) continue;
        ControlRow row = longitudinal_row(bars[i], cfg_);
        row.target_idx = static_cast<int>(i);
        lon_rows.push_back(row);
    }

    // Pass-through: every assembled row already holds at the nominal
    // controls, including road keeping and the steering envelope.
    {
        bool all_ok = true;
        for (bool left : {true, false}) {
            for (const ControlRow& r : gather_side(left)) {
                if (r.coeff * delta0 + r.rest < 0.0) all_ok = false;
            }
        }
        for (const ControlRow& r : lon_rows) {
            if (r.coeff * alpha0 + r.rest < 0.0) all_ok = false;
        }
        for (const BarrierEval& b : rk) {
            if (b.hddot_delta * delta0 + cfg_.l1_rk * b.hdot_const +
                    cfg_.l0_rk * b.h < 0.0)
                all_ok = false;
        }
        if (delta0 < cfg_.steer_min || delta0 > cfg_.steer_max) all_ok = false;
        if (all_ok) {
            out.pass_through = true;
            std::vector<ActiveBarrier> active;
            for (std::size_t i = 0; i < bars.size(); ++i) {
                const Activation& a = sel.active[i];
                if (static_cast<int>(i) == sel.primary) {
                    // No side committed yet; the better option counts.
                    out.active_mask |= bit(BarrierKind::lat_left) |
                                       bit(BarrierKind::lat_right);
                    const double better =
                        std::max(bars[i].lat_left.h, bars[i].lat_right.h);
                    out.min_active_h = std::min(out.min_active_h, better);
                    const bool use_left = bars[i].lat_left.h >= bars[i].lat_right.h;
                    const BarrierKind kind =
                        use_left ? BarrierKind::lat_left : BarrierKind::lat_right;
                    const BarrierEval& be =
                        use_left ? bars[i].lat_left : bars[i].lat_right;
                    active.push_back({{bars[i].id, static_cast<int>(kind)},
                                      better,
                                      true,
                                      invariant_set_member(be.h, be.hdot_const,
                                                           cfg_.l1_y, cfg_.l0_y)});
                } else if (a.lat_left || a.lat_right) {
                    const BarrierEval& b =
                        a.lat_left ? bars[i].lat_left : bars[i].lat_right;
                    out.active_mask |= bit(b.kind);
                    out.min_active_h = std::min(out.min_active_h, b.h);
                    active.push_back({{bars[i].id, static_cast<int>(b.kind)},
                                      b.h,
                                      true,
                                      invariant_set_member(b.h, b.hdot_const,
                                                           cfg_.l1_y, cfg_.l0_y)});
                }
            }
            for (const ControlRow& r : lon_rows) {
                out.active_mask |= bit(r.kind);
                out.min_active_h = std::min(out.min_active_h, r.h);
                const TargetBarriers& tb = bars[r.target_idx];
                const bool member =
                    r.kind == BarrierKind::lon_front
                        ? r.h >= 0.0
                        : invariant_set_member(tb.lon.h, tb.lon.hdot_const,
                                               cfg_.l1_x, l0x_gain(tb.x_t, cfg_));
                active.push_back(
                    {{tb.id, static_cast<int>(r.kind)}, r.h, true, member});
            }
            out.min_rk_h = std::min(rk[0].h, rk[1].h);
            update_invariant(active, out);
            return out;
        }
    }

    // Dual lateral QPs and final side selection.
    const std::vector<ControlRow> rows_left = gather_side(true);
    const std::vector<ControlRow> rows_right = gather_side(false);
    const LateralOutcome left = solve_lateral_qp(rows_left, rk, delta0, cfg_);
    const LateralOutcome right = solve_lateral_qp(rows_right, rk, delta0, cfg_);
    out.feasible_left = left.feasible;
    out.feasible_right = right.feasible;
    out.cost_left = left.cost;
    out.cost_right = right.cost;

    const int side = select_side(left.feasible, right.feasible, left.cost,
                                 right.cost, last_side_, cfg_.cost_tie);
    out.side = side;
    if (side == 0) {
        // Both lateral programs infeasible: max braking, keep nominal steer.
        out.lateral_infeasible = true;
        out.accel_g = -cfg_.dec_max / kGravity;
        out.accel_correction = out.accel_g - alpha0;
        out.lon_overridden = true;
        out.steer = std::clamp(delta0, cfg_.steer_min, cfg_.steer_max);
        out.steer_correction = out.steer - delta0;
        last_side_ = 0;
        out.min_rk_h = std::min(rk[0].h, rk[1].h);
        return out;
    }
    last_side_ = side;

    const LateralOutcome& chosen = side > 0 ? left : right;
    const std::vector<ControlRow>& chosen_rows = side > 0 ? rows_left : rows_right;
    out.steer_correction = chosen.correction;
    out.steer = std::clamp(delta0 + chosen.correction, cfg_.steer_min, cfg_.steer_max);
    out.lat_overridden = chosen.correction != 0.0;

    std::vector<ActiveBarrier> active;
    for (const ControlRow& r : chosen_rows) {
        out.active_mask |= bit(r.kind);
        out.min_active_h = std::min(out.min_active_h, r.h);
        const bool enforced = r.coeff * out.steer + r.rest >= -1e-6;
        const TargetBarriers& tb = bars[r.target_idx];
        const BarrierEval& be =
            r.kind == BarrierKind::lat_left ? tb.lat_left : tb.lat_right;
        const bool member = invariant_set_member(be.h, be.hdot_const, cfg_.l1_y,
                                                 cfg_.l0_y);
        active.push_back(
            {{tb.id, static_cast<int>(r.kind)}, r.h, enforced, member});
    }
    out.active_mask |= bit(BarrierKind::rk_left) | bit(BarrierKind::rk_right);
    out.min_rk_h = std::min(rk[0].h, rk[1].h);

    // QP_x: closed-form clamp of zero onto the feasible interval of the
    // acceleration correction; conflicting rear rows are dropped.
    double lower = -kInf, upper = kInf;
    auto fold_row = [&](const ControlRow& r, double& lo, double& hi) {
        // r.coeff * (alpha0 + a) + r.rest >= 0
        if (std::fabs(r.coeff) < 1e-12) return;
        const double bound = -(r.rest + r.coeff * alpha0) / r.coeff;
        if (r.coeff > 0.0) lo = std::max(lo, bound);
        else hi = std::min(hi, bound);
    };
    for (const ControlRow& r : lon_rows) fold_row(r, lower, upper);
    if (lower > upper) {
        // Front/rear conflict: rear constraints are removed.
        lower = -kInf;
        upper = kInf;
        for (const ControlRow& r : lon_rows) {
            if (r.kind == BarrierKind::lon_rear) continue;
            fold_row(r, lower, upper);
        }
    }
    double correction = 0.0;
    if (lower > 0.0) correction = lower;
    else if (upper < 0.0) correction = upper;
    const double alpha_lo = -cfg_.dec_max / kGravity;
    const double alpha_hi = cfg_.accel_max / kGravity;
    out.accel_g = std::clamp(alpha0 + correction, alpha_lo, alpha_hi);
    out.accel_correction = out.accel_g - alpha0;
    out.lon_overridden = out.accel_correction != 0.0;

    for (const ControlRow& r : lon_rows) {
        out.active_mask |= bit(r.kind);
        out.min_active_h = std::min(out.min_active_h, r.h);
        const bool enforced = r.coeff * out.accel_g + r.rest >= -1e-6;
        const TargetBarriers& tb = bars[r.target_idx];
        const bool member =
            r.kind == BarrierKind::lon_front
                ? r.h >= 0.0
                : invariant_set_member(tb.lon.h, tb.lon.hdot_const, cfg_.l1_x,
                                       l0x_gain(tb.x_t, cfg_));
        active.push_back(
            {{tb.id, static_cast<int>(r.kind)}, r.h, enforced, member});
    }
    update_invariant(active, out);
    return out;
}

}  // namespace highway::cbf
