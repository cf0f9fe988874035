#include "infant/caregiver.hpp"

#include <algorithm>
#include <stdexcept>

namespace infant {

namespace {

bool inside_room(const Vec2& p, double margin, const SimConfig& sim) {
    const double lim = sim.room_half_extent - margin;
    return std::abs(p.x) <= lim && std::abs(p.z) <= lim;
}

Vec2 clamp_room(Vec2 p, double margin, const SimConfig& sim) {
    const double lim = sim.room_half_extent - margin;
    return {std::clamp(p.x, -lim, lim), std::clamp(p.z, -lim, lim)};
}

bool infant_sees_caregiver(const WorldState& w) { return in_field_of_view(w.infant, w.caregiver.position); }

Vec2 roll_station(const WorldState& w, const CaregiverConfig& cfg, const SimConfig& sim) {
    Vec2 d = w.caregiver.position - w.infant.position;
    const double n = d.norm();
    d = n > 1e-9 ? d * (1.0 / n) : heading(w.infant.yaw);
    return clamp_room(w.infant.position + d * cfg.roll_distance, sim.caregiver_radius, sim);
}

}  // namespace

std::string_view branch_name(Branch b) {
    switch (b) {
        case Branch::Independent: return "independent";
        case Branch::Hide: return "hide";
        case Branch::Roll: return "roll";
        case Branch::Chase: return "chase";
    }
    return "?";
}

std::optional<Branch> branch_from_name(std::string_view name) {
    for (int i = 0; i < kNumBranches; ++i)
        if (branch_name(static_cast<Branch>(i)) == name) return static_cast<Branch>(i);
    return std::nullopt;
}

Branch branch_for(PointTarget t) {
    switch (t) {
        case PointTarget::Caregiver: return Branch::Hide;
        case PointTarget::PinkBall: return Branch::Roll;
        case PointTarget::GreenBall: return Branch::Chase;
    }
    return Branch::Independent;
}

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::WaitingForPoint: return "waiting";
        case Phase::Hide: return "hide";
        case Phase::Roll: return "roll";
        case Phase::Chase: return "chase";
        case Phase::Unresponsive: return "unresponsive";
    }
    return "?";
}

std::string_view subphase_name(SubPhase s) {
    switch (s) {
        case SubPhase::None: return "none";
        case SubPhase::Moving: return "moving";
        case SubPhase::Waiting: return "waiting";
        case SubPhase::Fetching: return "fetching";
        case SubPhase::Positioning: return "positioning";
        case SubPhase::AwaitGaze: return "await_gaze";
        case SubPhase::Cooldown: return "cooldown";
    }
    return "?";
}

std::string_view event_name(EventKind k) {
    switch (k) {
        case EventKind::PointDetected: return "point";
        case EventKind::BranchActivated: return "branch";
        case EventKind::HideFound: return "find";
        case EventKind::HideResample: return "resample";
        case EventKind::RollRelease: return "roll";
        case EventKind::Throw: return "throw";
        case EventKind::Hit: return "hit";
    }
    return "?";
}

bool arm_is_straight(const InfantBody& infant, const PointingConfig& cfg) {
    const auto& j = infant.joints;
    const bool left = std::abs(j[0]) <= cfg.arm_tolerance && std::abs(j[1]) <= cfg.arm_tolerance;
    const bool right = std::abs(j[2]) <= cfg.arm_tolerance && std::abs(j[3]) <= cfg.arm_tolerance;
    return left || right;
}

Vec2 point_target_position(const WorldState& world, PointTarget t) {
    switch (t) {
        case PointTarget::Caregiver: return world.caregiver.position;
        case PointTarget::PinkBall: return world.ball(BallId::Pink).position.floor();
        case PointTarget::GreenBall: return world.ball(BallId::Green).position.floor();
    }
    return {};
}

PointingResult detect_pointing(const InfantBody& infant, const WorldState& world, const PointingDetectorState& det,
                               const PointingConfig& cfg) {
    PointingResult out{det, std::nullopt};
    if (det.latched) return out;
    const bool straight = arm_is_straight(infant, cfg);
    for (int k = 0; k < kNumPointTargets; ++k) {
        const auto t = static_cast<PointTarget>(k);
        const Vec2 d = point_target_position(world, t) - infant.position;
        const bool aligned = d.norm() > 1e-9 && angle_off_heading(infant.yaw, d) <= cfg.body_tolerance;
        int& c = out.state.counters[k];
        c = (straight && aligned) ? std::min(c + 1, cfg.hold_ticks) : 0;
    }
    for (int k = 0; k < kNumPointTargets; ++k) {
        if (out.state.counters[k] >= cfg.hold_ticks) {
            out.detected = static_cast<PointTarget>(k);
            out.state.latched = out.detected;
            break;
        }
    }
    return out;
}

ContingencyFlag sample_contingency(double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("contingency probability must be in [0, 1]");
    return {uniform01(rng) < p, p};
}

void CaregiverConfig::validate() const {
    if (!(hide_min_distance > 0.0 && hide_max_distance >= hide_min_distance))
        throw std::invalid_argument("caregiver: hide distances must satisfy 0 < min <= max");
    if (roll_distance <= 0.0) throw std::invalid_argument("caregiver: roll_distance must be > 0");
    if (roll_wait_ticks < 0 || chase_wait_ticks < 0) throw std::invalid_argument("caregiver: wait ticks must be >= 0");
    if (pointing.hold_ticks < 1) throw std::invalid_argument("caregiver: hold_ticks must be >= 1");
}

Vec2 sample_hide_point(const InfantBody& infant, const CaregiverConfig& cfg, const SimConfig& sim, Rng& rng) {
    const double back = infant.yaw + kPi;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double d = cfg.hide_min_distance + (cfg.hide_max_distance - cfg.hide_min_distance) * uniform01(rng);
        const double a = back + cfg.hide_half_width * (2.0 * uniform01(rng) - 1.0);
        const Vec2 p = infant.position + heading(a) * d;
        if (inside_room(p, sim.caregiver_radius, sim) && !in_field_of_view(infant, p)) return p;
    }
    // Backed into a wall: anywhere in the room out of view will do. From a
    // corner facing inward the whole room can be in view; then the point
    // furthest off the infant's heading is the best available.
    const double lim = sim.room_half_extent - sim.caregiver_radius;
    Vec2 best = infant.position - heading(infant.yaw) * cfg.hide_min_distance;
    best = clamp_room(best, sim.caregiver_radius, sim);
    double best_angle = -1.0;
    auto consider = [&](const Vec2& p) {
        const Vec2 d = p - infant.position;
        if (d.norm() < 1e-9) return;
        const double a = angle_off_heading(infant.yaw, d);
        if (a > best_angle) {
            best_angle = a;
            best = p;
        }
    };
    for (double cx : {-lim, lim})
        for (double cz : {-lim, lim}) consider({cx, cz});
    for (int attempt = 0; attempt < 256; ++attempt) {
        const Vec2 p{lim * (2.0 * uniform01(rng) - 1.0), lim * (2.0 * uniform01(rng) - 1.0)};
        if (!in_field_of_view(infant, p)) return p;
        consider(p);
    }
    return best;
}

FsmOutput fsm_step(const CaregiverFsm& fsm, const WorldState& w, const ContingencyFlag& flag,
                   std::optional<PointTarget> detection, const CaregiverConfig& cfg, const SimConfig& sim, Rng& rng) {
    FsmOutput out{fsm, {}, {}};
    CaregiverFsm& f = out.fsm;
    CaregiverCommand& cmd = out.command;
    const auto tick = static_cast<std::int32_t>(w.tick);
    auto emit = [&](EventKind k, std::uint8_t arg = 0) { out.events.push_back({tick, k, f.phase, arg}); };
    const Vec2 infant_pos = w.infant.position;
    const Vec2 cg_pos = w.caregiver.position;
    auto arrived = [&](const Vec2& p) { return (p - cg_pos).norm() <= cfg.arrive_tolerance; };

    if (!flag.responsive || f.phase == Phase::Unresponsive) {
        f.phase = Phase::Unresponsive;
        f.sub = SubPhase::None;
        cmd.look_at = infant_pos;
        return out;
    }

    if (f.phase == Phase::WaitingForPoint) {
        if (!detection) {
            cmd.look_at = infant_pos;
            return out;
        }
        const Branch b = branch_for(*detection);
        f.phase = static_cast<Phase>(static_cast<int>(b));
        emit(EventKind::BranchActivated, static_cast<std::uint8_t>(b));
        if (b == Branch::Hide) {
            f.sub = SubPhase::Moving;
            f.target = sample_hide_point(w.infant, cfg, sim, rng);
        } else {
            f.sub = SubPhase::Fetching;
        }
    }

    switch (f.phase) {
        case Phase::Hide:
            if (f.sub == SubPhase::Moving) {
                cmd.move_to = f.target;
                if (arrived(f.target)) {
                    f.sub = SubPhase::Waiting;
                    cmd.move_to.reset();
                    cmd.look_at = infant_pos;
                }
            } else {
                cmd.look_at = infant_pos;
                if (infant_sees_caregiver(w)) {
                    emit(EventKind::HideFound);
                    f.target = sample_hide_point(w.infant, cfg, sim, rng);
                    f.sub = SubPhase::Moving;
                    emit(EventKind::HideResample);
                    cmd.look_at.reset();
                    cmd.move_to = f.target;
                }
            }
            break;

        case Phase::Roll: {
            const bool holding = w.caregiver.held_ball == BallId::Pink;
            if (f.sub == SubPhase::Fetching && holding) f.sub = SubPhase::Positioning;
            if (f.sub == SubPhase::Fetching) {
                cmd.move_to = w.ball(BallId::Pink).position.floor();
                cmd.grab = BallId::Pink;
            } else if (f.sub == SubPhase::Positioning) {
                f.target = roll_station(w, cfg, sim);
                cmd.move_to = f.target;
                if (arrived(f.target)) {
                    f.sub = SubPhase::AwaitGaze;
                    cmd.move_to.reset();
                    cmd.look_at = infant_pos;
                }
            } else if (f.sub == SubPhase::AwaitGaze) {
                cmd.look_at = infant_pos;
                if (infant_sees_caregiver(w) && holding) {
                    Vec2 d = infant_pos - cg_pos;
                    const double n = d.norm();
                    d = n > 1e-9 ? d * (1.0 / n) : heading(w.caregiver.yaw);
                    cmd.release = BallRelease{lift(d * sim.roll_speed, 0.0), sim.ball_radius};
                    emit(EventKind::RollRelease);
                    f.sub = SubPhase::Cooldown;
                    f.timer = cfg.roll_wait_ticks;
                } else if (!holding) {
                    f.sub = SubPhase::Fetching;
                }
            } else {
                cmd.look_at = infant_pos;
                if (--f.timer <= 0) f.sub = SubPhase::Fetching;
            }
            break;
        }

        case Phase::Chase: {
            const bool holding = w.caregiver.held_ball == BallId::Green;
            if (f.sub == SubPhase::Fetching) {
                if (holding) {
                    const Vec2 fwd = heading(w.caregiver.yaw);
                    const double horiz = sim.throw_speed * std::cos(sim.throw_elevation);
                    const double up = sim.throw_speed * std::sin(sim.throw_elevation);
                    cmd.release = BallRelease{Vec3{fwd.x * horiz, up, fwd.z * horiz}, sim.carry_height};
                    emit(EventKind::Throw, infant_sees_caregiver(w) ? 1 : 0);
                    f.sub = SubPhase::Cooldown;
                    f.timer = cfg.chase_wait_ticks;
                } else {
                    cmd.move_to = w.ball(BallId::Green).position.floor();
                    cmd.grab = BallId::Green;
                }
            } else {
                if (--f.timer <= 0) f.sub = SubPhase::Fetching;
            }
            break;
        }

        default: break;
    }
    return out;
}

}  // namespace infant
