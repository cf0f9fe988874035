#include "infant/sim.hpp"

#include <algorithm>
#include <string>

namespace infant {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("SimConfig: ") + what);
}

Vec2 clamp_to_room(Vec2 p, double margin, const SimConfig& cfg) {
    const double lim = cfg.room_half_extent - margin;
    p.x = std::clamp(p.x, -lim, lim);
    p.z = std::clamp(p.z, -lim, lim);
    return p;
}

Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b, double* t_out) {
    const Vec3 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    if (t_out) *t_out = t;
    return a + ab * t;
}

// Pushes the ball out of a kinematic collider and reflects the relative normal
// velocity. Returns true if the ball overlapped the collider.
bool resolve_contact(BallState& ball, const Vec3& closest, double collider_radius, const Vec3& contact_velocity,
                     const Vec3& fallback_normal, const SimConfig& cfg) {
    const Vec3 d = ball.position - closest;
    const double dist = d.norm();
    const double reach = cfg.ball_radius + collider_radius;
    if (dist >= reach) return false;
    const Vec3 n = dist > 1e-12 ? d * (1.0 / dist) : fallback_normal;
    ball.position = closest + n * reach;
    const double vn = (ball.velocity - contact_velocity).dot(n);
    if (vn < 0.0) ball.velocity -= n * ((1.0 + cfg.restitution) * vn);
    return true;
}

void contain_ball(BallState& ball, const SimConfig& cfg) {
    const double lim = cfg.room_half_extent - cfg.ball_radius;
    auto wall = [&](double& p, double& v) {
        if (p > lim) {
            p = lim;
            if (v > 0.0) v = -cfg.restitution * v;
        } else if (p < -lim) {
            p = -lim;
            if (v < 0.0) v = -cfg.restitution * v;
        }
    };
    wall(ball.position.x, ball.velocity.x);
    wall(ball.position.z, ball.velocity.z);
    if (ball.position.y < cfg.ball_radius) {
        ball.position.y = cfg.ball_radius;
        if (ball.velocity.y < 0.0) ball.velocity.y = 0.0;
    }
}

void integrate_free_ball(BallState& ball, const SimConfig& cfg) {
    const double r = cfg.ball_radius;
    const bool grounded = ball.position.y <= r + 1e-9 && ball.velocity.y <= 0.0;
    if (grounded) {
        ball.velocity.y = 0.0;
        const double keep = std::max(0.0, 1.0 - cfg.rolling_friction * cfg.dt);
        ball.velocity.x *= keep;
        ball.velocity.z *= keep;
    } else {
        ball.velocity.y -= cfg.gravity * cfg.dt;
    }
    ball.position += ball.velocity * cfg.dt;
    if (ball.position.y < r) {
        ball.position.y = r;
        const double incoming = -ball.velocity.y;
        ball.velocity.y = incoming > cfg.bounce_threshold ? cfg.restitution * incoming : 0.0;
    }
    const double lim = cfg.room_half_extent - r;
    auto wall = [&](double& p, double& v) {
        if (p > lim) {
            p = lim;
            if (v > 0.0) v = -cfg.restitution * v;
        } else if (p < -lim) {
            p = -lim;
            if (v < 0.0) v = -cfg.restitution * v;
        }
    };
    wall(ball.position.x, ball.velocity.x);
    wall(ball.position.z, ball.velocity.z);
}

void collide_balls(BallState& a, BallState& b, const SimConfig& cfg) {
    const Vec3 d = b.position - a.position;
    const double dist = d.norm();
    const double reach = 2.0 * cfg.ball_radius;
    if (dist >= reach) return;
    const Vec3 n = dist > 1e-12 ? d * (1.0 / dist) : Vec3{1.0, 0.0, 0.0};
    const double overlap = reach - dist;
    a.position -= n * (0.5 * overlap);
    b.position += n * (0.5 * overlap);
    const double va = a.velocity.dot(n);
    const double vb = b.velocity.dot(n);
    if (va - vb > 0.0) {
        // Equal masses, elastic: the normal components swap.
        a.velocity += n * (vb - va);
        b.velocity += n * (va - vb);
    }
    contain_ball(a, cfg);
    contain_ball(b, cfg);
}

double kinetic(const BallState& b) { return 0.5 * b.velocity.dot(b.velocity); }

void check_finite(const WorldState& s) {
    bool ok = finite(s.infant.position) && std::isfinite(s.infant.yaw) && finite(s.caregiver.position) &&
              std::isfinite(s.caregiver.yaw);
    for (double j : s.infant.joints) ok = ok && std::isfinite(j);
    for (const auto& b : s.balls) ok = ok && finite(b.position) && finite(b.velocity);
    if (!ok) throw SimError("step_physics: non-finite state at tick " + std::to_string(s.tick));
}

}  // namespace

void SimConfig::validate() const {
    require(dt > 0.0, "dt must be > 0");
    require(room_half_extent > 0.0, "room_half_extent must be > 0");
    require(ball_radius > 0.0 && arm_upper_len > 0.0 && arm_fore_len > 0.0 && arm_radius > 0.0,
            "lengths must be > 0");
    require(infant_radius > 0.0 && caregiver_radius > 0.0, "body radii must be > 0");
    require(restitution >= 0.0 && restitution <= 1.0, "restitution must be in [0,1]");
    require(rolling_friction >= 0.0, "rolling_friction must be >= 0");
    require(gravity >= 0.0, "gravity must be >= 0");
    require(joint_limit > 0.0 && joint_limit <= kPi, "joint_limit must be in (0, pi]");
    require(episode_ticks > 0, "episode_ticks must be > 0");
    require(room_half_extent > ball_start_lateral + ball_radius &&
                room_half_extent > caregiver_start_distance + caregiver_radius,
            "start layout must fit in the room");
    for (double j : infant_start_joints) require(std::abs(j) <= joint_limit, "start joints must be within limits");
}

ArmPolylines arm_kinematics(const InfantBody& body, const SimConfig& cfg) {
    const double h = cfg.ball_radius;
    auto arm = [&](double side, double shoulder, double elbow) {
        const Vec2 s = body.position + left_of(body.yaw) * (side * cfg.shoulder_offset);
        const Vec2 e = s + heading(body.yaw + shoulder) * cfg.arm_upper_len;
        const Vec2 w = e + heading(body.yaw + shoulder + elbow) * cfg.arm_fore_len;
        return ArmPolyline{lift(s, h), lift(e, h), lift(w, h)};
    };
    return {arm(1.0, body.joints[0], body.joints[1]), arm(-1.0, body.joints[2], body.joints[3])};
}

double distance_point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    return (p - closest_on_segment(p, a, b, nullptr)).norm();
}

double min_arm_distance(const ArmPolyline& arm, const Vec3& p) {
    return std::min(distance_point_segment(p, arm[0], arm[1]), distance_point_segment(p, arm[1], arm[2]));
}

Vec3 carry_point(const CaregiverBody& cg, const SimConfig& cfg) {
    const Vec2 p = cg.position + heading(cg.yaw) * (cfg.caregiver_radius + cfg.ball_radius);
    return lift(clamp_to_room(p, cfg.ball_radius, cfg), cfg.carry_height);
}

double ball_energy(const WorldState& state, const SimConfig& cfg) {
    double e = 0.0;
    for (const auto& b : state.balls) {
        if (b.held_by) continue;
        e += kinetic(b) + cfg.gravity * b.position.y;
    }
    return e;
}

WorldState reset(const SimConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    WorldState s;
    s.tick = 0;
    s.rng = Rng(seed);
    s.infant.position = {0.0, 0.0};
    s.infant.yaw = 0.0;
    s.infant.joints = cfg.infant_start_joints;
    s.caregiver.position = {0.0, cfg.caregiver_start_distance};
    s.caregiver.yaw = kPi;
    s.balls[0] = BallState{BallId::Pink, {cfg.ball_start_lateral, cfg.ball_radius, cfg.ball_start_forward}, {}, {}};
    s.balls[1] = BallState{BallId::Green, {-cfg.ball_start_lateral, cfg.ball_radius, cfg.ball_start_forward}, {}, {}};
    return s;
}

WorldState step_physics(const WorldState& state, const BodyIntent& intent, const CaregiverCommand& cmd,
                        const SimConfig& cfg) {
    WorldState next = state;
    next.tick = state.tick + 1;
    const ArmPolylines old_arms = arm_kinematics(state.infant, cfg);

    // Infant body.
    InfantBody& inf = next.infant;
    inf.yaw = wrap_angle(inf.yaw + intent.yaw_delta);
    for (int j = 0; j < 4; ++j)
        inf.joints[j] = std::clamp(inf.joints[j] + intent.joint_deltas[j], -cfg.joint_limit, cfg.joint_limit);
    const Vec2 move = heading(inf.yaw) * intent.translation.z + left_of(inf.yaw) * intent.translation.x;
    inf.position = clamp_to_room(inf.position + move, cfg.infant_radius, cfg);

    // Caregiver body: straight-line pursuit, instant turning.
    CaregiverBody& cg = next.caregiver;
    if (cmd.move_to) {
        const Vec2 target = clamp_to_room(*cmd.move_to, cfg.caregiver_radius, cfg);
        const Vec2 d = target - cg.position;
        const double dist = d.norm();
        if (dist > 1e-12) {
            const double step = std::min(cfg.caregiver_move_speed * cfg.dt, dist);
            cg.position = clamp_to_room(cg.position + d * (step / dist), cfg.caregiver_radius, cfg);
            if (!cmd.look_at) cg.yaw = yaw_towards(d);
        }
    }
    if (cmd.look_at) {
        const Vec2 d = *cmd.look_at - cg.position;
        if (d.norm() > 1e-12) cg.yaw = yaw_towards(d);
    }

    // Bodies do not interpenetrate; the infant yields first.
    {
        const Vec2 d = inf.position - cg.position;
        const double dist = d.norm();
        const double reach = cfg.infant_radius + cfg.caregiver_radius;
        if (dist < reach) {
            const Vec2 n = dist > 1e-12 ? d * (1.0 / dist) : heading(cg.yaw);
            inf.position = clamp_to_room(cg.position + n * reach, cfg.infant_radius, cfg);
            const Vec2 d2 = inf.position - cg.position;
            const double dist2 = d2.norm();
            if (dist2 < reach) {
                const Vec2 n2 = dist2 > 1e-12 ? d2 * (1.0 / dist2) : n;
                cg.position = clamp_to_room(inf.position - n2 * reach, cfg.caregiver_radius, cfg);
            }
        }
    }
    inf.velocity = (inf.position - state.infant.position) * (1.0 / cfg.dt);
    cg.velocity = (cg.position - state.caregiver.position) * (1.0 / cfg.dt);

    // Grasping.
    if (cmd.release && cg.held_ball) {
        BallState& b = next.ball(*cg.held_ball);
        b.held_by.reset();
        Vec3 p = carry_point(cg, cfg);
        p.y = std::max(cmd.release->height, cfg.ball_radius);
        b.position = p;
        b.velocity = cmd.release->velocity;
        cg.held_ball.reset();
    }
    if (cmd.grab && !cg.held_ball) {
        BallState& b = next.ball(*cmd.grab);
        const double gap = (b.position.floor() - cg.position).norm() - cfg.caregiver_radius - cfg.ball_radius;
        if (!b.held_by && gap <= cfg.pickup_radius) {
            b.held_by = Holder::Caregiver;
            cg.held_ball = b.id;
        }
    }
    for (auto& b : next.balls) {
        if (b.held_by) {
            b.position = carry_point(cg, cfg);
            b.velocity = {};
        }
    }

    // Passive ball dynamics, followed by an energy guard: discrete floor
    // contact must never inject energy.
    const double e_before = ball_energy(next, cfg);
    for (auto& b : next.balls)
        if (!b.held_by) integrate_free_ball(b, cfg);
    if (!next.balls[0].held_by && !next.balls[1].held_by) collide_balls(next.balls[0], next.balls[1], cfg);
    {
        double ke = 0.0, pe = 0.0;
        for (const auto& b : next.balls) {
            if (b.held_by) continue;
            ke += kinetic(b);
            pe += cfg.gravity * b.position.y;
        }
        if (ke + pe > e_before && ke > 0.0) {
            const double scale = std::sqrt(std::max(0.0, e_before - pe) / ke);
            for (auto& b : next.balls)
                if (!b.held_by) b.velocity = b.velocity * scale;
        }
    }

    // Kinematic contacts: bodies, then arms.
    const ArmPolylines arms = arm_kinematics(inf, cfg);
    const bool colliders_static = inf.velocity == Vec2{} && cg.velocity == Vec2{} && arms.left == old_arms.left &&
                                  arms.right == old_arms.right;
    const double e_contact = ball_energy(next, cfg);
    std::array<bool, 2> touched{false, false};
    for (auto& b : next.balls) {
        if (b.held_by) continue;
        resolve_contact(b, lift(inf.position, b.position.y), cfg.infant_radius, lift(inf.velocity, 0.0),
                        lift(heading(inf.yaw), 0.0), cfg);
        resolve_contact(b, lift(cg.position, b.position.y), cfg.caregiver_radius, lift(cg.velocity, 0.0),
                        lift(heading(cg.yaw), 0.0), cfg);
        for (int side = 0; side < 2; ++side) {
            const ArmPolyline& now = arms[side];
            const ArmPolyline& before = old_arms[side];
            double best = 1e300;
            Vec3 cp, vel;
            for (int seg = 0; seg < 2; ++seg) {
                double t = 0.0;
                const Vec3 c = closest_on_segment(b.position, now[seg], now[seg + 1], &t);
                const double dist = (b.position - c).norm();
                if (dist < best) {
                    best = dist;
                    cp = c;
                    const Vec3 prev = before[seg] + (before[seg + 1] - before[seg]) * t;
                    vel = (c - prev) * (1.0 / cfg.dt);
                }
            }
            const Vec3 outward = lift(left_of(inf.yaw) * (side == 0 ? 1.0 : -1.0), 0.0);
            if (resolve_contact(b, cp, cfg.arm_radius, vel, outward, cfg)) touched[side] = true;
        }
        contain_ball(b, cfg);
    }
    if (colliders_static) {
        // Push-out from a resting collider may lift a ball; pay for it from kinetic energy.
        double ke = 0.0, pe = 0.0;
        for (const auto& b : next.balls) {
            if (b.held_by) continue;
            ke += kinetic(b);
            pe += cfg.gravity * b.position.y;
        }
        if (ke + pe > e_contact && ke > 0.0) {
            const double scale = std::sqrt(std::max(0.0, e_contact - pe) / ke);
            for (auto& b : next.balls)
                if (!b.held_by) b.velocity = b.velocity * scale;
        }
    }
    for (int side = 0; side < 2; ++side) {
        bool hit = false;
        if (touched[side]) {
            for (const auto& b : next.balls) {
                if (b.held_by) continue;
                if (min_arm_distance(arms[side], b.position) <= cfg.ball_radius + cfg.arm_radius + 1e-9) hit = true;
            }
        }
        inf.hit_sensors[side] = hit;
    }

    check_finite(next);
    return next;
}

}  // namespace infant
