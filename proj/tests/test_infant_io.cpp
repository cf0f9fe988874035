#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "infant/infant_io.hpp"

using namespace infant;

namespace {

WorldState layout_with_pink_at(double angle_deg, double dist = 2.0) {
    SimConfig cfg;
    WorldState w = reset(cfg, 1);
    w.infant.position = {0.0, 0.0};
    w.infant.yaw = 0.0;
    const Vec2 p = heading(deg_to_rad(angle_deg)) * dist;
    w.balls[0].position = lift(p, cfg.ball_radius);
    w.balls[1].position = {0.0, cfg.ball_radius, -3.0};  // behind
    w.caregiver.position = {0.0, -2.0};                 // behind
    return w;
}

}  // namespace

TEST_CASE("action encoding round-trips and has 13 values") {
    for (int i = 0; i < kNumActions; ++i) {
        const auto a = action_from_int(i);
        REQUIRE(a);
        CHECK(to_int(*a) == i);
    }
    CHECK(!action_from_int(-1));
    CHECK(!action_from_int(13));
}

TEST_CASE("action_to_intent") {
    SimConfig cfg;
    CHECK(action_to_intent(Action::NoOp, cfg) == BodyIntent{});

    std::set<std::vector<double>> seen;
    for (int i = 1; i < kNumActions; ++i) {
        const BodyIntent in = action_to_intent(static_cast<Action>(i), cfg);
        CHECK(!(in == BodyIntent{}));
        seen.insert({in.yaw_delta, in.translation.x, in.translation.z, in.joint_deltas[0], in.joint_deltas[1],
                     in.joint_deltas[2], in.joint_deltas[3]});
    }
    CHECK(seen.size() == 12);

    SUBCASE("turn left then right restores yaw") {
        WorldState w = reset(cfg, 1);
        w.infant.yaw = 0.4;
        const WorldState l = step_physics(w, action_to_intent(Action::TurnLeft, cfg), {}, cfg);
        const WorldState r = step_physics(l, action_to_intent(Action::TurnRight, cfg), {}, cfg);
        CHECK(r.infant.yaw == doctest::Approx(0.4).epsilon(1e-15));
    }

    SUBCASE("forward at yaw pi/2 moves along +x") {
        WorldState w = reset(cfg, 1);
        w.caregiver.position = {0.0, 4.0};
        w.infant.yaw = kPi / 2.0;
        const WorldState n = step_physics(w, action_to_intent(Action::Forward, cfg), {}, cfg);
        CHECK(n.infant.position.x == doctest::Approx(cfg.infant_move_speed * cfg.dt));
        CHECK(n.infant.position.z == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("CCW joint actions rotate positively") {
        const BodyIntent in = action_to_intent(Action::RElbowCCW, cfg);
        CHECK(in.joint_deltas[3] == doctest::Approx(cfg.joint_rate * cfg.dt));
        CHECK(action_to_intent(Action::LShoulderCW, cfg).joint_deltas[0] < 0.0);
    }
}

TEST_CASE("field-of-view boundary") {
    CHECK(observe(layout_with_pink_at(0.0)).visible(TrackedObject::PinkBall));
    CHECK(observe(layout_with_pink_at(59.0)).visible(TrackedObject::PinkBall));
    CHECK(!observe(layout_with_pink_at(61.0)).visible(TrackedObject::PinkBall));
    CHECK(observe(layout_with_pink_at(-59.0)).visible(TrackedObject::PinkBall));
    CHECK(!observe(layout_with_pink_at(-61.0)).visible(TrackedObject::PinkBall));

    const Observation behind = observe(layout_with_pink_at(180.0));
    CHECK(!behind.visible(TrackedObject::PinkBall));
    for (int i = 0; i < kObjectSlot; ++i) CHECK(behind.values[i] == 0.0f);
}

TEST_CASE("observation layout") {
    const auto fields = observation_fields();
    int next = 0;
    for (const auto& f : fields) {
        CHECK(f.obs_offset == next);
        next += f.width;
    }
    CHECK(next == kObsDim);
    CHECK(layout_hash() == layout_hash());

    for (int i = 0; i < kObsDim; ++i) {
        const int j = belief_index_of_obs(i);
        if (i < kProprioObsOffset && i % kObjectSlot == 0) {
            CHECK(j == -1);
        } else {
            REQUIRE(j >= 0);
            CHECK(obs_index_of_belief(j) == i);
        }
    }
    for (int j : belief_angle_pairs()) {
        const std::string_view name = [&] {
            const int i = obs_index_of_belief(j);
            for (const auto& f : fields)
                if (i >= f.obs_offset && i < f.obs_offset + f.width) return f.name;
            return std::string_view{};
        }();
        const bool angular = name.find("orientation") != std::string_view::npos ||
                             name.find("shoulder") != std::string_view::npos ||
                             name.find("elbow") != std::string_view::npos;
        CHECK(angular);
    }
}

TEST_CASE("property: observation invariants under random worlds") {
    SimConfig cfg;
    Rng rng(9);
    std::uniform_real_distribution<double> pos(-4.5, 4.5), ang(-kPi, kPi), vel(-3.0, 3.0), joint(-1.5, 1.5);
    for (int trial = 0; trial < 2000; ++trial) {
        WorldState w = reset(cfg, 1);
        w.infant.position = {pos(rng), pos(rng)};
        w.infant.yaw = ang(rng);
        for (auto& j : w.infant.joints) j = joint(rng);
        w.caregiver.position = {pos(rng), pos(rng)};
        w.caregiver.yaw = ang(rng);
        w.caregiver.velocity = {vel(rng), vel(rng)};
        for (auto& b : w.balls) {
            b.position = {pos(rng), 0.25 + std::abs(vel(rng)), pos(rng)};
            b.velocity = {vel(rng), vel(rng), vel(rng)};
        }
        const Observation o = observe(w);
        for (int k = 0; k < kNumObjects; ++k) {
            const float vis = o.values[k * kObjectSlot];
            CHECK((vis == 0.0f || vis == 1.0f));
            if (vis == 0.0f)
                for (int i = 1; i < kObjectSlot; ++i) CHECK(o.values[k * kObjectSlot + i] == 0.0f);
        }
        for (float x : o.values) CHECK(std::isfinite(x));
        const auto b = o.belief_values();
        const auto m = o.belief_mask();
        for (int off : belief_angle_pairs()) {
            if (m[off] == 0.0f) continue;
            CHECK(b[off] * b[off] + b[off + 1] * b[off + 1] == doctest::Approx(1.0f).epsilon(1e-5));
        }

        // Mirror the world across the infant's forward axis.
        WorldState mirror = w;
        auto reflect = [&](Vec2 p) {
            const Vec2 f = heading(w.infant.yaw);
            const Vec2 d = p - w.infant.position;
            const Vec2 along = f * d.dot(f);
            return w.infant.position + along * 2.0 - d;
        };
        mirror.caregiver.position = reflect(w.caregiver.position);
        for (auto& ball : mirror.balls) {
            const Vec2 p = reflect(ball.position.floor());
            ball.position.x = p.x;
            ball.position.z = p.z;
        }
        const Observation om = observe(mirror);
        for (int k = 0; k < kNumObjects; ++k)
            CHECK(o.visible(static_cast<TrackedObject>(k)) == om.visible(static_cast<TrackedObject>(k)));
    }
}

TEST_CASE("belief_from_world fills every object") {
    SimConfig cfg;
    const WorldState w = reset(cfg, 1);
    const auto b = belief_from_world(w);
    CHECK(b[0] == static_cast<float>(cfg.ball_start_lateral));
    CHECK(b[kObjectPayload + 0] == static_cast<float>(-cfg.ball_start_lateral));
    CHECK(b[2 * kObjectPayload + 2] == static_cast<float>(cfg.caregiver_start_distance));
    const Observation o = observe(w);
    for (int j = kProprioBeliefOffset; j < kBeliefDim; ++j) CHECK(b[j] == o.belief_values()[j]);
}
