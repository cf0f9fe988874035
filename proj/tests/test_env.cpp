#include "doctest.h"
#include "infant/env.hpp"

using namespace infant;

namespace {

struct EpisodeSummary {
    Branch branch = Branch::Independent;
    int detections = 0;
    int activations = 0;
    std::vector<FsmEvent> events;
};

EpisodeSummary run_scripted(PointTarget target, double p, std::uint64_t seed, int ticks = 300) {
    EnvConfig cfg;
    cfg.sim.episode_ticks = ticks;
    cfg.contingency_p = p;
    Environment env(cfg);
    env.reset(seed);
    Rng rng(seed);
    EpisodeSummary s;
    while (!env.done()) {
        const Action a = scripted_point_action(env.world(), target, env.detector(), cfg.sim, rng);
        for (const auto& e : env.step(a).events) {
            s.events.push_back(e);
            if (e.kind == EventKind::PointDetected) ++s.detections;
            if (e.kind == EventKind::BranchActivated) ++s.activations;
        }
    }
    s.branch = env.branch();
    return s;
}

}  // namespace

TEST_CASE("scripted pointers unlock their branch under a responsive caregiver") {
    const std::pair<PointTarget, Branch> cases[] = {
        {PointTarget::Caregiver, Branch::Hide}, {PointTarget::PinkBall, Branch::Roll}, {PointTarget::GreenBall, Branch::Chase}};
    for (auto [target, branch] : cases) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const EpisodeSummary s = run_scripted(target, 1.0, seed);
            CHECK(s.branch == branch);
            CHECK(s.detections == 1);
            CHECK(s.activations == 1);
        }
    }
}

TEST_CASE("unresponsive caregiver never activates a branch") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const EpisodeSummary s = run_scripted(PointTarget::GreenBall, 0.0, seed);
        CHECK(s.branch == Branch::Independent);
        CHECK(s.activations == 0);
        CHECK(s.detections == 1);  // the infant still pointed
    }
}

TEST_CASE("reset restores the waiting phase and is deterministic") {
    EnvConfig cfg;
    cfg.sim.episode_ticks = 200;
    Environment env(cfg);
    env.reset(4);
    Rng rng(4);
    while (!env.done()) env.step(scripted_point_action(env.world(), PointTarget::GreenBall, env.detector(), cfg.sim, rng));
    CHECK(env.fsm().phase == Phase::Chase);
    const Observation o1 = env.reset(4);
    CHECK(env.fsm().phase == Phase::WaitingForPoint);
    CHECK(env.branch() == Branch::Independent);
    CHECK(!env.detector().latched);
    Environment other(cfg);
    CHECK(other.reset(4) == o1);
    CHECK(other.world() == env.world());
}

TEST_CASE("chase throws and roll releases are logged") {
    const EpisodeSummary chase = run_scripted(PointTarget::GreenBall, 1.0, 1, 2000);
    int throws = 0;
    for (const auto& e : chase.events) throws += e.kind == EventKind::Throw ? 1 : 0;
    CHECK(throws >= 3);

    const EpisodeSummary roll = run_scripted(PointTarget::PinkBall, 1.0, 1, 2000);
    int rolls = 0;
    for (const auto& e : roll.events) rolls += e.kind == EventKind::RollRelease ? 1 : 0;
    CHECK(rolls >= 1);
}

TEST_CASE("stepping past the end is an error") {
    EnvConfig cfg;
    cfg.sim.episode_ticks = 3;
    Environment env(cfg);
    env.reset(1);
    for (int i = 0; i < 3; ++i) env.step(Action::NoOp);
    CHECK(env.done());
    CHECK_THROWS_AS(env.step(Action::NoOp), std::logic_error);
}

TEST_CASE("hit events are rising edges") {
    // Sweep an arm through a ball parked beside the infant.
    EnvConfig cfg;
    cfg.sim.episode_ticks = 60;
    cfg.contingency_p = 0.0;
    Environment env(cfg);
    env.reset(2);
    // Park pink beside the right arm, inside its sweep.
    env.mutable_world().balls[0].position = {-0.8, cfg.sim.ball_radius, 0.1};
    int hits = 0;
    bool prev[2] = {false, false};
    for (int t = 0; t < 60; ++t) {
        const auto r = env.step(t % 20 < 10 ? Action::RShoulderCW : Action::RShoulderCCW);
        int rising = 0;
        for (int side = 0; side < 2; ++side) {
            const bool now = env.world().infant.hit_sensors[side];
            rising += (now && !prev[side]) ? 1 : 0;
            prev[side] = now;
        }
        int logged = 0;
        for (const auto& e : r.events) logged += e.kind == EventKind::Hit ? 1 : 0;
        CHECK(logged == rising);
        hits += logged;
    }
    CHECK(hits >= 1);
}
