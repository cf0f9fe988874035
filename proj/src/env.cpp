#include "infant/env.hpp"

#include <stdexcept>

namespace infant {

void EnvConfig::validate() const {
    sim.validate();
    caregiver.validate();
    if (!(contingency_p >= 0.0 && contingency_p <= 1.0))
        throw std::invalid_argument("contingency_p must be in [0, 1]");
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    world_ = infant::reset(cfg_.sim, 0);
}

Observation Environment::reset(std::uint64_t seed) {
    world_ = infant::reset(cfg_.sim, seed);
    return begin(sample_contingency(cfg_.contingency_p, world_.rng));
}

Observation Environment::reset(std::uint64_t seed, ContingencyFlag flag) {
    world_ = infant::reset(cfg_.sim, seed);
    return begin(flag);
}

Observation Environment::begin(ContingencyFlag flag) {
    fsm_ = {};
    detector_ = {};
    flag_ = flag;
    branch_ = Branch::Independent;
    return observe(world_);
}

StepResult Environment::step(Action a) {
    if (done()) throw std::logic_error("Environment::step after the episode ended");
    StepResult out;
    const auto tick = static_cast<std::int32_t>(world_.tick);

    const PointingResult det = detect_pointing(world_.infant, world_, detector_, cfg_.caregiver.pointing);
    detector_ = det.state;
    if (det.detected)
        out.events.push_back({tick, EventKind::PointDetected, fsm_.phase, static_cast<std::uint8_t>(*det.detected)});

    FsmOutput fo = fsm_step(fsm_, world_, flag_, det.detected, cfg_.caregiver, cfg_.sim, world_.rng);
    for (const auto& e : fo.events) {
        if (e.kind == EventKind::BranchActivated) branch_ = static_cast<Branch>(e.arg);
        out.events.push_back(e);
    }
    fsm_ = fo.fsm;

    const std::array<bool, 2> before = world_.infant.hit_sensors;
    world_ = step_physics(world_, action_to_intent(a, cfg_.sim), fo.command, cfg_.sim);
    for (int side = 0; side < 2; ++side)
        if (world_.infant.hit_sensors[side] && !before[side])
            out.events.push_back({static_cast<std::int32_t>(world_.tick), EventKind::Hit, fsm_.phase,
                                  static_cast<std::uint8_t>(side)});

    out.observation = observe(world_);
    out.done = done();
    return out;
}

Action scripted_point_action(const WorldState& world, PointTarget target, const PointingDetectorState& det,
                             const SimConfig& cfg, Rng& rng) {
    if (det.latched) return static_cast<Action>(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));

    const InfantBody& inf = world.infant;
    const Vec2 d = point_target_position(world, target) - inf.position;
    const double off = wrap_angle(yaw_towards(d) - inf.yaw);
    const double half_turn = 0.5 * cfg.infant_turn_rate * cfg.dt;
    if (off > half_turn) return Action::TurnLeft;
    if (off < -half_turn) return Action::TurnRight;

    const double half_joint = 0.5 * cfg.joint_rate * cfg.dt;
    const double shoulder = inf.joints[static_cast<int>(Joint::RShoulder)];
    const double elbow = inf.joints[static_cast<int>(Joint::RElbow)];
    if (shoulder < -half_joint) return Action::RShoulderCCW;
    if (shoulder > half_joint) return Action::RShoulderCW;
    if (elbow < -half_joint) return Action::RElbowCCW;
    if (elbow > half_joint) return Action::RElbowCW;
    return Action::NoOp;
}

}  // namespace infant
