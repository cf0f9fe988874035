#pragma once

#include <cstdint>
#include <vector>

#include "infant/caregiver.hpp"
#include "infant/infant_io.hpp"
#include "infant/sim.hpp"

namespace infant {

struct EnvConfig {
    SimConfig sim;
    CaregiverConfig caregiver;
    double contingency_p = 1.0;

    void validate() const;
};

struct StepResult {
    Observation observation;
    std::vector<FsmEvent> events;
    bool done = false;
};

// One episode of the room: physics, pointing detector and caregiver FSM.
//
// Tick order: the detector reads the pose the infant holds at tick t, the FSM
// reacts to that detection in the same tick, then physics advances with the
// infant's action and the caregiver's command. Hit events are rising edges of
// the post-step hit sensors.
class Environment {
public:
    explicit Environment(EnvConfig cfg);

    // Draws the contingency flag from the episode's own RNG stream.
    Observation reset(std::uint64_t seed);
    Observation reset(std::uint64_t seed, ContingencyFlag flag);
    StepResult step(Action a);

    const EnvConfig& config() const { return cfg_; }
    const WorldState& world() const { return world_; }
    // Staging hook for constructed layouts; the caller keeps it valid.
    WorldState& mutable_world() { return world_; }
    const CaregiverFsm& fsm() const { return fsm_; }
    const PointingDetectorState& detector() const { return detector_; }
    const ContingencyFlag& flag() const { return flag_; }
    // Branch latched this episode; Independent until one activates.
    Branch branch() const { return branch_; }
    bool done() const { return world_.tick >= cfg_.sim.episode_ticks; }

private:
    Observation begin(ContingencyFlag flag);

    EnvConfig cfg_;
    WorldState world_;
    CaregiverFsm fsm_;
    PointingDetectorState detector_;
    ContingencyFlag flag_;
    Branch branch_ = Branch::Independent;
};

// Hand-coded infant that turns toward target, straightens its right arm and
// holds the pose until the detector latches; afterwards it acts uniformly at
// random so the rest of the episode still exercises the branch.
Action scripted_point_action(const WorldState& world, PointTarget target, const PointingDetectorState& det,
                             const SimConfig& cfg, Rng& rng);

}  // namespace infant
