#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "infant/infant_io.hpp"
#include "infant/sim.hpp"

namespace infant {

enum class PointTarget : std::uint8_t { Caregiver = 0, PinkBall = 1, GreenBall = 2 };
inline constexpr int kNumPointTargets = 3;

enum class Branch : std::uint8_t { Independent = 0, Hide = 1, Roll = 2, Chase = 3 };
inline constexpr int kNumBranches = 4;
std::string_view branch_name(Branch b);
std::optional<Branch> branch_from_name(std::string_view name);
Branch branch_for(PointTarget t);

struct PointingConfig {
    double body_tolerance = deg_to_rad(15.0);
    double arm_tolerance = deg_to_rad(10.0);
    int hold_ticks = 5;
};

struct PointingDetectorState {
    std::array<int, kNumPointTargets> counters{};
    std::optional<PointTarget> latched;

    bool operator==(const PointingDetectorState&) const = default;
};

struct PointingResult {
    PointingDetectorState state;
    std::optional<PointTarget> detected;
};

// Counter for target T advances while the body faces T and one arm is held
// straight; it fires once when the counter reaches hold_ticks, then latches.
PointingResult detect_pointing(const InfantBody& infant, const WorldState& world, const PointingDetectorState& det,
                               const PointingConfig& cfg = {});

bool arm_is_straight(const InfantBody& infant, const PointingConfig& cfg);
Vec2 point_target_position(const WorldState& world, PointTarget t);

struct ContingencyFlag {
    bool responsive = true;
    double p = 1.0;

    bool operator==(const ContingencyFlag&) const = default;
};

// Bernoulli(p) draw. Throws std::invalid_argument for p outside [0, 1].
ContingencyFlag sample_contingency(double p, Rng& rng);

enum class Phase : std::uint8_t { WaitingForPoint = 0, Hide = 1, Roll = 2, Chase = 3, Unresponsive = 4 };
enum class SubPhase : std::uint8_t { None = 0, Moving, Waiting, Fetching, Positioning, AwaitGaze, Cooldown };
std::string_view phase_name(Phase p);
std::string_view subphase_name(SubPhase s);

struct CaregiverConfig {
    PointingConfig pointing;
    double hide_min_distance = 2.0;
    double hide_max_distance = 4.0;
    double hide_half_width = deg_to_rad(120.0);  // around the infant's backward axis
    double arrive_tolerance = 0.15;
    double roll_distance = 3.0;
    int roll_wait_ticks = 50;
    int chase_wait_ticks = 10;

    void validate() const;
};

struct CaregiverFsm {
    Phase phase = Phase::WaitingForPoint;
    SubPhase sub = SubPhase::None;
    Vec2 target;
    int timer = 0;

    bool operator==(const CaregiverFsm&) const = default;
};

enum class EventKind : std::uint8_t {
    PointDetected = 0,  // arg: PointTarget
    BranchActivated,    // arg: Branch
    HideFound,          // caregiver entered the infant's view while hidden and waiting
    HideResample,
    RollRelease,
    Throw,              // arg: 1 if the caregiver was in the infant's view at the throw tick
    Hit,                // arg: arm side (0 left, 1 right), rising edge of a hit sensor
};
inline constexpr int kNumEventKinds = 7;
std::string_view event_name(EventKind k);

struct FsmEvent {
    std::int32_t tick = 0;
    EventKind kind = EventKind::PointDetected;
    Phase phase = Phase::WaitingForPoint;
    std::uint8_t arg = 0;

    bool operator==(const FsmEvent&) const = default;
};

struct FsmOutput {
    CaregiverFsm fsm;
    CaregiverCommand command;
    std::vector<FsmEvent> events;
};

FsmOutput fsm_step(const CaregiverFsm& fsm, const WorldState& world, const ContingencyFlag& flag,
                   std::optional<PointTarget> detection, const CaregiverConfig& cfg, const SimConfig& sim, Rng& rng);

// Uniform over the annulus sector behind the infant, rejected until it lies in
// the room and outside the infant's field of view.
Vec2 sample_hide_point(const InfantBody& infant, const CaregiverConfig& cfg, const SimConfig& sim, Rng& rng);

}  // namespace infant
