#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "infant/sim.hpp"

namespace infant {

// Stable integer encoding 0..12. CCW is a positive (leftward) joint rotation.
enum class Action : std::uint8_t {
    NoOp = 0,
    TurnLeft,
    TurnRight,
    Forward,
    Back,
    LShoulderCW,
    LShoulderCCW,
    LElbowCW,
    LElbowCCW,
    RShoulderCW,
    RShoulderCCW,
    RElbowCW,
    RElbowCCW,
};
inline constexpr int kNumActions = 13;

std::string_view action_name(Action a);
std::optional<Action> action_from_int(int code);
inline int to_int(Action a) { return static_cast<int>(a); }

BodyIntent action_to_intent(Action a, const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Observation layout (version 1), 41 floats:
//
//   [0..26]  three object slots of 9, in order PinkBall, GreenBall, Caregiver:
//            visible, pos.x, pos.y, pos.z, sin(yaw), cos(yaw), vel.x, vel.y, vel.z
//   [27..40] proprioception: pos.x, pos.z, sin(yaw), cos(yaw),
//            (sin, cos) of joints LShoulder, LElbow, RShoulder, RElbow,
//            hit.left, hit.right
//
// The belief vector drops the three visibility entries (38 floats) and keeps
// the same order otherwise. Positions are world-frame.
// ---------------------------------------------------------------------------
enum class TrackedObject : std::uint8_t { PinkBall = 0, GreenBall = 1, Caregiver = 2 };
inline constexpr int kNumObjects = 3;
inline constexpr int kObjectSlot = 9;
inline constexpr int kObjectPayload = 8;
inline constexpr int kProprioDims = 14;
inline constexpr int kObsDim = kNumObjects * kObjectSlot + kProprioDims;
inline constexpr int kBeliefDim = kObsDim - kNumObjects;
inline constexpr int kProprioObsOffset = kNumObjects * kObjectSlot;
inline constexpr int kProprioBeliefOffset = kNumObjects * kObjectPayload;
inline constexpr int kLayoutVersion = 1;
static_assert(kObsDim == 41 && kBeliefDim == 38);

inline constexpr double kFovHalfAngle = kPi / 3.0;  // 120 degree cone

enum class ComponentGroup : std::uint8_t { Self = 0, Ball1 = 1, Ball2 = 2, Caregiver = 3 };
inline constexpr int kNumGroups = 4;
std::string_view group_name(ComponentGroup g);

struct FieldDesc {
    std::string_view name;
    int obs_offset;
    int width;
    ComponentGroup group;
};

// Ordered field table for the observation layout.
std::span<const FieldDesc> observation_fields();
std::uint64_t layout_hash();

int belief_index_of_obs(int obs_index);  // -1 for visibility entries
int obs_index_of_belief(int belief_index);
ComponentGroup belief_group(int belief_index);

// Belief offsets of every (sin, cos) pair.
std::span<const int> belief_angle_pairs();

struct Observation {
    std::array<float, kObsDim> values{};

    bool visible(TrackedObject o) const { return values[static_cast<int>(o) * kObjectSlot] != 0.0f; }
    std::array<float, kBeliefDim> belief_values() const;
    // 1 where the entry counts in the masked loss: visible objects and all proprioception.
    std::array<float, kBeliefDim> belief_mask() const;

    bool operator==(const Observation&) const = default;
};

// The single field-of-view predicate shared by observation, caregiver and metrics.
bool in_field_of_view(const InfantBody& infant, const Vec2& point);

Observation observe(const WorldState& world);

// Ground-truth belief with every object filled in, used to initialise b at reset.
std::array<float, kBeliefDim> belief_from_world(const WorldState& world);

}  // namespace infant
