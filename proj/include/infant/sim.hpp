#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "infant/common.hpp"

namespace infant {

// Physical constants of the room. The defaults are engineering choices; the
// source system never published its dimensions.
struct SimConfig {
    double room_half_extent = 5.0;  // walls at +-extent on x and z
    double dt = 0.1;
    double gravity = 9.81;
    double ball_radius = 0.25;
    double restitution = 0.6;
    double rolling_friction = 1.0;  // 1/s, applied to grounded balls
    double bounce_threshold = 0.981;  // m/s; slower floor impacts come to rest

    double infant_radius = 0.3;
    double shoulder_offset = 0.15;
    double arm_upper_len = 0.3;
    double arm_fore_len = 0.3;
    double arm_radius = 0.05;
    double joint_limit = kPi / 2.0;  // all four joints move in [-limit, limit]
    double infant_move_speed = 3.0;
    double infant_turn_rate = kPi / 2.0;  // 9 degrees per tick at dt = 0.1
    double joint_rate = kPi / 2.0;

    double caregiver_radius = 0.3;
    double caregiver_move_speed = 1.5;
    double pickup_radius = 0.5;  // gap between caregiver and ball surfaces
    double carry_height = 1.0;
    double throw_speed = 4.0;
    double throw_elevation = kPi / 6.0;
    double roll_speed = 4.0;

    // Canonical starting layout.
    double caregiver_start_distance = 2.5;
    double ball_start_lateral = 1.5;
    double ball_start_forward = -1.0;
    std::array<double, 4> infant_start_joints{kPi / 4.0, kPi / 4.0, -kPi / 4.0, -kPi / 4.0};

    int episode_ticks = 2000;

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

enum class BallId : std::uint8_t { Pink = 0, Green = 1 };
enum class Holder : std::uint8_t { Caregiver = 0 };

struct BallState {
    BallId id = BallId::Pink;
    Vec3 position;
    Vec3 velocity;
    std::optional<Holder> held_by;

    bool operator==(const BallState&) const = default;
};

// Joint order: left shoulder, left elbow, right shoulder, right elbow.
enum class Joint : std::uint8_t { LShoulder = 0, LElbow = 1, RShoulder = 2, RElbow = 3 };

struct InfantBody {
    Vec2 position;
    double yaw = 0.0;
    std::array<double, 4> joints{};
    std::array<bool, 2> hit_sensors{};  // left arm, right arm
    Vec2 velocity;

    bool operator==(const InfantBody&) const = default;
};

struct CaregiverBody {
    Vec2 position;
    double yaw = 0.0;
    Vec2 velocity;
    std::optional<BallId> held_ball;

    bool operator==(const CaregiverBody&) const = default;
};

struct WorldState {
    std::int64_t tick = 0;
    InfantBody infant;
    CaregiverBody caregiver;
    std::array<BallState, 2> balls;
    Rng rng;

    const BallState& ball(BallId id) const { return balls[static_cast<int>(id)]; }
    BallState& ball(BallId id) { return balls[static_cast<int>(id)]; }

    bool operator==(const WorldState&) const = default;
};

// Per-tick body motion requested by the infant. Translation is in the body
// frame: x to the infant's left, z forward.
struct BodyIntent {
    double yaw_delta = 0.0;
    Vec2 translation;
    std::array<double, 4> joint_deltas{};

    bool operator==(const BodyIntent&) const = default;
};

struct BallRelease {
    Vec3 velocity;
    double height = 1.0;
};

struct CaregiverCommand {
    std::optional<Vec2> move_to;
    std::optional<Vec2> look_at;
    std::optional<BallId> grab;
    std::optional<BallRelease> release;
};

// shoulder -> elbow -> hand, in world coordinates at arm height.
using ArmPolyline = std::array<Vec3, 3>;
struct ArmPolylines {
    ArmPolyline left;
    ArmPolyline right;

    const ArmPolyline& operator[](int i) const { return i == 0 ? left : right; }
};

ArmPolylines arm_kinematics(const InfantBody& body, const SimConfig& cfg);

WorldState reset(const SimConfig& cfg, std::uint64_t seed);

// Advances one tick. Throws SimError if the state becomes non-finite.
WorldState step_physics(const WorldState& state, const BodyIntent& infant_intent,
                        const CaregiverCommand& caregiver_cmd, const SimConfig& cfg);

// Point where a held ball rides, clamped to the room interior.
Vec3 carry_point(const CaregiverBody& cg, const SimConfig& cfg);

// Kinetic + potential energy of the free balls (unit mass).
double ball_energy(const WorldState& state, const SimConfig& cfg);

double distance_point_segment(const Vec3& p, const Vec3& a, const Vec3& b);
double min_arm_distance(const ArmPolyline& arm, const Vec3& p);

}  // namespace infant
