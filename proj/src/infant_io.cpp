#include "infant/infant_io.hpp"

#include <string>
#include <vector>

namespace infant {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "noop",          "turn_left",      "turn_right",    "forward",         "back",
    "l_shoulder_cw", "l_shoulder_ccw", "l_elbow_cw",    "l_elbow_ccw",     "r_shoulder_cw",
    "r_shoulder_ccw", "r_elbow_cw",    "r_elbow_ccw"};

constexpr std::array<FieldDesc, 21> kFields = {{
    {"pink.visible", 0, 1, ComponentGroup::Ball1},
    {"pink.position", 1, 3, ComponentGroup::Ball1},
    {"pink.orientation", 4, 2, ComponentGroup::Ball1},
    {"pink.velocity", 6, 3, ComponentGroup::Ball1},
    {"green.visible", 9, 1, ComponentGroup::Ball2},
    {"green.position", 10, 3, ComponentGroup::Ball2},
    {"green.orientation", 13, 2, ComponentGroup::Ball2},
    {"green.velocity", 15, 3, ComponentGroup::Ball2},
    {"caregiver.visible", 18, 1, ComponentGroup::Caregiver},
    {"caregiver.position", 19, 3, ComponentGroup::Caregiver},
    {"caregiver.orientation", 22, 2, ComponentGroup::Caregiver},
    {"caregiver.velocity", 24, 3, ComponentGroup::Caregiver},
    {"self.position", 27, 2, ComponentGroup::Self},
    {"self.orientation", 29, 2, ComponentGroup::Self},
    {"self.l_shoulder", 31, 2, ComponentGroup::Self},
    {"self.l_elbow", 33, 2, ComponentGroup::Self},
    {"self.r_shoulder", 35, 2, ComponentGroup::Self},
    {"self.r_elbow", 37, 2, ComponentGroup::Self},
    {"self.hit_left", 39, 1, ComponentGroup::Self},
    {"self.hit_right", 40, 1, ComponentGroup::Self},
    {"end", 41, 0, ComponentGroup::Self},
}};

constexpr std::array<int, 8> kAnglePairs = {3, 11, 19, 26, 28, 30, 32, 34};

void put3(float* dst, const Vec3& v) {
    dst[0] = static_cast<float>(v.x);
    dst[1] = static_cast<float>(v.y);
    dst[2] = static_cast<float>(v.z);
}

void put_pair(float* dst, double s, double c) {
    dst[0] = static_cast<float>(s);
    dst[1] = static_cast<float>(c);
}

void put_heading_of(float* dst, const Vec3& vel) {
    const double n = std::sqrt(vel.x * vel.x + vel.z * vel.z);
    if (n > 1e-9)
        put_pair(dst, vel.x / n, vel.z / n);
    else
        put_pair(dst, 0.0, 1.0);
}

// Writes the 8 payload entries of one object.
void fill_object(float* dst, const WorldState& w, TrackedObject o) {
    if (o == TrackedObject::Caregiver) {
        const auto& cg = w.caregiver;
        put3(dst, lift(cg.position, 0.0));
        put_pair(dst + 3, std::sin(cg.yaw), std::cos(cg.yaw));
        put3(dst + 5, lift(cg.velocity, 0.0));
        return;
    }
    const BallState& b = w.ball(o == TrackedObject::PinkBall ? BallId::Pink : BallId::Green);
    put3(dst, b.position);
    put_heading_of(dst + 3, b.velocity);
    put3(dst + 5, b.velocity);
}

Vec2 object_floor_position(const WorldState& w, TrackedObject o) {
    switch (o) {
        case TrackedObject::PinkBall: return w.ball(BallId::Pink).position.floor();
        case TrackedObject::GreenBall: return w.ball(BallId::Green).position.floor();
        case TrackedObject::Caregiver: return w.caregiver.position;
    }
    return {};
}

void fill_proprio(float* dst, const InfantBody& inf) {
    dst[0] = static_cast<float>(inf.position.x);
    dst[1] = static_cast<float>(inf.position.z);
    put_pair(dst + 2, std::sin(inf.yaw), std::cos(inf.yaw));
    for (int j = 0; j < 4; ++j) put_pair(dst + 4 + 2 * j, std::sin(inf.joints[j]), std::cos(inf.joints[j]));
    dst[12] = inf.hit_sensors[0] ? 1.0f : 0.0f;
    dst[13] = inf.hit_sensors[1] ? 1.0f : 0.0f;
}

}  // namespace

std::string_view action_name(Action a) { return kActionNames[static_cast<int>(a)]; }

std::optional<Action> action_from_int(int code) {
    if (code < 0 || code >= kNumActions) return std::nullopt;
    return static_cast<Action>(code);
}

BodyIntent action_to_intent(Action a, const SimConfig& cfg) {
    BodyIntent in;
    const double turn = cfg.infant_turn_rate * cfg.dt;
    const double move = cfg.infant_move_speed * cfg.dt;
    const double joint = cfg.joint_rate * cfg.dt;
    switch (a) {
        case Action::NoOp: break;
        case Action::TurnLeft: in.yaw_delta = turn; break;
        case Action::TurnRight: in.yaw_delta = -turn; break;
        case Action::Forward: in.translation = {0.0, move}; break;
        case Action::Back: in.translation = {0.0, -move}; break;
        default: {
            const int k = static_cast<int>(a) - static_cast<int>(Action::LShoulderCW);
            const int joint_index = k / 2;
            in.joint_deltas[joint_index] = (k % 2 == 0) ? -joint : joint;
        }
    }
    return in;
}

std::string_view group_name(ComponentGroup g) {
    switch (g) {
        case ComponentGroup::Self: return "self";
        case ComponentGroup::Ball1: return "ball1";
        case ComponentGroup::Ball2: return "ball2";
        case ComponentGroup::Caregiver: return "caregiver";
    }
    return "?";
}

std::span<const FieldDesc> observation_fields() { return {kFields.data(), kFields.size() - 1}; }

std::uint64_t layout_hash() {
    std::string text = "obs-layout-v" + std::to_string(kLayoutVersion);
    for (const auto& f : observation_fields()) {
        text += ';';
        text += f.name;
        text += ':' + std::to_string(f.obs_offset) + ':' + std::to_string(f.width);
    }
    return fnv1a(text);
}

int belief_index_of_obs(int i) {
    if (i >= kProprioObsOffset) return i - kNumObjects;
    if (i % kObjectSlot == 0) return -1;
    return (i / kObjectSlot) * kObjectPayload + (i % kObjectSlot) - 1;
}

int obs_index_of_belief(int j) {
    if (j >= kProprioBeliefOffset) return j + kNumObjects;
    return (j / kObjectPayload) * kObjectSlot + (j % kObjectPayload) + 1;
}

ComponentGroup belief_group(int j) {
    if (j >= kProprioBeliefOffset) return ComponentGroup::Self;
    return static_cast<ComponentGroup>(1 + j / kObjectPayload);
}

std::span<const int> belief_angle_pairs() { return kAnglePairs; }

std::array<float, kBeliefDim> Observation::belief_values() const {
    std::array<float, kBeliefDim> b{};
    for (int j = 0; j < kBeliefDim; ++j) b[j] = values[obs_index_of_belief(j)];
    return b;
}

std::array<float, kBeliefDim> Observation::belief_mask() const {
    std::array<float, kBeliefDim> m{};
    for (int j = 0; j < kBeliefDim; ++j) {
        if (j >= kProprioBeliefOffset)
            m[j] = 1.0f;
        else
            m[j] = values[(j / kObjectPayload) * kObjectSlot] != 0.0f ? 1.0f : 0.0f;
    }
    return m;
}

bool in_field_of_view(const InfantBody& infant, const Vec2& point) {
    const Vec2 d = point - infant.position;
    if (d.norm() < 1e-9) return true;
    return angle_off_heading(infant.yaw, d) <= kFovHalfAngle;
}

Observation observe(const WorldState& w) {
    Observation o;
    for (int k = 0; k < kNumObjects; ++k) {
        const auto obj = static_cast<TrackedObject>(k);
        float* slot = o.values.data() + k * kObjectSlot;
        if (!in_field_of_view(w.infant, object_floor_position(w, obj))) continue;
        slot[0] = 1.0f;
        fill_object(slot + 1, w, obj);
    }
    fill_proprio(o.values.data() + kProprioObsOffset, w.infant);
    return o;
}

std::array<float, kBeliefDim> belief_from_world(const WorldState& w) {
    std::array<float, kBeliefDim> b{};
    for (int k = 0; k < kNumObjects; ++k) fill_object(b.data() + k * kObjectPayload, w, static_cast<TrackedObject>(k));
    fill_proprio(b.data() + kProprioBeliefOffset, w.infant);
    return b;
}

}  // namespace infant
