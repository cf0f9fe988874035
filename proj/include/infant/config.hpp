#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "infant/env.hpp"
#include "infant/metrics.hpp"
#include "infant/policy.hpp"
#include "infant/rewards.hpp"
#include "infant/world_model.hpp"

namespace infant {

// Who chooses actions. Everything but Learned ignores the reward.
enum class PolicyKind : std::uint8_t { Learned = 0, Random, NoOp, PointCaregiver, PointPink, PointGreen };
std::string_view policy_kind_name(PolicyKind k);
std::optional<PolicyKind> policy_kind_from_name(std::string_view name);

struct RunConfig {
    std::uint64_t seed = 0;
    RewardKind reward = RewardKind::Disagreement;
    PolicyKind policy = PolicyKind::Learned;
    // Replaces the intrinsic reward with 1 whenever the pink ball is in view.
    bool dense_pink_reward = false;
    int episodes = 150;
    int replay_capacity = 500;  // episodes
    int checkpoint_every = 25;
    int metrics_window = 100;
    bool log_trajectories = true;
    bool log_hidden = false;  // include h and c in the trajectory log
    int validation_segments = kValidationSegments;
    std::string out = "run";

    EnvConfig env;
    WorldModelConfig world_model;
    WmTrainConfig wm_train;
    PolicyConfig policy_net;
    PpoConfig ppo;
    EnsembleConfig ensemble;
    RndConfig rnd;
    ProgressConfig progress;

    std::int64_t env_steps() const { return static_cast<std::int64_t>(episodes) * env.sim.episode_ticks; }
    void validate() const;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Overlays JSON text on `base`. Unknown keys and wrong types throw ConfigError
// naming the dotted key path.
RunConfig parse_config(std::string_view json_text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
// Every key, pretty-printed; parse_config(to_json(c)) reproduces c.
std::string config_to_json(const RunConfig& c);

}  // namespace infant
