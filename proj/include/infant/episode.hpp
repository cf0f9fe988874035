#pragma once

#include <cstdint>
#include <vector>

#include "infant/caregiver.hpp"
#include "infant/world_model.hpp"

namespace infant {

// Everything logged about one episode. Tick t holds o_t, the action taken
// after seeing it, and s_t, the model state predicted for tick t before o_t
// was assimilated.
struct EpisodeRecord {
    std::int64_t index = 0;
    std::uint64_t seed = 0;
    ContingencyFlag flag;
    Branch branch = Branch::Independent;
    std::uint64_t layout = layout_hash();

    std::vector<Observation> observations;
    std::vector<Action> actions;
    std::vector<WorldModelState> states;
    std::vector<float> rewards;   // intrinsic, per observation tick, unscaled
    std::vector<float> logprobs;  // of the taken action
    std::vector<float> values;
    std::vector<FsmEvent> events;

    int length() const { return static_cast<int>(observations.size()); }
    // Training window starting at tick start.
    Sequence window(int start, int length) const;
    // Throws std::invalid_argument if the streams disagree in length.
    void validate() const;
};

struct TickRef {
    const EpisodeRecord* episode = nullptr;
    int t = 0;
};

}  // namespace infant
