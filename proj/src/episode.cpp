#include "infant/episode.hpp"

#include <stdexcept>
#include <string>

namespace infant {

Sequence EpisodeRecord::window(int start, int len) const {
    if (start < 0 || len < 1 || start + len > length())
        throw std::out_of_range("EpisodeRecord::window: [" + std::to_string(start) + ", +" + std::to_string(len) +
                                ") outside an episode of " + std::to_string(length()) + " ticks");
    Sequence q;
    q.initial = states[start];
    q.observations.assign(observations.begin() + start, observations.begin() + start + len);
    q.actions.assign(actions.begin() + start, actions.begin() + start + len);
    return q;
}

void EpisodeRecord::validate() const {
    const std::size_t n = observations.size();
    if (actions.size() != n || states.size() != n)
        throw std::invalid_argument("EpisodeRecord: observation, action and state streams differ in length");
    for (const auto* v : {&rewards, &logprobs, &values})
        if (!v->empty() && v->size() != n) throw std::invalid_argument("EpisodeRecord: per-tick stream has wrong length");
    if (layout != layout_hash()) throw std::invalid_argument("EpisodeRecord: observation layout hash mismatch");
}

}  // namespace infant
