#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "infant/episode.hpp"
#include "infant/nn/adam.hpp"
#include "infant/nn/layers.hpp"
#include "infant/world_model.hpp"

namespace infant {

struct PolicyConfig {
    std::vector<int> hidden{128, 128};

    void validate() const;
};

struct PpoConfig {
    double clip = 0.2;
    double gamma = 0.99;
    double lambda = 0.95;
    int epochs = 4;
    int minibatch = 256;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    bool normalize_advantages = true;
    nn::AdamConfig adam{3e-4, 0.9, 0.999, 1e-8, 0.5};

    void validate() const;
};

// Actor (13 logits) and critic (scalar) tanh MLPs over [top-layer h, b].
class Policy {
public:
    Policy(PolicyConfig cfg, int hidden_width, Rng& rng);
    Policy(PolicyConfig cfg, int hidden_width, nn::ParamSet<float> params);

    int input_width() const { return hidden_width_ + kBeliefDim; }
    nn::ParamSet<float>& params() { return params_; }
    const nn::ParamSet<float>& params() const { return params_; }

    // Feature row of an assimilated state s'.
    void features(const WorldModelState& s, float* row) const;
    nn::Tensor<float> features(std::span<const WorldModelState> s) const;

    struct Heads {
        nn::Var logits, value;
    };
    Heads forward(nn::Graph<float>& g, std::span<const nn::Var> bound, nn::Var x) const;

    struct Output {
        std::array<float, kNumActions> logits{};
        float value = 0.0f;
    };
    Output evaluate(const WorldModelState& s) const;

private:
    PolicyConfig cfg_;
    int hidden_width_;
    nn::ParamSet<float> params_;
    nn::Mlp<float> actor_, critic_;
};

struct ActionSample {
    Action action = Action::NoOp;
    float logprob = 0.0f;
    float value = 0.0f;
    std::array<float, kNumActions> logits{};
};

std::array<double, kNumActions> softmax(std::span<const float> logits);
double log_prob(std::span<const float> logits, int action);

ActionSample sample_action(const Policy& policy, const WorldModelState& s, Rng& rng);
// Draw from softmax(logits) with one uniform variate.
int sample_categorical(std::span<const float> logits, Rng& rng);

struct Advantages {
    std::vector<float> advantages, returns;
};

// Backward GAE recursion; the episode is terminal after the last step.
Advantages compute_gae(std::span<const float> rewards, std::span<const float> values, double gamma, double lambda);

struct Rollout {
    nn::Tensor<float> features;  // [n, input_width]
    std::vector<int> actions;
    std::vector<float> logprobs, advantages, returns;

    int size() const { return static_cast<int>(actions.size()); }
};

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    int updates = 0;
    bool aborted = false;
};

struct PpoLoss {
    double total = 0.0, policy = 0.0, value = 0.0, entropy = 0.0, clip_fraction = 0.0;
    nn::ParamSet<float> grads;
};

// Loss and gradient on one minibatch; advantages are used as given.
PpoLoss ppo_loss(const Policy& policy, const Rollout& batch, std::span<const int> rows, const PpoConfig& cfg);

// Clipped-surrogate update over several epochs of shuffled minibatches.
// A non-finite loss aborts the update and restores the parameters.
PpoStats ppo_update(Policy& policy, nn::AdamState<float>& opt, const Rollout& rollout, const PpoConfig& cfg, Rng& rng);

// FIFO store of whole episodes.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);

    void push(std::shared_ptr<const EpisodeRecord> ep);
    int size() const { return static_cast<int>(episodes_.size()); }
    int capacity() const { return capacity_; }
    const EpisodeRecord& operator[](int i) const { return *episodes_[i]; }
    std::shared_ptr<const EpisodeRecord> share(int i) const { return episodes_[i]; }

    // N windows of length L, uniform over all (episode, start) pairs that fit.
    std::vector<Sequence> sample_sequences(int n, int length, Rng& rng) const;
    // Window positions only, same distribution.
    std::vector<TickRef> sample_windows(int n, int length, Rng& rng) const;
    // Ticks that have a successor, uniform over the buffer.
    std::vector<TickRef> sample_transitions(int n, Rng& rng) const;

private:
    int capacity_;
    std::deque<std::shared_ptr<const EpisodeRecord>> episodes_;
};

}  // namespace infant
