#pragma once

#include <array>
#include <span>
#include <vector>

#include "infant/infant_io.hpp"
#include "infant/nn/adam.hpp"
#include "infant/nn/graph.hpp"
#include "infant/nn/layers.hpp"

namespace infant {

using Belief = std::array<float, kBeliefDim>;

struct WorldModelConfig {
    int hidden = 128;
    int layers = 2;
    std::vector<int> decoder_hidden{128};

    void validate() const;
};

struct WmTrainConfig {
    int sequence_length = 30;  // L
    int burn_in = 10;          // B
    int batch_size = 32;       // N
    int iterations = 8;        // M, batches per episode
    nn::AdamConfig adam{3e-4};

    void validate() const;
};

// (h, c, b). h and c hold every layer back to back, layer 0 first.
struct WorldModelState {
    std::vector<float> h, c;
    Belief b{};

    bool operator==(const WorldModelState&) const = default;
};

// Overwrites b with every visible object slot and all proprioception.
WorldModelState assimilate(const WorldModelState& s, const Observation& o);

// The belief is already in observation order, minus the visibility entries.
inline const Belief& readout(const WorldModelState& s) { return s.b; }

// Squared error of one step; invisible object dims are masked out.
// per_dim, when given, receives the 38 masked squared errors.
double masked_step_loss(const Belief& pred, const Observation& target, float* per_dim = nullptr);

struct LossTrace {
    double total = 0.0;
    std::vector<float> per_dim;  // steps x kBeliefDim, belief order

    int steps() const { return static_cast<int>(per_dim.size() / kBeliefDim); }
};

LossTrace wm_loss(std::span<const Belief> predicted, std::span<const Observation> actual);

// A stored training window: the model state before assimilating
// observations[0], and the L observations and actions that follow.
struct Sequence {
    WorldModelState initial;
    std::vector<Observation> observations;
    std::vector<Action> actions;
};

class WorldModel {
public:
    WorldModel(WorldModelConfig cfg, Rng& rng);
    // Attaches to existing parameters (e.g. a loaded checkpoint).
    WorldModel(WorldModelConfig cfg, nn::ParamSet<float> params);

    const WorldModelConfig& config() const { return cfg_; }
    nn::ParamSet<float>& params() { return params_; }
    const nn::ParamSet<float>& params() const { return params_; }
    int state_width() const { return cfg_.hidden * cfg_.layers; }

    // Zero recurrent state; b from the ground-truth reset layout.
    WorldModelState initial_state(const WorldState& world) const;
    WorldModelState zero_recurrent(const Belief& b) const;

    WorldModelState predict(const WorldModelState& s, Action a) const;
    std::vector<WorldModelState> predict(std::span<const WorldModelState> s, std::span<const Action> a) const;

    // Graph-level building blocks shared by training and the reward functions.
    struct Vars {
        nn::LstmVars<float> rnn;
        nn::Var b;
    };
    Vars inputs(nn::Graph<float>& g, std::span<const WorldModelState> rows) const;
    Vars predict(nn::Graph<float>& g, std::span<const nn::Var> bound, const Vars& s, std::span<const Action> a) const;
    std::vector<WorldModelState> extract(const nn::Graph<float>& g, const Vars& v) const;

private:
    WorldModelConfig cfg_;
    nn::ParamSet<float> params_;
    nn::Lstm<float> lstm_;
    nn::Mlp<float> decoder_;
};

nn::Var assimilate(nn::Graph<float>& g, nn::Var b, std::span<const Observation> o);

// Burn-in then open-loop prediction over one window, without gradients. The
// first `burn_in` observations are assimilated; every later step is scored
// against the model's own prediction. When reset_recurrent is set the stored
// h and c are replaced with zeros (used when scoring a model on another
// agent's data).
LossTrace rollout_loss(const WorldModel& wm, const Sequence& seq, int burn_in, bool reset_recurrent = false);
// Same, evaluated as one batch; windows must share a length.
std::vector<LossTrace> rollout_losses(const WorldModel& wm, std::span<const Sequence> batch, int burn_in,
                                      bool reset_recurrent = false);

struct TrainStep {
    double loss = 0.0;  // mean over the batch of the summed window loss
    bool applied = false;
};

// One optimizer step on a batch of windows. Burn-in runs outside the graph.
// A non-finite loss or gradient leaves the parameters untouched.
TrainStep train_batch(WorldModel& wm, nn::AdamState<float>& opt, std::span<const Sequence> batch,
                      const WmTrainConfig& cfg);

// The gradient of the batch loss (used by tests and the progress rewards).
struct BatchGradient {
    double loss = 0.0;
    nn::ParamSet<float> grads;
};
BatchGradient batch_gradient(const WorldModel& wm, std::span<const Sequence> batch, int burn_in);

}  // namespace infant
