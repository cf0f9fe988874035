#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "infant/episode.hpp"
#include "infant/nn/adam.hpp"
#include "infant/nn/layers.hpp"
#include "infant/world_model.hpp"

namespace infant {

enum class RewardKind : std::uint8_t { Adversarial = 0, Disagreement, Rnd, DeltaProgress, GammaProgress };
inline constexpr int kNumRewardKinds = 5;
std::string_view reward_name(RewardKind k);
std::optional<RewardKind> reward_from_name(std::string_view name);

// Rewards are indexed like observations: r[t] belongs to tick t. Kinds that
// score an observation (adversarial, progress, RND) describe the outcome of
// the previous action; disagreement scores the action taken at t.
bool reward_scores_observation(RewardKind k);

// One-step masked losses from replaying the model over the episode, starting
// at its first stored state: entry t scores the prediction of o_t made at
// t-1, entry 0 is 0.
std::vector<float> one_step_losses(const WorldModel& wm, const EpisodeRecord& ep);

std::vector<float> reward_adversarial(const EpisodeRecord& ep, const WorldModel& wm);

// ---- ensemble disagreement ----

struct EnsembleConfig {
    int members = 10;
    std::vector<int> hidden{128, 128};
    nn::AdamConfig adam{1e-3};
    int batch_size = 128;
    int iterations = 8;  // updates per member per episode

    void validate() const;
};

// K next-observation predictors over [top-layer h, assimilated b, one-hot a].
class Ensemble {
public:
    Ensemble(EnsembleConfig cfg, int hidden_width, Rng& rng);

    const EnsembleConfig& config() const { return cfg_; }
    int size() const { return static_cast<int>(members_.size()); }
    int input_width() const { return hidden_width_ + kBeliefDim + kNumActions; }
    nn::ParamSet<float>& member(int k) { return members_[k]; }
    const nn::ParamSet<float>& member(int k) const { return members_[k]; }

    // [rows, kBeliefDim] predictions of member k.
    nn::Tensor<float> predict(int k, const nn::Tensor<float>& inputs) const;
    // One Adam step of member k on transitions (t must have a successor tick).
    double train(int k, std::span<const TickRef> batch);

private:
    EnsembleConfig cfg_;
    int hidden_width_;
    std::vector<nn::ParamSet<float>> members_;
    std::vector<nn::Mlp<float>> nets_;
    std::vector<nn::AdamState<float>> opt_;
};

// Rows [h_top(s_t), assimilate(s_t, o_t).b, one_hot(a_t)].
nn::Tensor<float> transition_inputs(std::span<const TickRef> ticks, int hidden_width);

// Mean over output dims of the population variance across members.
std::vector<float> reward_disagreement(const EpisodeRecord& ep, const Ensemble& ens);

// ---- random network distillation ----

struct RndConfig {
    int embedding = 64;
    std::vector<int> hidden{128, 128};
    nn::AdamConfig adam{1e-4};
    int batch_size = 128;
    int iterations = 8;
    double clip = 5.0;

    void validate() const;
};

// Running per-dim mean and variance (Welford), used to whiten observations.
class RunningNorm {
public:
    explicit RunningNorm(int dims = 0) : mean_(dims, 0.0), m2_(dims, 0.0) {}
    void update(std::span<const float> x);
    std::vector<float> normalize(std::span<const float> x, double clip) const;
    std::int64_t count() const { return count_; }
    int dims() const { return static_cast<int>(mean_.size()); }

private:
    std::int64_t count_ = 0;
    std::vector<double> mean_, m2_;
};

class Rnd {
public:
    Rnd(RndConfig cfg, Rng& rng);

    const RndConfig& config() const { return cfg_; }
    const nn::ParamSet<float>& target() const { return target_; }
    const nn::ParamSet<float>& predictor() const { return predictor_; }
    // Makes the predictor an exact copy of the target (tests and diagnostics).
    void copy_target_into_predictor();
    RunningNorm& norm() { return norm_; }
    const RunningNorm& norm() const { return norm_; }

    std::vector<float> error(std::span<const Observation> obs) const;
    // One predictor step on the batch; the target never changes.
    double train(std::span<const Observation> batch);

private:
    nn::Tensor<float> inputs(std::span<const Observation> obs) const;

    RndConfig cfg_;
    nn::ParamSet<float> target_, predictor_;
    nn::Mlp<float> target_net_, predictor_net_;
    nn::AdamState<float> opt_;
    RunningNorm norm_;
};

std::vector<float> reward_rnd(const EpisodeRecord& ep, const Rnd& rnd);

// ---- learning progress ----

enum class ProgressMode : std::uint8_t { Delta, Gamma };

struct ProgressConfig {
    std::int64_t delta_steps = 500000;
    double gamma = 0.999;

    void validate() const;
};

// The anchor model. Delta mode keeps verbatim snapshots taken at episode
// boundaries and uses the newest one at least delta env steps old; gamma mode
// mixes the anchor toward the current weights after every model update.
class ProgressSnapshot {
public:
    ProgressSnapshot(ProgressMode mode, ProgressConfig cfg, const nn::ParamSet<float>& initial);

    ProgressMode mode() const { return mode_; }
    const nn::ParamSet<float>& anchor() const { return anchor_; }
    void after_model_update(const nn::ParamSet<float>& current);
    void at_episode_end(std::int64_t env_steps, const nn::ParamSet<float>& current);

private:
    ProgressMode mode_;
    ProgressConfig cfg_;
    nn::ParamSet<float> anchor_;
    std::deque<std::pair<std::int64_t, nn::ParamSet<float>>> history_;
};

// r_t = loss under the anchor minus loss under the current model.
std::vector<float> reward_progress(const EpisodeRecord& ep, const WorldModel& current, const ProgressSnapshot& snap);

// ---- scaling ----

// Divides by a running standard deviation of every reward seen so far. No
// mean is subtracted, so signs and orderings survive.
class RewardScaler {
public:
    void update(std::span<const float> r);
    double scale() const;
    std::vector<float> apply(std::span<const float> r) const;
    std::int64_t count() const { return count_; }

private:
    std::int64_t count_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

}  // namespace infant
