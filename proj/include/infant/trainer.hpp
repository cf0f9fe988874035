#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "infant/config.hpp"
#include "infant/metrics.hpp"
#include "infant/trajectory.hpp"

namespace infant {

class TrainingError : public std::runtime_error {
public:
    TrainingError(std::int64_t episode, std::string op, const std::string& what);
    std::int64_t episode() const { return episode_; }
    const std::string& op() const { return op_; }

private:
    std::int64_t episode_;
    std::string op_;
};

struct EpisodeStats {
    std::int64_t index = 0;
    std::uint64_t seed = 0;
    bool responsive = true;
    Branch branch = Branch::Independent;
    double reward_sum = 0.0;  // unscaled
    double reward_scale = 1.0;
    double wm_loss = 0.0;     // mean over the episode's model batches
    int wm_skipped = 0;       // batches rejected as non-finite
    PpoStats ppo;
};

// The reward stream fed to the policy. Observation-scoring rewards move one
// tick back so that action t is credited with what it caused at t + 1.
std::vector<float> action_rewards(std::span<const float> per_tick, bool scores_observation);

// 1 for every tick with the pink ball in view.
std::vector<float> pink_visible_reward(const EpisodeRecord& ep);

// Runs one agent through the episodic loop: act, store, reward, policy
// update, auxiliary update, model updates. Writes its artifacts into
// config.out unless artifacts are disabled.
class Trainer {
public:
    explicit Trainer(RunConfig cfg, bool write_artifacts = true);
    ~Trainer();
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    const RunConfig& config() const { return cfg_; }
    std::int64_t episodes_done() const { return episode_; }
    std::int64_t env_steps() const { return env_steps_; }
    const WorldModel& world_model() const { return *wm_; }
    const Policy& policy() const { return *policy_; }
    const ReplayBuffer& replay() const { return buffer_; }
    const std::vector<MetricsRow>& metrics() const { return metrics_; }
    const std::vector<EpisodeStats>& stats() const { return stats_; }
    const std::vector<EpisodeSummary>& summaries() const { return summaries_; }

    // Plays and learns from one episode; returns its record.
    std::shared_ptr<const EpisodeRecord> run_episode();
    // Remaining episodes, final checkpoint, validation set and summary.
    void run(std::ostream* progress = nullptr);
    // Validation set sampled over the whole run so far.
    ValidationSet validation_set() const;

    void save_checkpoint(const std::string& tag) const;

private:
    EpisodeRecord act();
    std::vector<float> compute_rewards(const EpisodeRecord& ep);
    void update_policy(const EpisodeRecord& ep, const std::vector<float>& scaled, EpisodeStats& st);
    void update_aux(const EpisodeRecord& ep);
    void update_world_model(EpisodeStats& st);
    void record(const EpisodeRecord& ep, const EpisodeStats& st);
    template <class Fn>
    auto stage(const char* op, Fn&& fn) -> decltype(fn());

    RunConfig cfg_;
    bool artifacts_;
    std::filesystem::path out_;

    Rng env_rng_, policy_rng_, buffer_rng_, aux_rng_, ppo_rng_;
    Environment env_;
    std::unique_ptr<WorldModel> wm_;
    std::unique_ptr<Policy> policy_;
    nn::AdamState<float> wm_opt_, pi_opt_;
    std::unique_ptr<Ensemble> ensemble_;
    std::unique_ptr<Rnd> rnd_;
    std::unique_ptr<ProgressSnapshot> progress_;
    RewardScaler scaler_;
    ReplayBuffer buffer_;
    SegmentReservoir reservoir_;
    Discretizer discretizer_;

    std::int64_t episode_ = 0;
    std::int64_t env_steps_ = 0;
    std::vector<EpisodeStats> stats_;
    std::vector<EpisodeSummary> summaries_;
    std::vector<MetricsRow> metrics_;
    std::unique_ptr<TrajectoryWriter> trajectory_;
    std::unique_ptr<std::ofstream> episodes_csv_, metrics_csv_;
};

// Trains config.episodes episodes and writes every artifact.
void run_training(const RunConfig& cfg, std::ostream* progress = nullptr);

// Artifact file names inside a run directory.
namespace artifact {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kEpisodes = "episodes.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kTrajectory = "trajectory.bin";
inline constexpr const char* kValset = "valset.bin";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kCheckpoints = "checkpoints";
std::filesystem::path wm_checkpoint(const std::filesystem::path& run, const std::string& tag);
std::filesystem::path policy_checkpoint(const std::filesystem::path& run, const std::string& tag);
std::string episode_tag(std::int64_t episodes_done);
}  // namespace artifact

// Loads a run's model checkpoint using the run's own config.
WorldModel load_run_world_model(const std::filesystem::path& run, const std::string& tag = "final");
RunConfig load_run_config(const std::filesystem::path& run);

}  // namespace infant
