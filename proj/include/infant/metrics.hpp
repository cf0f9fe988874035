#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infant/episode.hpp"
#include "infant/world_model.hpp"

namespace infant {

// ---- behavior diversity ----

enum class BehaviorComponent : std::uint8_t { Location = 0, Orientation, Pose, Attention };
inline constexpr int kNumBehaviorComponents = 4;
std::string_view component_name(BehaviorComponent c);

struct DiscretizerConfig {
    int location_grid = 10;     // G x G cells over the room floor
    int orientation_bins = 16;  // yaw
    int joint_bins = 8;         // per joint, over [-limit, limit]
    double room_half_extent = 5.0;
    double joint_limit = kPi / 2.0;

    void validate() const;
};

// Maps an observation's proprioception and visibility bits to bins. Values
// outside a range land in the nearest edge bin.
class Discretizer {
public:
    explicit Discretizer(DiscretizerConfig cfg = {});

    const DiscretizerConfig& config() const { return cfg_; }
    int location_bins() const { return cfg_.location_grid * cfg_.location_grid; }
    int orientation_bins() const { return cfg_.orientation_bins; }
    int joint_bins() const { return cfg_.joint_bins; }
    static constexpr int attention_bins() { return 8; }

    int location(const Observation& o) const;
    int orientation(const Observation& o) const;
    int joint(const Observation& o, int j) const;
    // Bit k set when tracked object k is visible.
    static int attention(const Observation& o);

private:
    DiscretizerConfig cfg_;
};

// 100 * H(counts) / ln(counts.size()). Throws std::invalid_argument when
// there are no samples or fewer than two bins.
double normalized_entropy(std::span<const std::int64_t> counts);
double normalized_entropy(std::span<const int> bin_of_sample, int num_bins);

struct BehaviorHistogram {
    std::vector<std::int64_t> location, orientation, attention;
    std::array<std::vector<std::int64_t>, 4> joints;

    explicit BehaviorHistogram(const Discretizer& d = Discretizer{});
    void add(const Observation& o, const Discretizer& d);
    void merge(const BehaviorHistogram& other);
    std::int64_t samples() const;
};

struct EntropyReport {
    double location = 0.0, orientation = 0.0, pose = 0.0, attention = 0.0;
};

// Pose is the mean of the per-joint normalized entropies.
EntropyReport behavior_entropy(const BehaviorHistogram& h);

// ---- contingency statistics ----

struct Participation {
    Branch branch = Branch::Independent;
    double value = 0.0;
    bool counted = false;  // false: no opportunity, excluded from averages
};

// Hide: caregiver-found events. Roll: ball contacts while rolling. Chase:
// share of throws watched (0 and not counted when there were no throws).
Participation participation(Branch branch, std::span<const FsmEvent> events);
Participation participation(const EpisodeRecord& ep);

struct EpisodeSummary {
    std::int64_t index = 0;
    Branch branch = Branch::Independent;
    bool responsive = true;
    double reward_sum = 0.0;
    Participation part;
    BehaviorHistogram behavior;
};

EpisodeSummary summarize(const EpisodeRecord& ep, const Discretizer& d);

struct ActivationStats {
    std::array<double, kNumBranches> proportion{};  // by Branch, sums to 1
    std::int64_t episodes = 0;

    double total() const { return 1.0 - proportion[0]; }
};

ActivationStats activation_stats(std::span<const Branch> branches);

struct MetricsRow {
    std::int64_t first_episode = 0, last_episode = 0;
    EntropyReport entropy;
    ActivationStats activation;
    std::array<double, 3> participation{};  // hide, roll, chase; NaN when nothing counted
    double mean_reward = 0.0;
};

MetricsRow aggregate(std::span<const EpisodeSummary> window);

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(std::istream& is);

// ---- validation sets and round-robin ----

struct Provenance {
    std::string source;  // "learned" or "scripted"
    std::string reward;
    std::uint64_t seed = 0;
    double contingency_p = 1.0;
};

struct ValidationSet {
    Provenance provenance;
    int burn_in = 10;
    int horizon = 10;
    std::uint64_t layout = layout_hash();
    std::vector<Sequence> segments;

    void validate() const;
};

// Uniform sample of fixed-length windows over every window offered, without
// keeping the stream (reservoir sampling).
class SegmentReservoir {
public:
    SegmentReservoir(int capacity, int length, std::uint64_t seed);

    void offer(const EpisodeRecord& ep);
    std::int64_t offered() const { return seen_; }
    const std::vector<Sequence>& segments() const { return kept_; }
    ValidationSet finish(Provenance p, int burn_in) const;

private:
    int capacity_, length_;
    Rng rng_;
    std::int64_t seen_ = 0;
    std::vector<Sequence> kept_;
};

inline constexpr int kValidationSegments = 2000;
inline constexpr int kValidationHorizon = 10;

ValidationSet build_validation_set(std::span<const EpisodeRecord> episodes, int burn_in, Provenance p, Rng& rng,
                                   int count = kValidationSegments);

void save_validation_set(const ValidationSet& v, const std::string& path);
ValidationSet load_validation_set(const std::string& path);

// Mean over segments of the summed open-loop loss over the scored steps. The
// recurrent state starts at zero and b at the stored belief.
double evaluate_on_set(const WorldModel& wm, const ValidationSet& set);

struct NamedModel {
    std::string name;
    const WorldModel* model = nullptr;
    std::string source_tag;  // matches the provenance of its own set
};

struct NamedSet {
    std::string name;
    const ValidationSet* set = nullptr;
    std::string source_tag;
};

struct RoundRobin {
    std::vector<std::string> models, sets;
    std::vector<std::vector<double>> loss;  // [model][set]
    std::vector<std::vector<bool>> self;
};

RoundRobin round_robin(std::span<const NamedModel> models, std::span<const NamedSet> sets);
void write_round_robin_csv(std::ostream& os, const RoundRobin& rr);

// ---- loss decomposition ----

struct LossDecomposition {
    std::array<double, kNumGroups> group{};  // Self, Ball1, Ball2, Caregiver

    double total() const { return group[0] + group[1] + group[2] + group[3]; }
};

// Sums a (steps x 38) per-dim error tensor within each component group.
LossDecomposition decompose_loss(std::span<const float> per_dim);
// Mean per-segment decomposition of the scored rollout on a set.
LossDecomposition decompose_on_set(const WorldModel& wm, const ValidationSet& set);

}  // namespace infant
