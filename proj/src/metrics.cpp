#include "infant/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "infant/binio.hpp"

namespace infant {

namespace {

constexpr int kPosX = kProprioObsOffset;
constexpr int kPosZ = kProprioObsOffset + 1;
constexpr int kYawSin = kProprioObsOffset + 2;
constexpr int kJointSin = kProprioObsOffset + 4;

int to_bin(double x, double lo, double hi, int bins) {
    const int k = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
    return std::clamp(k, 0, bins - 1);
}

}  // namespace

std::string_view component_name(BehaviorComponent c) {
    switch (c) {
        case BehaviorComponent::Location: return "location";
        case BehaviorComponent::Orientation: return "orientation";
        case BehaviorComponent::Pose: return "pose";
        case BehaviorComponent::Attention: return "attention";
    }
    return "?";
}

void DiscretizerConfig::validate() const {
    if (location_grid < 1 || orientation_bins < 2 || joint_bins < 2)
        throw std::invalid_argument("discretizer: bin counts too small");
    if (!(room_half_extent > 0.0) || !(joint_limit > 0.0)) throw std::invalid_argument("discretizer: bad ranges");
}

Discretizer::Discretizer(DiscretizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

int Discretizer::location(const Observation& o) const {
    const double e = cfg_.room_half_extent;
    const int g = cfg_.location_grid;
    return to_bin(o.values[kPosX], -e, e, g) * g + to_bin(o.values[kPosZ], -e, e, g);
}

int Discretizer::orientation(const Observation& o) const {
    const double yaw = std::atan2(o.values[kYawSin], o.values[kYawSin + 1]);
    return to_bin(yaw, -kPi, kPi, cfg_.orientation_bins);
}

int Discretizer::joint(const Observation& o, int j) const {
    const double q = std::atan2(o.values[kJointSin + 2 * j], o.values[kJointSin + 2 * j + 1]);
    return to_bin(q, -cfg_.joint_limit, cfg_.joint_limit, cfg_.joint_bins);
}

int Discretizer::attention(const Observation& o) {
    int bits = 0;
    for (int k = 0; k < kNumObjects; ++k)
        if (o.visible(static_cast<TrackedObject>(k))) bits |= 1 << k;
    return bits;
}

double normalized_entropy(std::span<const std::int64_t> counts) {
    if (counts.size() < 2) throw std::invalid_argument("normalized_entropy: need at least two bins");
    double n = 0.0;
    for (auto c : counts) {
        if (c < 0) throw std::invalid_argument("normalized_entropy: negative count");
        n += static_cast<double>(c);
    }
    if (n == 0.0) throw std::invalid_argument("normalized_entropy: no samples");
    double h = 0.0;
    for (auto c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    return std::clamp(100.0 * h / std::log(static_cast<double>(counts.size())), 0.0, 100.0);
}

double normalized_entropy(std::span<const int> bin_of_sample, int num_bins) {
    if (num_bins < 2) throw std::invalid_argument("normalized_entropy: need at least two bins");
    std::vector<std::int64_t> counts(num_bins, 0);
    for (int b : bin_of_sample) {
        if (b < 0 || b >= num_bins) throw std::invalid_argument("normalized_entropy: bin out of range");
        ++counts[b];
    }
    return normalized_entropy(counts);
}

BehaviorHistogram::BehaviorHistogram(const Discretizer& d)
    : location(d.location_bins(), 0), orientation(d.orientation_bins(), 0), attention(d.attention_bins(), 0) {
    for (auto& j : joints) j.assign(d.joint_bins(), 0);
}

void BehaviorHistogram::add(const Observation& o, const Discretizer& d) {
    ++location[d.location(o)];
    ++orientation[d.orientation(o)];
    ++attention[Discretizer::attention(o)];
    for (int j = 0; j < 4; ++j) ++joints[j][d.joint(o, j)];
}

void BehaviorHistogram::merge(const BehaviorHistogram& other) {
    auto acc = [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
        if (a.size() != b.size()) throw std::invalid_argument("BehaviorHistogram: bin layouts differ");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(location, other.location);
    acc(orientation, other.orientation);
    acc(attention, other.attention);
    for (int j = 0; j < 4; ++j) acc(joints[j], other.joints[j]);
}

std::int64_t BehaviorHistogram::samples() const {
    std::int64_t n = 0;
    for (auto c : orientation) n += c;
    return n;
}

EntropyReport behavior_entropy(const BehaviorHistogram& h) {
    EntropyReport r;
    r.location = normalized_entropy(h.location);
    r.orientation = normalized_entropy(h.orientation);
    r.attention = normalized_entropy(h.attention);
    for (const auto& j : h.joints) r.pose += normalized_entropy(j) / 4.0;
    return r;
}

Participation participation(Branch branch, std::span<const FsmEvent> events) {
    Participation p;
    p.branch = branch;
    switch (branch) {
        case Branch::Independent: return p;
        case Branch::Hide:
            for (const auto& e : events) p.value += e.kind == EventKind::HideFound ? 1.0 : 0.0;
            p.counted = true;
            return p;
        case Branch::Roll:
            for (const auto& e : events) p.value += (e.kind == EventKind::Hit && e.phase == Phase::Roll) ? 1.0 : 0.0;
            p.counted = true;
            return p;
        case Branch::Chase: {
            int throws = 0, watched = 0;
            for (const auto& e : events)
                if (e.kind == EventKind::Throw) {
                    ++throws;
                    watched += e.arg != 0 ? 1 : 0;
                }
            p.counted = throws > 0;
            p.value = throws > 0 ? static_cast<double>(watched) / throws : 0.0;
            return p;
        }
    }
    return p;
}

Participation participation(const EpisodeRecord& ep) { return participation(ep.branch, ep.events); }

EpisodeSummary summarize(const EpisodeRecord& ep, const Discretizer& d) {
    EpisodeSummary s{ep.index, ep.branch, ep.flag.responsive, 0.0, participation(ep), BehaviorHistogram(d)};
    for (const auto& o : ep.observations) s.behavior.add(o, d);
    for (float r : ep.rewards) s.reward_sum += r;
    return s;
}

ActivationStats activation_stats(std::span<const Branch> branches) {
    ActivationStats a;
    a.episodes = static_cast<std::int64_t>(branches.size());
    if (branches.empty()) return a;
    for (Branch b : branches) a.proportion[static_cast<int>(b)] += 1.0;
    for (double& p : a.proportion) p /= static_cast<double>(branches.size());
    return a;
}

MetricsRow aggregate(std::span<const EpisodeSummary> window) {
    if (window.empty()) throw std::invalid_argument("aggregate: empty window");
    MetricsRow row;
    row.first_episode = window.front().index;
    row.last_episode = window.back().index;
    BehaviorHistogram h = window.front().behavior;
    for (std::size_t i = 1; i < window.size(); ++i) h.merge(window[i].behavior);
    row.entropy = behavior_entropy(h);
    std::vector<Branch> branches;
    std::array<double, 3> sum{};
    std::array<int, 3> n{};
    double reward = 0.0;
    for (const auto& s : window) {
        branches.push_back(s.branch);
        reward += s.reward_sum;
        if (s.part.counted && s.part.branch != Branch::Independent) {
            const int k = static_cast<int>(s.part.branch) - 1;
            sum[k] += s.part.value;
            ++n[k];
        }
    }
    row.activation = activation_stats(branches);
    for (int k = 0; k < 3; ++k) row.participation[k] = n[k] > 0 ? sum[k] / n[k] : std::numeric_limits<double>::quiet_NaN();
    row.mean_reward = reward / static_cast<double>(window.size());
    return row;
}

namespace {

const char* const kMetricsColumns[] = {
    "episode.first", "episode.last",    "entropy.location", "entropy.orientation", "entropy.pose",
    "entropy.attention", "act.hide",    "act.roll",         "act.chase",           "act.independent",
    "part.hide",     "part.roll",       "part.chase",       "reward.mean"};

}  // namespace

void write_metrics_header(std::ostream& os) {
    bool first = true;
    for (const char* c : kMetricsColumns) {
        os << (first ? "" : ",") << c;
        first = false;
    }
    os << '\n';
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
    std::ostringstream ss;
    ss << std::setprecision(9);
    const auto& a = r.activation.proportion;
    ss << r.first_episode << ',' << r.last_episode << ',' << r.entropy.location << ',' << r.entropy.orientation << ','
       << r.entropy.pose << ',' << r.entropy.attention << ',' << a[1] << ',' << a[2] << ',' << a[3] << ',' << a[0];
    for (double p : r.participation) {
        ss << ',';
        if (std::isnan(p))
            ss << "nan";
        else
            ss << p;
    }
    ss << ',' << r.mean_reward << '\n';
    os << ss.str();
}

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("metrics csv: empty file");
    std::map<std::string, int> col;
    {
        std::stringstream ss(line);
        std::string name;
        for (int i = 0; std::getline(ss, name, ','); ++i) col[name] = i;
    }
    for (const char* c : kMetricsColumns)
        if (!col.count(c)) throw FormatError(std::string("metrics csv: missing column ") + c);
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() < col.size()) throw FormatError("metrics csv: short row");
        auto num = [&](const char* c) { return std::stod(f[col.at(c)]); };
        MetricsRow r;
        r.first_episode = static_cast<std::int64_t>(num("episode.first"));
        r.last_episode = static_cast<std::int64_t>(num("episode.last"));
        r.entropy = {num("entropy.location"), num("entropy.orientation"), num("entropy.pose"), num("entropy.attention")};
        r.activation.proportion = {num("act.independent"), num("act.hide"), num("act.roll"), num("act.chase")};
        r.activation.episodes = r.last_episode - r.first_episode + 1;
        r.participation = {num("part.hide"), num("part.roll"), num("part.chase")};
        r.mean_reward = num("reward.mean");
        rows.push_back(r);
    }
    return rows;
}

// ---- validation sets ----

void ValidationSet::validate() const {
    if (burn_in < 0 || horizon < 1) throw std::invalid_argument("ValidationSet: bad burn-in or horizon");
    if (layout != layout_hash()) throw FormatError("ValidationSet: observation layout hash mismatch");
    for (const auto& s : segments)
        if (static_cast<int>(s.observations.size()) != burn_in + horizon ||
            s.actions.size() != s.observations.size())
            throw std::invalid_argument("ValidationSet: segment length differs from burn-in + horizon");
}

SegmentReservoir::SegmentReservoir(int capacity, int length, std::uint64_t seed)
    : capacity_(capacity), length_(length), rng_(seed) {
    if (capacity < 1 || length < 1) throw std::invalid_argument("SegmentReservoir: capacity and length must be >= 1");
}

void SegmentReservoir::offer(const EpisodeRecord& ep) {
    for (int start = 0; start + length_ <= ep.length(); ++start, ++seen_) {
        if (static_cast<int>(kept_.size()) < capacity_) {
            kept_.push_back(ep.window(start, length_));
            continue;
        }
        const std::int64_t j = std::uniform_int_distribution<std::int64_t>(0, seen_)(rng_);
        if (j < capacity_) kept_[static_cast<std::size_t>(j)] = ep.window(start, length_);
    }
}

ValidationSet SegmentReservoir::finish(Provenance p, int burn_in) const {
    if (length_ <= burn_in) throw std::invalid_argument("SegmentReservoir: segments shorter than burn-in");
    if (static_cast<int>(kept_.size()) < capacity_)
        throw std::invalid_argument("SegmentReservoir: only " + std::to_string(kept_.size()) + " of " +
                                    std::to_string(capacity_) + " segments available");
    ValidationSet v;
    v.provenance = std::move(p);
    v.burn_in = burn_in;
    v.horizon = length_ - burn_in;
    v.segments = kept_;
    return v;
}

ValidationSet build_validation_set(std::span<const EpisodeRecord> episodes, int burn_in, Provenance p, Rng& rng,
                                   int count) {
    const int length = burn_in + kValidationHorizon;
    SegmentReservoir res(count, length, rng());
    for (const auto& ep : episodes) res.offer(ep);
    return res.finish(std::move(p), burn_in);
}

namespace {

constexpr char kSetMagic[9] = "INFVSET1";

void write_state(std::ostream& os, const WorldModelState& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.h.size()));
    write_array(os, s.h.data(), s.h.size());
    write_array(os, s.c.data(), s.c.size());
    write_array(os, s.b.data(), s.b.size());
}

WorldModelState read_state(std::istream& is) {
    WorldModelState s;
    const auto n = read_pod<std::uint32_t>(is);
    if (n > (1u << 20)) throw FormatError("validation set: state width out of range");
    s.h.resize(n);
    s.c.resize(n);
    read_array(is, s.h.data(), n);
    read_array(is, s.c.data(), n);
    read_array(is, s.b.data(), s.b.size());
    return s;
}

}  // namespace

void save_validation_set(const ValidationSet& v, const std::string& path) {
    v.validate();
    write_atomically(path, [&](std::ostream& os) {
        write_magic(os, kSetMagic);
        write_pod<std::uint64_t>(os, v.layout);
        write_string(os, v.provenance.source);
        write_string(os, v.provenance.reward);
        write_pod<std::uint64_t>(os, v.provenance.seed);
        write_pod<double>(os, v.provenance.contingency_p);
        write_pod<std::int32_t>(os, v.burn_in);
        write_pod<std::int32_t>(os, v.horizon);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(v.segments.size()));
        for (const auto& s : v.segments) {
            write_state(os, s.initial);
            for (const auto& o : s.observations) write_array(os, o.values.data(), o.values.size());
            for (Action a : s.actions) write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(a));
        }
    });
}

ValidationSet load_validation_set(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    expect_magic(is, kSetMagic, "validation set " + path);
    ValidationSet v;
    v.layout = read_pod<std::uint64_t>(is);
    if (v.layout != layout_hash()) throw FormatError("validation set " + path + ": observation layout hash mismatch");
    v.provenance.source = read_string(is);
    v.provenance.reward = read_string(is);
    v.provenance.seed = read_pod<std::uint64_t>(is);
    v.provenance.contingency_p = read_pod<double>(is);
    v.burn_in = read_pod<std::int32_t>(is);
    v.horizon = read_pod<std::int32_t>(is);
    const auto n = read_pod<std::uint32_t>(is);
    if (v.burn_in < 0 || v.horizon < 1 || v.burn_in + v.horizon > 100000)
        throw FormatError("validation set " + path + ": bad segment length");
    const int len = v.burn_in + v.horizon;
    v.segments.resize(n);
    for (auto& s : v.segments) {
        s.initial = read_state(is);
        s.observations.resize(len);
        s.actions.resize(len);
        for (auto& o : s.observations) read_array(is, o.values.data(), o.values.size());
        for (auto& a : s.actions) {
            const auto x = read_pod<std::uint8_t>(is);
            if (x >= kNumActions) throw FormatError("validation set " + path + ": action out of range");
            a = static_cast<Action>(x);
        }
    }
    v.validate();
    return v;
}

namespace {

constexpr std::size_t kEvalChunk = 250;

template <class Fn>
void for_each_trace(const WorldModel& wm, const ValidationSet& set, Fn&& fn) {
    set.validate();
    if (set.segments.empty()) throw std::invalid_argument("validation set has no segments");
    const std::span<const Sequence> all(set.segments);
    for (std::size_t i = 0; i < all.size(); i += kEvalChunk) {
        const auto chunk = all.subspan(i, std::min(kEvalChunk, all.size() - i));
        for (const auto& t : rollout_losses(wm, chunk, set.burn_in, true)) fn(t);
    }
}

}  // namespace

double evaluate_on_set(const WorldModel& wm, const ValidationSet& set) {
    double sum = 0.0;
    for_each_trace(wm, set, [&](const LossTrace& t) { sum += t.total; });
    return sum / static_cast<double>(set.segments.size());
}

RoundRobin round_robin(std::span<const NamedModel> models, std::span<const NamedSet> sets) {
    RoundRobin rr;
    for (const auto& s : sets) {
        if (!s.set) throw std::invalid_argument("round_robin: null set " + s.name);
        if (s.set->layout != layout_hash()) throw FormatError("round_robin: layout hash mismatch in set " + s.name);
        rr.sets.push_back(s.name);
    }
    for (const auto& m : models) {
        if (!m.model) throw std::invalid_argument("round_robin: null model " + m.name);
        rr.models.push_back(m.name);
        std::vector<double> row;
        std::vector<bool> self;
        for (const auto& s : sets) {
            row.push_back(evaluate_on_set(*m.model, *s.set));
            self.push_back(!m.source_tag.empty() && m.source_tag == s.source_tag);
        }
        rr.loss.push_back(std::move(row));
        rr.self.push_back(std::move(self));
    }
    return rr;
}

void write_round_robin_csv(std::ostream& os, const RoundRobin& rr) {
    std::ostringstream ss;
    ss << std::setprecision(9) << "model";
    for (const auto& s : rr.sets) ss << ',' << s;
    ss << ",self_set\n";
    for (std::size_t m = 0; m < rr.models.size(); ++m) {
        ss << rr.models[m];
        std::string self;
        for (std::size_t v = 0; v < rr.sets.size(); ++v) {
            ss << ',' << rr.loss[m][v];
            if (rr.self[m][v]) self = rr.sets[v];
        }
        ss << ',' << self << '\n';
    }
    os << ss.str();
}

LossDecomposition decompose_loss(std::span<const float> per_dim) {
    if (per_dim.size() % kBeliefDim != 0) throw std::invalid_argument("decompose_loss: length is not a multiple of 38");
    LossDecomposition d;
    for (std::size_t i = 0; i < per_dim.size(); ++i)
        d.group[static_cast<int>(belief_group(static_cast<int>(i % kBeliefDim)))] += per_dim[i];
    return d;
}

LossDecomposition decompose_on_set(const WorldModel& wm, const ValidationSet& set) {
    LossDecomposition d;
    for_each_trace(wm, set, [&](const LossTrace& t) {
        const LossDecomposition one = decompose_loss(t.per_dim);
        for (int g = 0; g < kNumGroups; ++g) d.group[g] += one.group[g];
    });
    for (double& g : d.group) g /= static_cast<double>(set.segments.size());
    return d;
}

}  // namespace infant
