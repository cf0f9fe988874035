#include "infant/trajectory.hpp"

#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "infant/binio.hpp"

namespace infant {

namespace {

constexpr char kMagic[9] = "INFTRAJ1";
constexpr std::uint32_t kBlockStart = 0x45504953;  // "SIPE"
constexpr std::uint32_t kBlockEnd = 0x454e4f44;    // "DONE"

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, std::uint32_t state_width)
    : os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    header_.layout = layout_hash();
    header_.state_width = state_width;
    write_magic(os_, kMagic);
    write_pod(os_, header_.version);
    write_pod(os_, header_.layout);
    write_pod(os_, header_.state_width);
    os_.flush();
}

void TrajectoryWriter::append(const EpisodeRecord& ep) {
    ep.validate();
    const int T = ep.length();
    const bool has_rewards = !ep.rewards.empty(), has_policy = !ep.logprobs.empty();
    std::ostringstream buf(std::ios::binary);
    write_pod(buf, kBlockStart);
    write_pod<std::int64_t>(buf, ep.index);
    write_pod<std::uint64_t>(buf, ep.seed);
    write_pod<std::uint8_t>(buf, ep.flag.responsive ? 1 : 0);
    write_pod<double>(buf, ep.flag.p);
    write_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(ep.branch));
    write_pod<std::uint8_t>(buf, has_rewards ? 1 : 0);
    write_pod<std::uint8_t>(buf, has_policy ? 1 : 0);
    write_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(T));
    for (int t = 0; t < T; ++t) {
        write_array(buf, ep.observations[t].values.data(), kObsDim);
        write_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(ep.actions[t]));
        write_pod<float>(buf, has_rewards ? ep.rewards[t] : 0.0f);
        write_pod<float>(buf, has_policy ? ep.logprobs[t] : 0.0f);
        write_pod<float>(buf, has_policy ? ep.values[t] : 0.0f);
        const WorldModelState& s = ep.states[t];
        write_array(buf, s.b.data(), kBeliefDim);
        if (header_.state_width > 0) {
            if (s.h.size() != header_.state_width || s.c.size() != header_.state_width)
                throw std::invalid_argument("trajectory log: recurrent state width differs from the header");
            write_array(buf, s.h.data(), s.h.size());
            write_array(buf, s.c.data(), s.c.size());
        }
    }
    write_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(ep.events.size()));
    for (const auto& e : ep.events) {
        write_pod<std::int32_t>(buf, e.tick);
        write_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(e.kind));
        write_pod<std::uint8_t>(buf, static_cast<std::uint8_t>(e.phase));
        write_pod<std::uint8_t>(buf, e.arg);
    }
    write_pod(buf, kBlockEnd);
    const std::string bytes = buf.str();
    os_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os_.flush();
    if (!os_) throw std::runtime_error("trajectory log: write failed");
}

namespace {

EpisodeRecord read_block(std::istream& is, const TrajectoryHeader& h) {
    if (read_pod<std::uint32_t>(is) != kBlockStart) throw FormatError("trajectory log: bad block marker");
    EpisodeRecord ep;
    ep.index = read_pod<std::int64_t>(is);
    ep.seed = read_pod<std::uint64_t>(is);
    ep.flag.responsive = read_pod<std::uint8_t>(is) != 0;
    ep.flag.p = read_pod<double>(is);
    const auto branch = read_pod<std::uint8_t>(is);
    if (branch >= kNumBranches) throw FormatError("trajectory log: branch out of range");
    ep.branch = static_cast<Branch>(branch);
    const bool has_rewards = read_pod<std::uint8_t>(is) != 0;
    const bool has_policy = read_pod<std::uint8_t>(is) != 0;
    const auto T = read_pod<std::uint32_t>(is);
    if (T > 10'000'000) throw FormatError("trajectory log: tick count out of range");
    ep.observations.resize(T);
    ep.actions.resize(T);
    ep.states.resize(T);
    if (has_rewards) ep.rewards.resize(T);
    if (has_policy) {
        ep.logprobs.resize(T);
        ep.values.resize(T);
    }
    for (std::uint32_t t = 0; t < T; ++t) {
        read_array(is, ep.observations[t].values.data(), kObsDim);
        const auto a = read_pod<std::uint8_t>(is);
        if (a >= kNumActions) throw FormatError("trajectory log: action out of range");
        ep.actions[t] = static_cast<Action>(a);
        const float r = read_pod<float>(is), lp = read_pod<float>(is), v = read_pod<float>(is);
        if (has_rewards) ep.rewards[t] = r;
        if (has_policy) {
            ep.logprobs[t] = lp;
            ep.values[t] = v;
        }
        WorldModelState& s = ep.states[t];
        read_array(is, s.b.data(), kBeliefDim);
        if (h.state_width > 0) {
            s.h.resize(h.state_width);
            s.c.resize(h.state_width);
            read_array(is, s.h.data(), h.state_width);
            read_array(is, s.c.data(), h.state_width);
        }
    }
    const auto n_events = read_pod<std::uint32_t>(is);
    if (n_events > 10'000'000) throw FormatError("trajectory log: event count out of range");
    ep.events.resize(n_events);
    for (auto& e : ep.events) {
        e.tick = read_pod<std::int32_t>(is);
        const auto kind = read_pod<std::uint8_t>(is), phase = read_pod<std::uint8_t>(is);
        if (kind >= kNumEventKinds || phase > static_cast<int>(Phase::Unresponsive))
            throw FormatError("trajectory log: event out of range");
        e.kind = static_cast<EventKind>(kind);
        e.phase = static_cast<Phase>(phase);
        e.arg = read_pod<std::uint8_t>(is);
    }
    if (read_pod<std::uint32_t>(is) != kBlockEnd) throw FormatError("trajectory log: bad block end");
    return ep;
}

}  // namespace

TrajectoryLog read_trajectory_log(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    expect_magic(is, kMagic, "trajectory log " + path.string());
    TrajectoryLog log;
    log.header.version = read_pod<std::uint32_t>(is);
    if (log.header.version != kTrajectoryVersion) throw FormatError("trajectory log: unsupported version");
    log.header.layout = read_pod<std::uint64_t>(is);
    if (log.header.layout != layout_hash()) throw FormatError("trajectory log: observation layout hash mismatch");
    log.header.state_width = read_pod<std::uint32_t>(is);
    while (is.peek() != std::char_traits<char>::eof()) {
        try {
            log.episodes.push_back(read_block(is, log.header));
        } catch (const FormatError&) {
            // Only a cut-off final block is tolerated.
            if (!is.eof()) throw;
            log.truncated = true;
            break;
        }
    }
    return log;
}

void export_trajectory_csv(const TrajectoryLog& log, std::ostream& os) {
    const std::uint32_t w = log.header.state_width;
    std::ostringstream hs;
    hs << "episode,tick,responsive,branch,action,reward,logprob,value";
    for (int i = 0; i < kObsDim; ++i) hs << ",o" << i;
    for (int j = 0; j < kBeliefDim; ++j) hs << ",b" << j;
    for (std::uint32_t i = 0; i < w; ++i) hs << ",h" << i;
    for (std::uint32_t i = 0; i < w; ++i) hs << ",c" << i;
    os << hs.str() << '\n';
    for (const auto& ep : log.episodes) {
        for (int t = 0; t < ep.length(); ++t) {
            std::ostringstream row;
            row << std::setprecision(std::numeric_limits<float>::max_digits10);
            row << ep.index << ',' << t << ',' << (ep.flag.responsive ? 1 : 0) << ',' << branch_name(ep.branch) << ','
                << to_int(ep.actions[t]) << ',' << (ep.rewards.empty() ? 0.0f : ep.rewards[t]) << ','
                << (ep.logprobs.empty() ? 0.0f : ep.logprobs[t]) << ',' << (ep.values.empty() ? 0.0f : ep.values[t]);
            for (float v : ep.observations[t].values) row << ',' << v;
            for (float v : ep.states[t].b) row << ',' << v;
            for (float v : ep.states[t].h) row << ',' << v;
            for (float v : ep.states[t].c) row << ',' << v;
            os << row.str() << '\n';
        }
    }
}

}  // namespace infant
