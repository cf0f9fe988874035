#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <vector>

#include "infant/episode.hpp"

namespace infant {

// Append-only episode log. The file header carries the observation layout
// hash and the recurrent width (0 when h and c are not stored). Each episode
// is a self-delimiting block of fixed-width tick records followed by its
// events, so a log cut short still yields every finished episode.
inline constexpr std::uint32_t kTrajectoryVersion = 1;

struct TrajectoryHeader {
    std::uint32_t version = kTrajectoryVersion;
    std::uint64_t layout = 0;
    std::uint32_t state_width = 0;  // floats in h (and in c); 0 when not logged
};

class TrajectoryWriter {
public:
    // Truncates the file and writes the header.
    TrajectoryWriter(const std::filesystem::path& path, std::uint32_t state_width);

    void append(const EpisodeRecord& ep);
    std::uint32_t state_width() const { return header_.state_width; }

private:
    std::ofstream os_;
    TrajectoryHeader header_;
};

struct TrajectoryLog {
    TrajectoryHeader header;
    std::vector<EpisodeRecord> episodes;
    bool truncated = false;  // trailing partial block ignored
};

// Throws FormatError on a bad header or layout mismatch.
TrajectoryLog read_trajectory_log(const std::filesystem::path& path);

// One row per tick; floats use round-trip precision.
void export_trajectory_csv(const TrajectoryLog& log, std::ostream& os);

}  // namespace infant
