#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>

#include "infant/nn/tensor.hpp"

namespace infant::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic, version, spec hash, count, then per tensor name/rows/cols/float32 data.
void write_params(std::ostream& os, const ParamSet<float>& params);
// Throws FormatError on corruption or when expected_hash is given and differs.
ParamSet<float> read_params(std::istream& is, std::optional<std::uint64_t> expected_hash = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params);
ParamSet<float> load_checkpoint(const std::filesystem::path& path,
                                std::optional<std::uint64_t> expected_hash = std::nullopt);

// Copies values from src into dst by name; shapes must agree.
void copy_values(ParamSet<float>& dst, const ParamSet<float>& src);

}  // namespace infant::nn
