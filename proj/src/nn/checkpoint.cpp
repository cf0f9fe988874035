#include "infant/nn/checkpoint.hpp"

#include <fstream>

#include "infant/binio.hpp"

namespace infant::nn {

namespace {
constexpr char kMagic[9] = "INFCKPT1";
}

void write_params(std::ostream& os, const ParamSet<float>& params) {
    write_magic(os, kMagic);
    write_pod<std::uint32_t>(os, kCheckpointVersion);
    write_pod<std::uint64_t>(os, params.spec_hash());
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
        write_string(os, params.name(i));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params[i].rows));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params[i].cols));
        write_array(os, params[i].data.data(), params[i].size());
    }
}

ParamSet<float> read_params(std::istream& is, std::optional<std::uint64_t> expected_hash) {
    expect_magic(is, kMagic, "checkpoint");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto hash = read_pod<std::uint64_t>(is);
    if (expected_hash && *expected_hash != hash) throw FormatError("checkpoint: architecture hash mismatch");
    const auto count = read_pod<std::uint32_t>(is);
    if (count > 100000) throw FormatError("checkpoint: implausible tensor count");
    ParamSet<float> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is, 4096);
        const auto rows = read_pod<std::uint32_t>(is);
        const auto cols = read_pod<std::uint32_t>(is);
        if (rows > (1u << 24) || cols > (1u << 24) || static_cast<std::uint64_t>(rows) * cols > (1ull << 28))
            throw FormatError("checkpoint: implausible shape for " + name);
        Tensor<float> t(static_cast<int>(rows), static_cast<int>(cols));
        read_array(is, t.data.data(), t.size());
        out.add(std::move(name), std::move(t));
    }
    if (out.spec_hash() != hash) throw FormatError("checkpoint: header hash does not match tensor table");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params) {
    write_atomically(path, [&](std::ostream& os) { write_params(os, params); });
}

ParamSet<float> load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_params(is, expected_hash);
}

void copy_values(ParamSet<float>& dst, const ParamSet<float>& src) {
    for (int i = 0; i < dst.size(); ++i) {
        const int j = src.require(dst.name(i));
        if (!dst[i].same_shape(src[j])) throw FormatError("copy_values: shape mismatch for " + dst.name(i));
        dst[i] = src[j];
    }
}

}  // namespace infant::nn
