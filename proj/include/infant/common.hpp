#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace infant {

using Rng = std::mt19937_64;

constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// Floor-plane vector: (x, z) in world coordinates.
struct Vec2 {
    double x = 0.0;
    double z = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, z + o.z}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, z - o.z}; }
    Vec2 operator*(double s) const { return {x * s, z * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; z += o.z; return *this; }
    bool operator==(const Vec2&) const = default;

    double dot(const Vec2& o) const { return x * o.x + z * o.z; }
    double cross(const Vec2& o) const { return x * o.z - z * o.x; }
    double norm() const { return std::sqrt(x * x + z * z); }
};

// World vector with y pointing up.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    bool operator==(const Vec3&) const = default;

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec2 floor() const { return {x, z}; }
};

inline Vec3 lift(const Vec2& p, double y) { return {p.x, y, p.z}; }

// Yaw convention: yaw 0 faces +z, positive yaw turns left (towards +x).
inline Vec2 heading(double yaw) { return {std::sin(yaw), std::cos(yaw)}; }
inline Vec2 left_of(double yaw) { return heading(yaw + kPi / 2.0); }
inline double yaw_towards(const Vec2& dir) { return std::atan2(dir.x, dir.z); }

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// Unsigned angle between a yaw heading and a floor-plane direction, in [0, pi].
inline double angle_off_heading(double yaw, const Vec2& dir) {
    const Vec2 f = heading(yaw);
    return std::abs(std::atan2(f.cross(dir), f.dot(dir)));
}

inline bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }
inline bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.z); }

// FNV-1a, used for layout and architecture fingerprints written into file headers.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent named RNG stream derived from a master seed.
inline Rng make_stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index = 0) {
    const std::uint64_t tag = fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace infant
