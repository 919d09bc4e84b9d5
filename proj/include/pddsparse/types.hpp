#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pddsparse {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Row-major 2x2 matrix, used for the diffusion factor sigma(x).
struct Mat2 {
    double xx = 1.0, xy = 0.0;
    double yx = 0.0, yy = 1.0;

    constexpr Vec2 operator*(Vec2 v) const { return {xx * v.x + xy * v.y, yx * v.x + yy * v.y}; }
};

/// Patch sides, in the ordinal order used for tie-breaking corner exits.
enum class Side : std::uint8_t { E = 0, N = 1, W = 2, S = 3 };

inline constexpr std::array<Side, 4> all_sides{Side::E, Side::N, Side::W, Side::S};

inline constexpr std::string_view to_string(Side s) {
    switch (s) {
        case Side::E: return "E";
        case Side::N: return "N";
        case Side::W: return "W";
        case Side::S: return "S";
    }
    return "?";
}

inline constexpr std::size_t index_of(Side s) { return static_cast<std::size_t>(s); }

// Error types. Each module throws the narrowest one that applies.

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConditioningError : std::runtime_error {
    ConditioningError(const std::string& what, double condition)
        : std::runtime_error(what), condition_estimate(condition) {}
    double condition_estimate;
};

struct UnsupportedOperation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace pddsparse
