#pragma once

// Counter-based random streams. Every trajectory owns a stream addressed by
// (seed, row, trajectory, generation), so results never depend on which
// thread ran the trajectory or in what order.

#include <array>
#include <cstdint>
#include <utility>

#include <boost/random/normal_distribution.hpp>

namespace pddsparse {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
public:
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static constexpr counter_type generate(counter_type ctr, key_type key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr counter_type single_round(counter_type c, key_type k) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Address of one trajectory's stream.
struct StreamId {
    std::uint64_t seed = 0;
    std::uint32_t row = 0;
    std::uint32_t trajectory = 0;
    std::uint32_t generation = 0;
};

/// Uniform random bit generator over one Philox stream, 64 bits per call.
/// Counter layout: {block index, trajectory, row, generation}; key = seed.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    explicit PhiloxEngine(StreamId id)
        : key_{static_cast<std::uint32_t>(id.seed), static_cast<std::uint32_t>(id.seed >> 32)},
          trajectory_(id.trajectory),
          row_(id.row),
          generation_(id.generation) {}

    result_type operator()() {
        if (pos_ == 4) {
            block_ = Philox4x32::generate({blocks_++, trajectory_, row_, generation_}, key_);
            pos_ = 0;
        }
        const result_type v = (result_type{block_[pos_]} << 32) | block_[pos_ + 1];
        pos_ += 2;
        return v;
    }

    std::uint32_t blocks() const { return blocks_; }

private:
    Philox4x32::key_type key_;
    std::uint32_t trajectory_;
    std::uint32_t row_;
    std::uint32_t generation_;
    std::uint32_t blocks_ = 0;
    Philox4x32::counter_type block_{};
    int pos_ = 4;
};

/// Standard bivariate normal draws (ziggurat) over a Philox stream.
class NormalStream {
public:
    explicit NormalStream(StreamId id) : engine_(id) {}

    std::pair<double, double> next() {
        const double a = normal_(engine_);
        const double b = normal_(engine_);
        return {a, b};
    }

    std::uint32_t blocks() const { return engine_.blocks(); }

private:
    PhiloxEngine engine_;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace pddsparse
