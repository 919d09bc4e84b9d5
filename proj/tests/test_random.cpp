#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pddsparse/random.hpp"

using namespace pddsparse;

// Known-answer vectors of the Random123 reference distribution (philox4x32, 10 rounds).
TEST(Philox, KnownAnswerZeros) {
    const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                          {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
    const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                          {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(NormalStream, SameIdSameSequence) {
    NormalStream a({7, 3, 11, 0}), b({7, 3, 11, 0});
    for (int k = 0; k < 1000; ++k) {
        const auto x = a.next(), y = b.next();
        ASSERT_EQ(x, y);
    }
}

TEST(NormalStream, DistinctIdsDiffer) {
    std::set<double> first;
    for (std::uint32_t row = 0; row < 4; ++row) {
        for (std::uint32_t traj = 0; traj < 4; ++traj) {
            for (std::uint32_t gen = 0; gen < 2; ++gen) first.insert(NormalStream({1, row, traj, gen}).next().first);
        }
    }
    EXPECT_EQ(first.size(), 32u);
}

TEST(NormalStream, Moments) {
    NormalStream s({20240601, 0, 0, 0});
    const int n = 200000;
    double sum = 0, sq = 0, q = 0;
    for (int k = 0; k < n; ++k) {
        const auto [a, b] = s.next();
        sum += a + b;
        sq += a * a + b * b;
        q += a * a * a * a;
    }
    const double m = 2.0 * n;
    EXPECT_NEAR(sum / m, 0.0, 5.0 / std::sqrt(m));
    EXPECT_NEAR(sq / m, 1.0, 5.0 * std::sqrt(2.0 / m));
    EXPECT_NEAR(q / n, 3.0, 0.1);  // fourth moment from the first component only
}
