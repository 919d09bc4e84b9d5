#include <gtest/gtest.h>

#include <cmath>

#include "pddsparse/stochastics.hpp"

using namespace pddsparse;

namespace {

ExitRecord run(const RectRegion& r, Vec2 start, const ProblemSpec& p, double h, StreamId id) {
    NormalStream s(id);
    return simulate_exit(r, start, p, h, 100'000'000, s);
}

}  // namespace

TEST(Fet, Circle) {
    EXPECT_EQ(fet_circle(1.0, 0.0), 0.5);
    EXPECT_EQ(fet_circle(2.0, 2.0), 0.0);
    EXPECT_EQ(fet_circle(2.0, 1.0), 1.5);
    EXPECT_THROW(fet_circle(1.0, 2.0), ParameterError);
}

// Reference values: hyperbolic single series in 30-digit arithmetic.
TEST(Fet, RectSeriesAgainstHyperbolicSeries) {
    EXPECT_NEAR(fet_rect_series(0.5, 0.5, {0, 0}), 0.1473427065630276, 1e-7);
    EXPECT_NEAR(fet_rect_series(1.0, 0.5, {0, 0}), 0.2277436642545486, 1e-7);
    EXPECT_NEAR(fet_rect_series(0.5, 0.25, {0, 0}), 0.05693591606363715, 1e-7);
    EXPECT_NEAR(fet_rect_series(1.0, 0.5, {-0.7, 0.3}), 0.09975363018080018, 1e-7);
    EXPECT_NEAR(fet_rect_series(2.0, 1.0, {1.4, -0.6}), 0.3990145207232007, 1e-6);
}

TEST(Fet, RectSeriesVanishesOnBoundary) {
    for (double y : {-0.4, 0.0, 0.17}) EXPECT_NEAR(fet_rect_series(1.0, 0.5, {1.0, y}), 0.0, 1e-6);
    for (double x : {-0.9, 0.3}) EXPECT_NEAR(fet_rect_series(1.0, 0.5, {x, -0.5}), 0.0, 1e-6);
}

TEST(Fet, RectSeriesScaling) {
    for (double L : {2.0, 3.0, 0.5}) {
        const double base = fet_rect_series(1.0, 0.5, {0.3, -0.1});
        EXPECT_NEAR(fet_rect_series(L, 0.5 * L, {0.3 * L, -0.1 * L}), L * L * base, 1e-13 * L * L);
    }
}

TEST(Simulate, NoPotentialNoSource) {
    const RectRegion r{-1, 1, -1, 1};
    const ProblemSpec p;
    for (std::uint32_t k = 0; k < 200; ++k) {
        const ExitRecord e = run(r, {0.2, -0.3}, p, 1e-3, {5, 0, k, 0});
        EXPECT_EQ(e.Y, 1.0);
        EXPECT_EQ(e.Z, 0.0);
        EXPECT_FALSE(e.truncated);
        EXPECT_GE(e.side, 0);
    }
}

TEST(Simulate, ExitPointOnCrossedSide) {
    const RectRegion r{-1, 2, -0.5, 1};
    const ProblemSpec p;
    for (std::uint32_t k = 0; k < 500; ++k) {
        const ExitRecord e = run(r, {0.0, 0.0}, p, 1e-2, {9, 1, k, 0});
        const double coord[4] = {e.point.x - 2.0, e.point.y - 1.0, e.point.x + 1.0, e.point.y + 0.5};
        ASSERT_EQ(coord[e.side], 0.0);
        ASSERT_GE(e.point.x, -1.0);
        ASSERT_LE(e.point.x, 2.0);
        ASSERT_GE(e.point.y, -0.5);
        ASSERT_LE(e.point.y, 1.0);
    }
}

TEST(Simulate, CornerTieGoesToLowerOrdinal) {
    const RectRegion r{0, 1, 0, 1};
    const auto c = r.crossing({0.5, 0.5}, {1.5, 1.5});
    EXPECT_EQ(c.side, static_cast<int>(index_of(Side::E)));
    EXPECT_EQ(c.fraction, 0.5);
    const auto d = r.crossing({0.5, 0.5}, {-0.5, -0.5});
    EXPECT_EQ(d.side, static_cast<int>(index_of(Side::W)));
}

TEST(Simulate, Deterministic) {
    const RectRegion r{-1, 1, -1, 1};
    ProblemSpec p;
    p.potential = [](Vec2 x) { return -0.5 - x.x * x.x; };
    p.source = [](Vec2 x) { return x.y; };
    const ExitRecord a = run(r, {0.1, 0.1}, p, 1e-3, {42, 3, 17, 2});
    const ExitRecord b = run(r, {0.1, 0.1}, p, 1e-3, {42, 3, 17, 2});
    EXPECT_EQ(a.point.x, b.point.x);
    EXPECT_EQ(a.point.y, b.point.y);
    EXPECT_EQ(a.tau, b.tau);
    EXPECT_EQ(a.Y, b.Y);
    EXPECT_EQ(a.Z, b.Z);
    EXPECT_EQ(a.steps, b.steps);
}

// Doubling the region with timestep 4h reproduces the doubled path exactly.
TEST(Simulate, ScalingPathByPath) {
    const RectRegion r{-0.5, 0.5, -0.25, 0.75};
    const RectRegion R{-1.0, 1.0, -0.5, 1.5};
    const ProblemSpec p;
    for (std::uint32_t k = 0; k < 300; ++k) {
        const ExitRecord a = run(r, {0.1, 0.2}, p, 1e-4, {1, 0, k, 0});
        const ExitRecord b = run(R, {0.2, 0.4}, p, 4e-4, {1, 0, k, 0});
        ASSERT_EQ(b.steps, a.steps);
        ASSERT_EQ(b.side, a.side);
        ASSERT_EQ(b.tau, 4.0 * a.tau);
        ASSERT_EQ(b.point.x, 2.0 * a.point.x);
        ASSERT_EQ(b.point.y, 2.0 * a.point.y);
    }
}

TEST(Simulate, NegativePotentialShrinksScore) {
    const RectRegion r{-1, 1, -1, 1};
    ProblemSpec plain, damped;
    damped.potential = [](Vec2) { return -1.0; };
    const auto g = [](Vec2 x) { return 1.0 + x.x * x.x; };
    for (std::uint32_t k = 0; k < 200; ++k) {
        const ExitRecord a = run(r, {0.3, 0.0}, plain, 1e-3, {3, 0, k, 0});
        const ExitRecord b = run(r, {0.3, 0.0}, damped, 1e-3, {3, 0, k, 0});
        ASSERT_LE(std::abs(g(b.point) * b.Y), std::abs(g(a.point) * a.Y));
    }
}

TEST(Simulate, TruncationFlag) {
    const RectRegion r{-1, 1, -1, 1};
    NormalStream s({1, 0, 0, 0});
    const ExitRecord e = simulate_exit(r, {0, 0}, ProblemSpec{}, 1e-6, 10, s);
    EXPECT_TRUE(e.truncated);
    EXPECT_EQ(e.steps, 10u);
}

TEST(MeanFet, DiscCenter) {
    const McParams p{1e-4, 20000, 20240601, 100'000'000, 0};
    const FetEstimate e = mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {0, 0}, p);
    EXPECT_EQ(e.used, 20000u);
    EXPECT_NEAR(e.mean, 0.5, 3 * e.standard_error + 2 * std::sqrt(p.timestep));
}

TEST(MeanFet, RectangleMatchesSeries) {
    const McParams p{1e-4, 20000, 7, 100'000'000, 0};
    const FetEstimate e = mean_fet_mc(RectRegion{-1, 1, -0.5, 0.5}, {0, 0}, p);
    EXPECT_NEAR(e.mean, fet_rect_series(1.0, 0.5, {0, 0}), 3 * e.standard_error + 2 * std::sqrt(p.timestep));
}

TEST(MeanFet, AboveInscribedCircleNearBoundary) {
    const double a = 2.5, dz = 0.25;
    const McParams p{1e-4, 4000, 11, 100'000'000, 0};
    const FetEstimate e = mean_fet_mc(RectRegion{-a, a, -a, a}, {a - dz, 0}, p);
    EXPECT_GT(e.mean, fet_circle(a, a - dz));
}

TEST(MeanFet, ThreadCountDoesNotMatter) {
    McParams p{1e-3, 3000, 5, 100'000'000, 1};
    const FetEstimate one = mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {0.2, 0}, p);
    p.threads = 4;
    const FetEstimate four = mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {0.2, 0}, p);
    EXPECT_EQ(one.mean, four.mean);
    EXPECT_EQ(one.standard_error, four.standard_error);
}

TEST(MeanFet, RejectsBadInput) {
    EXPECT_THROW(mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {2, 0}, McParams{}), ParameterError);
    EXPECT_THROW(mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {0, 0}, McParams{0.0, 10, 1, 10, 0}), ParameterError);
}
