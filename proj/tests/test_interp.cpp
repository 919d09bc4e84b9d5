#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pddsparse/interp.hpp"

using namespace pddsparse;

TEST(Rbf, Values) {
    EXPECT_EQ(gaussian_rbf(0.0, 2.0), 1.0);
    EXPECT_NEAR(gaussian_rbf(2.0, 2.0), std::exp(-1.0), 1e-15);
    for (double z : {0.1, 0.7, 3.3}) EXPECT_EQ(gaussian_rbf(z, 1.5), gaussian_rbf(-z, 1.5));
}

TEST(Cardinal, DeltaPropertyRbf) {
    const CardinalBasis b(equispaced_nodes(5, 1.0), 1.0, {BasisMode::gaussian_rbf, 5.0, 0.0});
    for (std::size_t j = 0; j < 5; ++j) {
        for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(b.eval(j, static_cast<double>(k)), j == k ? 1.0 : 0.0, 1e-8);
    }
}

TEST(Cardinal, DeltaPropertyRbfLongStencils) {
    for (int M : {9, 21, 27, 33}) {
        for (double c : {4.0, 5.0, 8.0}) {
            const CardinalBasis b(equispaced_nodes(M, 0.25, -1.0), 0.25, {BasisMode::gaussian_rbf, c, 0.0});
            std::vector<double> v(M);
            for (int k = 0; k < M; ++k) {
                b.eval_all(-1.0 + 0.25 * k, v);
                for (int j = 0; j < M; ++j) ASSERT_NEAR(v[j], j == k ? 1.0 : 0.0, 1e-8) << M << " " << c;
            }
        }
    }
}

TEST(Cardinal, DeltaPropertySincExact) {
    const CardinalBasis b(equispaced_nodes(12, 0.25, 3.0), 0.25, {BasisMode::sinc_limit, 5.0, 0.0});
    std::vector<double> v(12);
    for (int k = 0; k < 12; ++k) {
        b.eval_all(3.0 + 0.25 * k, v);
        for (int j = 0; j < 12; ++j) ASSERT_EQ(v[j], j == k ? 1.0 : 0.0);
    }
}

TEST(Cardinal, CenterNearSincAtMidpoint) {
    const CardinalBasis b(equispaced_nodes(9, 0.5), 0.5, {BasisMode::gaussian_rbf, 5.0, 0.0});
    EXPECT_NEAR(b.eval(4, 2.25), 2.0 / std::numbers::pi, 0.05);
}

TEST(Cardinal, PartitionOfUnity) {
    for (double c : {4.0, 5.0, 6.0, 8.0}) {
        for (int M : {7, 9, 15}) {
            const CardinalBasis b(equispaced_nodes(M, 0.25), 0.25, {BasisMode::gaussian_rbf, c, 0.0});
            EXPECT_LE(unity_defect(b, 0.0, 0.25 * (M - 1), 101), 1e-3) << "c=" << c << " M=" << M;
        }
    }
}

TEST(Cardinal, Symmetry) {
    const CardinalBasis b(equispaced_nodes(11, 1.0), 1.0, {BasisMode::gaussian_rbf, 5.0, 0.0});
    for (double z : {0.3, 2.7, 4.9}) EXPECT_NEAR(b.eval(3, z), b.eval(7, 10.0 - z), 1e-12);
}

// Tabulated evaluation against the exact high-precision solve between nodes.
TEST(Cardinal, TableMatchesExact) {
    const auto table = detail::table_cache().get(21, 5.0, 0.0);
    std::vector<double> a(21), e(21);
    for (double t = 0.0; t <= 20.0; t += 0.0371) {
        table->eval(t, a);
        table->eval_exact(t, e);
        // Near the stencil ends the cardinals swing to about 15, so scale by the Lebesgue sum.
        double lebesgue = 0.0;
        for (double v : e) lebesgue += std::abs(v);
        for (int j = 0; j < 21; ++j) ASSERT_NEAR(a[j], e[j], 1e-8 * lebesgue) << t;
    }
}

TEST(Sinc, Orthonormality) {
    EXPECT_NEAR(sinc_orthonormality_check(0, 500.0, 1e-2), 1.0, 1e-3);
    EXPECT_NEAR(sinc_orthonormality_check(1, 500.0, 1e-2), 0.0, 1e-3);
    EXPECT_NEAR(sinc_orthonormality_check(5, 500.0, 1e-2), 0.0, 1e-3);
}

TEST(Cardinal, RejectsBadStencils) {
    EXPECT_THROW(CardinalBasis({0.0}, 1.0, {}), ParameterError);
    EXPECT_THROW(CardinalBasis({0.0, 1.0, 2.5}, 1.0, {}), ParameterError);
    EXPECT_THROW(CardinalBasis(equispaced_nodes(4, 1.0), 0.0, {}), ParameterError);
}

TEST(Cardinal, ConditioningRefused) {
    // Very flat kernels on long stencils exceed the extended-precision budget.
    EXPECT_THROW(CardinalBasis(equispaced_nodes(40, 1.0), 1.0, {BasisMode::gaussian_rbf, 30.0, 0.0}),
                 ConditioningError);
    EXPECT_NO_THROW(CardinalBasis(equispaced_nodes(40, 1.0), 1.0, {BasisMode::gaussian_rbf, 12.0, 0.0}));
}
