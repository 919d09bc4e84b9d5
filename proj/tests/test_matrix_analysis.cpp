#include <gtest/gtest.h>

#include <cmath>

#include "pddsparse/matrix_analysis.hpp"

using namespace pddsparse;

namespace {

SparseMatrix sparse(const DenseMatrix& D) { return D.sparseView(); }

StochasticSystem wrap(const DenseMatrix& D, std::size_t dirichlet = 0) {
    StochasticSystem s;
    s.G = sparse(D);
    s.standard_errors = s.G;
    s.standard_errors *= 0.0;
    s.b = Vector::Zero(D.rows());
    s.b_se = Vector::Zero(D.rows());
    s.rows.resize(static_cast<std::size_t>(D.rows()));
    s.dirichlet_count = dirichlet;
    return s;
}

StochasticSystem assembled(DiscretizationConfig g, std::size_t samples, double h, const Discretization** out = nullptr) {
    static std::vector<std::unique_ptr<Discretization>> keep;
    keep.push_back(std::make_unique<Discretization>(build_discretization(g)));
    if (out) *out = keep.back().get();
    AssemblyOptions o;
    o.mc = McParams{h, samples, 20240601, 100'000'000, 0};
    o.basis = BasisOptions{BasisMode::sinc_limit, 5.0, 0.0};
    return assemble_system(*keep.back(), ProblemSpec{}, o);
}

}  // namespace

TEST(Structure, Identity) {
    const StochasticSystem s = wrap(DenseMatrix::Identity(4, 4));
    const StructureReport r = structure_check(s);
    EXPECT_TRUE(r.diagonal_is_one);
    EXPECT_EQ(r.positive_count, 0u);
    EXPECT_FALSE(r.strongly_connected);
    EXPECT_EQ(r.component_count, 4);
}

TEST(Structure, CycleIsStronglyConnected) {
    DenseMatrix D = DenseMatrix::Identity(3, 3);
    D(0, 1) = D(1, 2) = D(2, 0) = -0.5;
    int count = 0;
    const auto comp = strongly_connected_components(sparse(D), 3, &count);
    EXPECT_EQ(count, 1);
    EXPECT_TRUE(structure_check(wrap(D)).strongly_connected);
    DenseMatrix P = DenseMatrix::Identity(3, 3);
    P(0, 1) = P(1, 2) = -0.5;
    strongly_connected_components(sparse(P), 3, &count);
    EXPECT_EQ(count, 3);
}

TEST(Structure, AssembledValidTessellationIsStronglyConnected) {
    const Discretization* d = nullptr;
    const StochasticSystem s = assembled({5.0, 5, 2.0, 1}, 50, 4e-3, &d);
    const StructureReport r = structure_check(s, d);
    EXPECT_TRUE(r.strongly_connected);
    EXPECT_EQ(r.component_count, 1);
    EXPECT_TRUE(r.diagonal_is_one);
    EXPECT_TRUE(r.dirichlet_block_identity);
}

TEST(Perron, KnownRadii) {
    DenseMatrix A(2, 2);
    A << 0, 2, 0.5, 0;
    EXPECT_NEAR(perron_root(sparse(A), 2).value, 1.0, 1e-8);
    DenseMatrix B(3, 3);
    B << 0, 0.3, 0.2, 0.1, 0, 0.4, 0.25, 0.25, 0;
    const Eigen::EigenSolver<DenseMatrix> es(B);
    double rho = 0;
    for (auto z : es.eigenvalues()) rho = std::max(rho, std::abs(z));
    const PerronEstimate p = perron_root(sparse(B), 3);
    EXPECT_NEAR(p.value, rho, 1e-7);
    EXPECT_LE(p.lower, rho + 1e-12);
    EXPECT_GE(p.upper, rho - 1e-12);
}

TEST(InverseNorm, IdentityAndBidiagonal) {
    EXPECT_DOUBLE_EQ(inv_norm_inf(wrap(DenseMatrix::Identity(5, 5)), true).value, 1.0);
    DenseMatrix G = DenseMatrix::Identity(3, 3);
    G(1, 0) = G(2, 1) = -0.5;
    const InverseNorm n = inv_norm_inf(wrap(G), true);
    ASSERT_TRUE(n.solve_value && n.dense_value);
    EXPECT_NEAR(*n.solve_value, *n.dense_value, 1e-10);
    EXPECT_NEAR(n.value, 1.75, 1e-14);  // inverse = I + S/2 + S^2/4
}

TEST(InverseNorm, AssembledBelowFetBound) {
    const Discretization* d = nullptr;
    const StochasticSystem s = assembled({4.0, 4, 4.0, 3}, 400, 2e-3, &d);
    const FetInputs f = fet_inputs_from_series(*d);
    const ConditionReport c = condition_report(s, f);
    EXPECT_LE(c.inverse.value, 1.2 * c.inverse_bound);
    EXPECT_LE(c.kappa_inf, 1.2 * c.condition_bound);
    ASSERT_TRUE(c.inverse.dense_value);
    if (c.inverse.solve_value) EXPECT_NEAR(*c.inverse.solve_value, *c.inverse.dense_value, 1e-8 * c.inverse.value);
}

TEST(Condition, Identity) {
    const ConditionReport c = condition_report(wrap(DenseMatrix::Identity(6, 6)), FetInputs{1, 1, 1, 1});
    EXPECT_DOUBLE_EQ(c.kappa_inf, 1.0);
    EXPECT_DOUBLE_EQ(*c.kappa_2, 1.0);
    EXPECT_DOUBLE_EQ(*c.skeel_raw, 1.0);
}

TEST(Condition, SkeelOnClippedMatrix) {
    const StochasticSystem s = assembled({4.0, 4, 4.0, 3}, 200, 4e-3);
    const ConditionReport c = condition_report(s, FetInputs{1, 1, 1, 1});
    ASSERT_TRUE(c.skeel_clipped && c.kappa_inf_clipped);
    EXPECT_LE(*c.skeel_clipped, 1.0 + *c.kappa_inf_clipped);
}

TEST(Clip, Behaviour) {
    DenseMatrix M = DenseMatrix::Identity(6, 6);
    M(0, 1) = -0.3;
    M(4, 3) = -0.7;
    const ClipReport same = clip_to_mmatrix(sparse(M));
    EXPECT_TRUE(same.items.empty());
    EXPECT_EQ(DenseMatrix(same.clipped), M);
    M(2, 5) = 1e-3;
    const ClipReport one = clip_to_mmatrix(sparse(M));
    ASSERT_EQ(one.items.size(), 1u);
    EXPECT_EQ(one.items[0].row, 2);
    EXPECT_EQ(one.items[0].col, 5);
    EXPECT_EQ(one.items[0].value, 1e-3);
    EXPECT_EQ(one.clipped.coeff(2, 5), 0.0);
}

TEST(Fet, SeriesInputs) {
    const Discretization d = build_discretization({10.0, 4, 4.0, 3});
    const FetInputs f = fet_inputs_from_series(d);
    // Domain FET at the knot nearest the centre of the 20 x 20 square, series value 0.1473427 * 400.
    EXPECT_NEAR(f.max_domain_fet, 400 * 0.1473427065630276, 1e-4);
    EXPECT_GT(f.min_patch_fet, fet_circle(2.5, 2.25));
    EXPECT_NEAR(inverse_norm_bound(f), 1.0 + f.max_domain_fet / f.min_patch_fet, 0.0);
}
