#include <gtest/gtest.h>

#include <random>

#include "pddsparse/preconditioning.hpp"

using namespace pddsparse;

namespace {

SparseMatrix sparse(const DenseMatrix& D) { return D.sparseView(); }

DenseMatrix example3() {
    DenseMatrix G(3, 3);
    G << 1, -0.7, -0.5, -0.3, 1, 0.2, -0.1, -0.4, 1;
    return G;
}

const StochasticSystem& desk_like() {
    static const StochasticSystem s = [] {
        const Discretization d = build_discretization({4.0, 4, 4.0, 3});
        AssemblyOptions o;
        o.mc = McParams{4e-3, 200, 20240601, 100'000'000, 0};
        o.basis = BasisOptions{BasisMode::sinc_limit, 5.0, 0.0};
        ProblemSpec p;
        p.dirichlet = [](Vec2 x) { return 1.0 + 0.1 * x.x; };
        return assemble_system(d, p, o);
    }();
    return s;
}

Vector random_vector(Eigen::Index n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(gen);
    return v;
}

}  // namespace

TEST(AlgorithmA, DominantMMatrixUntouched) {
    DenseMatrix G = DenseMatrix::Identity(3, 3);
    G(0, 1) = -0.5;
    G(1, 2) = -0.9;
    G(2, 0) = -0.2;
    G(2, 1) = -0.3;
    const AlgorithmAResult a = algorithm_a(sparse(G));
    EXPECT_EQ(norm_inf(a.E), 0.0);
    EXPECT_EQ(a.delta, 0.0);
}

TEST(AlgorithmA, WorkedExample) {
    const AlgorithmAResult a = algorithm_a(sparse(example3()));
    const DenseMatrix E(a.E);
    DenseMatrix Eexp = DenseMatrix::Zero(3, 3);
    Eexp(1, 2) = -0.2;
    EXPECT_EQ(E, Eexp);
    ASSERT_EQ(a.row_excess.size(), 3u);
    EXPECT_NEAR(a.row_excess[0], 0.2, 1e-15);
    EXPECT_NEAR(a.row_excess[1], -0.7, 1e-15);
    EXPECT_NEAR(a.row_excess[2], -0.5, 1e-15);
    EXPECT_NEAR(a.delta, 0.2, 1e-15);
    DenseMatrix Bexp(3, 3);
    Bexp << 0, 0.7, 0.5, 0.3, 0, 0, 0.1, 0.4, 0;
    EXPECT_EQ(DenseMatrix(a.B), Bexp);
    double mx = 0.0;
    for (double d : a.row_excess) mx = std::max(mx, d);
    EXPECT_EQ(std::max(0.0, mx), a.delta);
}

TEST(Neumann, TrivialCases) {
    const AlgorithmAResult a = algorithm_a(sparse(example3()));
    const Vector x = random_vector(3, 1);
    EXPECT_TRUE(apply_neumann(NeumannPrecond(a, 0), x).isApprox(x / 1.2, 1e-15));
    AlgorithmAResult z = a;
    z.B = SparseMatrix(3, 3);
    for (int t : {0, 1, 4}) EXPECT_TRUE(apply_neumann(NeumannPrecond(z, t), x).isApprox(x / 1.2, 1e-15));
}

TEST(Neumann, TwoByTwoNilpotent) {
    AlgorithmAResult a;
    a.delta = 0.0;
    DenseMatrix B(2, 2);
    B << 0, 0.5, 0, 0;
    a.B = sparse(B);
    const Vector x = (Vector(2) << 0, 1).finished();
    const Vector expected = (Vector(2) << 0.5, 1).finished();  // ((I - B)^-1 x), closed form
    for (int t : {1, 2, 7}) EXPECT_TRUE(apply_neumann(NeumannPrecond(a, t), x).isApprox(expected, 1e-15));
}

TEST(Neumann, DenseIdentities) {
    const StochasticSystem& s = desk_like();
    const AlgorithmAResult a = algorithm_a(s.G);
    const Eigen::Index N = s.G.rows();
    const DenseMatrix P = (1.0 + a.delta) * DenseMatrix::Identity(N, N) - DenseMatrix(a.B);
    const DenseMatrix P_inv = P.partialPivLu().inverse();
    EXPECT_LE((P_inv * DenseMatrix(a.B) - DenseMatrix(a.B) * P_inv).cwiseAbs().maxCoeff(), 1e-9);
    for (int t : {1, 2, 5}) {
        const NeumannPrecond p(a, t);
        const DenseMatrix lhs = dense_neumann(p) * P;
        EXPECT_LE((lhs - dense_truncation_factor(p)).cwiseAbs().maxCoeff(), 1e-9) << t;
        const Vector x = random_vector(N, t);
        EXPECT_LE((dense_neumann(p) * x - apply_neumann(p, x)).cwiseAbs().maxCoeff(), 1e-12);
    }
    // P dominance and the spectral radius of B.
    const DenseMatrix B(a.B);
    EXPECT_LE(B.rowwise().sum().maxCoeff(), 1.0 + a.delta + 1e-15);
    EXPECT_LT(perron_root(a.B, static_cast<int>(N)).value, 1.0 + a.delta);
}

TEST(Arnoldi, OrthonormalHessenberg) {
    const StochasticSystem& s = desk_like();
    const AlgorithmAResult a = algorithm_a(s.G);
    const NeumannPrecond p(a, 1);
    const ArnoldiCorrection c = build_arnoldi_correction(s.G, p, 40, s.b);
    ASSERT_EQ(c.rank, 40);
    const DenseMatrix I = DenseMatrix::Identity(c.rank, c.rank);
    EXPECT_LE((c.V.transpose() * c.V - I).cwiseAbs().maxCoeff(), 1e-10);
    for (int i = 0; i < c.rank; ++i) {
        for (int j = 0; j + 1 < i; ++j) EXPECT_EQ(c.H(i, j), 0.0);
    }
    EXPECT_LE((c.inverse * (I - c.H) - I).cwiseAbs().maxCoeff(), 1e-10);
}

// The Dirichlet rows give G P_t^{-1} one eigenvalue of multiplicity m_D, so
// Arnoldi on the full system breaks down at N - m_D + 1. Full rank is reached
// on the interior block.
TEST(Arnoldi, FullRankIsExact) {
    const StochasticSystem& s = desk_like();
    const auto n = static_cast<Eigen::Index>(s.interior_count());
    ASSERT_LE(n, 300);
    const SparseMatrix G = s.G.topLeftCorner(n, n);
    const AlgorithmAResult a = algorithm_a(G);
    for (int t : {0, 1, 2}) {
        const NeumannPrecond p(a, t);
        const ArnoldiCorrection c = build_arnoldi_correction(G, p, static_cast<int>(n), random_vector(n, 3));
        ASSERT_EQ(c.rank, n) << "breakdown before full rank";
        DenseMatrix PiG(n, n);
        for (Eigen::Index j = 0; j < n; ++j) PiG.col(j) = apply_pi(p, &c, Vector(G.col(j)));
        EXPECT_LE((PiG - DenseMatrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-8) << t;
    }
}

TEST(Arnoldi, DirichletBlockLimitsRank) {
    const StochasticSystem& s = desk_like();
    const NeumannPrecond p(algorithm_a(s.G), 1);
    const auto N = static_cast<int>(s.size());
    const ArnoldiCorrection c = build_arnoldi_correction(s.G, p, N, random_vector(N, 3));
    EXPECT_TRUE(c.breakdown);
    EXPECT_LE(c.rank, N - static_cast<int>(s.dirichlet_count) + 1);
}

TEST(Arnoldi, ApplyPi) {
    const StochasticSystem& s = desk_like();
    const Eigen::Index N = s.G.rows();
    const AlgorithmAResult a = algorithm_a(s.G);
    const NeumannPrecond p(a, 2);
    const ArnoldiCorrection c = build_arnoldi_correction(s.G, p, 25, s.b);
    const Vector x = random_vector(N, 9);
    EXPECT_EQ(apply_pi(p, nullptr, x), apply_neumann(p, x));
    const Vector orth = x - c.V * (c.V.transpose() * x);
    EXPECT_LE((apply_pi(p, &c, orth) - apply_neumann(p, orth)).cwiseAbs().maxCoeff(), 1e-12);
    const DenseMatrix I = DenseMatrix::Identity(N, N);
    const DenseMatrix Pi = dense_neumann(p) * (I + c.V * (c.inverse - DenseMatrix::Identity(25, 25)) * c.V.transpose());
    EXPECT_LE((Pi * x - apply_pi(p, &c, x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Arnoldi, RejectsBadInput) {
    const StochasticSystem& s = desk_like();
    const NeumannPrecond p(algorithm_a(s.G), 1);
    EXPECT_THROW(build_arnoldi_correction(s.G, p, 0, s.b), ParameterError);
    EXPECT_THROW(build_arnoldi_correction(s.G, p, 513, s.b), ParameterError);
    EXPECT_THROW(build_arnoldi_correction(s.G, p, 5, Vector::Zero(s.b.size())), ParameterError);
}

TEST(Bounds, WorkedExample) {
    const AlgorithmAResult a = algorithm_a(sparse(example3()));
    for (int t : {1, 2, 5}) {
        const PrecondBounds b = precond_bounds(sparse(example3()), a, t);
        ASSERT_TRUE(b.kappa_actual);
        EXPECT_LE(*b.kappa_actual, b.bound_rigorous) << t;
        EXPECT_LE(*b.kappa_actual, b.bound_first_order) << t;
    }
}

TEST(Bounds, ExactPreconditionerLimit) {
    DenseMatrix G = DenseMatrix::Identity(3, 3);
    G(0, 1) = -0.4;
    G(1, 2) = -0.3;
    G(2, 0) = -0.5;
    const AlgorithmAResult a = algorithm_a(sparse(G));
    ASSERT_EQ(norm_inf(a.E), 0.0);
    const PrecondBounds b = precond_bounds(sparse(G), a, 200);
    EXPECT_NEAR(b.bound_rigorous, 1.0, 1e-12);
    EXPECT_NEAR(*b.kappa_actual, 1.0, 1e-12);
    EXPECT_NEAR(*b.kappa_untruncated, 1.0, 1e-12);
}

TEST(Bounds, AssembledMonotoneInT) {
    const StochasticSystem& s = desk_like();
    const AlgorithmAResult a = algorithm_a(s.G);
    double prev = INFINITY;
    for (int t : {1, 2, 3, 5, 8}) {
        const PrecondBounds b = precond_bounds(s.G, a, t);
        EXPECT_LE(b.bound_first_order, prev * (1 + 1e-12)) << t;
        EXPECT_LE(*b.kappa_actual, b.bound_rigorous) << t;
        prev = b.bound_first_order;
    }
}
