#pragma once

// Projection onto a diagonally dominant M-matrix P = (1 + delta) I - B,
// the truncated Neumann series P_t^{-1} applied by recursion, and the
// Neumann-Arnoldi low-rank correction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pddsparse/assembly.hpp"
#include "pddsparse/matrix_analysis.hpp"
#include "pddsparse/sparse.hpp"

namespace pddsparse {

/// What algorithm_a needs to re-estimate an outlier row.
struct RecomputeContext {
    const Discretization* discretization = nullptr;
    const StencilBases* bases = nullptr;
    const ProblemSpec* problem = nullptr;
    AssemblyOptions options;
};

struct AlgorithmAResult {
    SparseMatrix E;  ///< perturbation cancelling positive off-diagonals
    double delta = 0.0;
    std::vector<double> row_excess;  ///< delta_i = sum_{j != i} |(G + E)_ij| - 1
    SparseMatrix B;                  ///< |off-diagonal of G + E|, zero diagonal
    std::vector<std::size_t> recomputed_rows;
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void algorithm_a_steps(const SparseMatrix& G, AlgorithmAResult& out) {
    const int N = static_cast<int>(G.rows());
    std::vector<Eigen::Triplet<double>> e;
    out.B = G;
    out.row_excess.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(out.B, i); it; ++it) {
            if (it.col() == i) {
                it.valueRef() = 0.0;
                continue;
            }
            if (it.value() > 0.0) {
                e.emplace_back(i, static_cast<int>(it.col()), -it.value());
                it.valueRef() = 0.0;
            } else {
                it.valueRef() = -it.value();
            }
            sum += it.value();
        }
        out.row_excess[i] = sum - 1.0;
    }
    out.E.resize(N, N);
    out.E.setFromTriplets(e.begin(), e.end());
    out.delta = 0.0;
    for (double d : out.row_excess) out.delta = std::max(out.delta, d);
}

}  // namespace detail

/// Steps I-II, plus step III when a recompute budget and context are given:
/// while the largest delta_i is an outlier (above median + 5 IQR) that row
/// is re-estimated with a fresh stream generation.
inline AlgorithmAResult algorithm_a(StochasticSystem& sys, std::size_t recompute_budget = 0,
                                    const RecomputeContext* ctx = nullptr) {
    if (recompute_budget > 0 && (!ctx || !ctx->discretization || !ctx->bases || !ctx->problem)) {
        throw UnsupportedOperation("row recomputation needs the assembly context");
    }
    AlgorithmAResult out;
    std::vector<std::size_t> recomputed;
    for (;;) {
        detail::algorithm_a_steps(sys.G, out);
        if (recomputed.size() >= recompute_budget) break;
        std::vector<double> interior(out.row_excess.begin(),
                                     out.row_excess.begin() + static_cast<long>(sys.interior_count()));
        if (interior.empty()) break;
        const double median = detail::quantile(interior, 0.5);
        const double iqr = detail::quantile(interior, 0.75) - detail::quantile(interior, 0.25);
        const auto worst = static_cast<std::size_t>(std::max_element(interior.begin(), interior.end()) - interior.begin());
        if (!(interior[worst] > median + 5.0 * iqr)) break;
        const std::uint32_t generation = sys.rows[worst].generation + 1;
        recompute_row(sys, *ctx->discretization, *ctx->bases, *ctx->problem, worst, ctx->options, generation);
        recomputed.push_back(worst);
    }
    out.recomputed_rows = std::move(recomputed);
    return out;
}

/// Steps I-II only, on a bare matrix.
inline AlgorithmAResult algorithm_a(const SparseMatrix& G) {
    AlgorithmAResult out;
    detail::algorithm_a_steps(G, out);
    return out;
}

struct NeumannPrecond {
    double delta = 0.0;
    SparseMatrix B;
    int t = 0;

    NeumannPrecond() = default;
    NeumannPrecond(const AlgorithmAResult& a, int order) : delta(a.delta), B(a.B), t(order) {
        if (order < 0) throw ParameterError("truncation order must be non-negative");
    }

    Eigen::Index size() const { return B.rows(); }
};

/// P_t^{-1} x via x_k = x + B x_{k-1} / (1 + delta), returning x_t / (1 + delta).
inline Vector apply_neumann(const NeumannPrecond& p, const Vector& x) {
    const double s = 1.0 / (1.0 + p.delta);
    Vector y = x;
    for (int k = 0; k < p.t; ++k) {
        Vector next = p.B * y;
        y = x + s * next;
    }
    return s * y;
}

struct ArnoldiCorrection {
    int rank = 0;
    DenseMatrix V;        ///< N x rank, orthonormal columns
    DenseMatrix H;        ///< rank x rank upper Hessenberg
    DenseMatrix inverse;  ///< (I - H)^{-1}
    bool breakdown = false;
    int matvecs = 0;  ///< products with G or B spent building the correction
};

inline constexpr int kMaxArnoldiRank = 512;

/// Arnoldi on v -> v - G P_t^{-1} v started from y0 / ||y0||.
inline ArnoldiCorrection build_arnoldi_correction(const SparseMatrix& G, const NeumannPrecond& p, int r,
                                                  const Vector& y0) {
    if (r < 1) throw ParameterError("rank must be at least 1");
    if (r > kMaxArnoldiRank) throw ParameterError("rank above the supported maximum of 512");
    const double beta = y0.norm();
    if (!(beta > 0.0)) throw ParameterError("Arnoldi start vector must be nonzero");
    const Eigen::Index N = G.rows();
    r = static_cast<int>(std::min<Eigen::Index>(r, N));
    ArnoldiCorrection c;
    DenseMatrix V(N, r + 1);
    DenseMatrix Hfull = DenseMatrix::Zero(r + 1, r);
    V.col(0) = y0 / beta;
    int k = 0;
    for (; k < r; ++k) {
        Vector w = V.col(k) - G * apply_neumann(p, V.col(k));
        c.matvecs += p.t + 1;
        const double before = w.norm();
        for (int j = 0; j <= k; ++j) {
            const double h = V.col(j).dot(w);
            Hfull(j, k) += h;
            w -= h * V.col(j);
        }
        if (w.norm() < before / std::sqrt(2.0)) {
            for (int j = 0; j <= k; ++j) {
                const double h = V.col(j).dot(w);
                Hfull(j, k) += h;
                w -= h * V.col(j);
            }
        }
        const double next = w.norm();
        if (next <= 1e-14 * std::max(before, 1e-300)) {
            c.breakdown = true;
            ++k;
            break;
        }
        if (k + 1 < r + 1) {
            Hfull(k + 1, k) = next;
            V.col(k + 1) = w / next;
        }
    }
    c.rank = k;
    c.V = V.leftCols(k);
    c.H = Hfull.topLeftCorner(k, k);
    const DenseMatrix IminusH = DenseMatrix::Identity(k, k) - c.H;
    Eigen::PartialPivLU<DenseMatrix> lu(IminusH);
    c.inverse = lu.inverse();
    if (!c.inverse.allFinite()) {
        throw ConditioningError("I - H is singular; the correction is unusable at this rank", INFINITY);
    }
    return c;
}

/// P_t^{-1} (x + V [(I - H)^{-1} - I] V^T x).
inline Vector apply_pi(const NeumannPrecond& p, const ArnoldiCorrection* c, const Vector& x) {
    if (!c || c->rank == 0) return apply_neumann(p, x);
    const Vector coeffs = c->V.transpose() * x;
    const Vector corrected = x + c->V * (c->inverse * coeffs - coeffs);
    return apply_neumann(p, corrected);
}

/// Dense P_t^{-1} (desk scale).
inline DenseMatrix dense_neumann(const NeumannPrecond& p) {
    const Eigen::Index N = p.size();
    const double s = 1.0 / (1.0 + p.delta);
    const DenseMatrix X = s * DenseMatrix(p.B);
    DenseMatrix term = DenseMatrix::Identity(N, N);
    DenseMatrix sum = term;
    for (int k = 1; k <= p.t; ++k) {
        term = term * X;
        sum += term;
    }
    return s * sum;
}

/// T_{t+1} = I - (B / (1 + delta))^{t+1}.
inline DenseMatrix dense_truncation_factor(const NeumannPrecond& p) {
    const Eigen::Index N = p.size();
    const DenseMatrix X = DenseMatrix(p.B) / (1.0 + p.delta);
    DenseMatrix power = DenseMatrix::Identity(N, N);
    for (int k = 0; k <= p.t; ++k) power = power * X;
    return DenseMatrix::Identity(N, N) - power;
}

struct PrecondBounds {
    double norm_E = 0.0;
    double norm_P_inv = 0.0;
    double norm_Pt_inv = 0.0;
    double norm_G_inv = 0.0;
    double norm_T = 0.0;
    double norm_T_inv = 0.0;           ///< exact, dense
    double norm_T_inv_estimate = 0.0;  ///< ||2I - T||
    double bound_untruncated = 0.0;    ///< first-order bound for P^{-1} G
    double bound_leading = 0.0;        ///< ||T|| ||T^-1|| [1 + (||G^-1|| + ||P_t^-1||) ||E||]
    double bound_first_order = 0.0;    ///< ||T|| ||2I - T|| [1 + (||G^-1|| + ||P_t^-1||) ||E||]
    double bound_rigorous = 0.0;       ///< ||T|| ||T^-1|| (1 + ||P^-1|| ||E||)(1 + ||G^-1|| ||E||)
    std::optional<double> kappa_actual;  ///< kappa_inf(P_t^{-1} G)
    std::optional<double> kappa_untruncated;  ///< kappa_inf(P^{-1} G)
};

/// Condition-number bounds of the Neumann-preconditioned operator, in the
/// infinity norm, next to the actual values computed densely.
inline PrecondBounds precond_bounds(const SparseMatrix& G, const AlgorithmAResult& a, int t) {
    if (static_cast<std::size_t>(G.rows()) > kDenseCap) throw UnsupportedOperation("dense cap exceeded");
    const NeumannPrecond p(a, t);
    const Eigen::Index N = G.rows();
    const DenseMatrix Gd(G);
    const DenseMatrix P = (1.0 + a.delta) * DenseMatrix::Identity(N, N) - DenseMatrix(a.B);
    const DenseMatrix P_inv = Eigen::PartialPivLU<DenseMatrix>(P).inverse();
    const DenseMatrix G_inv = Eigen::PartialPivLU<DenseMatrix>(Gd).inverse();
    const DenseMatrix Pt_inv = dense_neumann(p);
    const DenseMatrix T = dense_truncation_factor(p);
    const DenseMatrix T_inv = Eigen::PartialPivLU<DenseMatrix>(T).inverse();

    PrecondBounds b;
    b.norm_E = norm_inf(a.E);
    b.norm_P_inv = norm_inf(P_inv);
    b.norm_Pt_inv = norm_inf(Pt_inv);
    b.norm_G_inv = norm_inf(G_inv);
    b.norm_T = norm_inf(T);
    b.norm_T_inv = norm_inf(T_inv);
    b.norm_T_inv_estimate = norm_inf(DenseMatrix(2.0 * DenseMatrix::Identity(N, N) - T));
    b.bound_untruncated = 1.0 + (b.norm_G_inv + b.norm_P_inv) * b.norm_E;
    b.bound_leading = b.norm_T * b.norm_T_inv * (1.0 + (b.norm_G_inv + b.norm_Pt_inv) * b.norm_E);
    b.bound_first_order = b.norm_T * b.norm_T_inv_estimate * (1.0 + (b.norm_G_inv + b.norm_Pt_inv) * b.norm_E);
    b.bound_rigorous =
        b.norm_T * b.norm_T_inv * (1.0 + b.norm_P_inv * b.norm_E) * (1.0 + b.norm_G_inv * b.norm_E);
    const DenseMatrix A = Pt_inv * Gd;
    b.kappa_actual = norm_inf(A) * norm_inf(DenseMatrix(Eigen::PartialPivLU<DenseMatrix>(A).inverse()));
    const DenseMatrix A0 = P_inv * Gd;
    b.kappa_untruncated = norm_inf(A0) * norm_inf(DenseMatrix(Eigen::PartialPivLU<DenseMatrix>(A0).inverse()));
    return b;
}

inline nlohmann::json to_json(const PrecondBounds& b) {
    nlohmann::json j = {{"norm_E", b.norm_E},
                        {"norm_P_inv", b.norm_P_inv},
                        {"norm_Pt_inv", b.norm_Pt_inv},
                        {"norm_G_inv", b.norm_G_inv},
                        {"norm_T", b.norm_T},
                        {"norm_T_inv", b.norm_T_inv},
                        {"norm_T_inv_estimate", b.norm_T_inv_estimate},
                        {"bound_untruncated", b.bound_untruncated},
                        {"bound_leading", b.bound_leading},
                        {"bound_first_order", b.bound_first_order},
                        {"bound_rigorous", b.bound_rigorous}};
    if (b.kappa_actual) j["kappa_actual"] = *b.kappa_actual;
    if (b.kappa_untruncated) j["kappa_untruncated"] = *b.kappa_untruncated;
    return j;
}

inline nlohmann::json summary_json(const AlgorithmAResult& a, const ArnoldiCorrection* c = nullptr) {
    nlohmann::json j = {{"schema_version", 1},
                        {"delta", a.delta},
                        {"row_excess", a.row_excess},
                        {"norm_E", norm_inf(a.E)},
                        {"clipped_entries", a.E.nonZeros()},
                        {"recomputed_rows", a.recomputed_rows}};
    if (c) {
        j["rank"] = c->rank;
        j["breakdown"] = c->breakdown;
        j["lowrank_matvecs"] = c->matvecs;
    }
    return j;
}

}  // namespace pddsparse
