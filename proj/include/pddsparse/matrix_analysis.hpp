#pragma once

// Structural and conditioning diagnostics of an assembled system: sign and
// dominance census, strong connectivity of the interior block, Perron root
// of the clipped iteration matrix, inverse norms and condition numbers.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include "pddsparse/assembly.hpp"
#include "pddsparse/geometry.hpp"
#include "pddsparse/sparse.hpp"
#include "pddsparse/stochastics.hpp"

namespace pddsparse {

inline constexpr std::size_t kDenseCap = 5000;

struct ClipItem {
    int row;
    int col;
    double value;
    double ratio;  ///< value / standard error (inf when the SE is zero)
};

struct ClipReport {
    SparseMatrix clipped;
    std::vector<ClipItem> items;
};

/// Zeroes positive off-diagonal entries; the sparsity pattern is kept.
inline ClipReport clip_to_mmatrix(const SparseMatrix& G, const SparseMatrix* standard_errors = nullptr) {
    ClipReport out;
    out.clipped = G;
    for (int i = 0; i < out.clipped.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(out.clipped, i); it; ++it) {
            if (it.col() == i || !(it.value() > 0.0)) continue;
            double se = 0.0;
            if (standard_errors) se = standard_errors->coeff(i, it.col());
            out.items.push_back({i, static_cast<int>(it.col()), it.value(), se > 0.0 ? it.value() / se : INFINITY});
            it.valueRef() = 0.0;
        }
    }
    return out;
}

inline ClipReport clip_to_mmatrix(const StochasticSystem& sys) {
    return clip_to_mmatrix(sys.G, &sys.standard_errors);
}

/// Strongly connected components of the digraph i -> j for every stored
/// off-diagonal entry (i, j) with i, j < n (iterative Tarjan).
inline std::vector<int> strongly_connected_components(const SparseMatrix& A, int n, int* count = nullptr) {
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
    std::vector<char> on_stack(n, 0);
    struct Frame {
        int v;
        SparseMatrix::InnerIterator it;
    };
    std::vector<Frame> frames;
    int next_index = 0, next_comp = 0;
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        const auto open = [&](int v) {
            index[v] = low[v] = next_index++;
            stack.push_back(v);
            on_stack[v] = 1;
            frames.push_back({v, SparseMatrix::InnerIterator(A, v)});
        };
        open(root);
        while (!frames.empty()) {
            Frame& f = frames.back();
            bool descended = false;
            for (; f.it; ++f.it) {
                const int w = static_cast<int>(f.it.col());
                if (w == f.v || w >= n || f.it.value() == 0.0) continue;
                if (index[w] < 0) {
                    ++f.it;
                    open(w);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[f.v] = std::min(low[f.v], index[w]);
            }
            if (descended) continue;
            const int v = f.v;
            frames.pop_back();
            if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            if (low[v] == index[v]) {
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = next_comp;
                } while (w != v);
                ++next_comp;
            }
        }
    }
    if (count) *count = next_comp;
    return comp;
}

struct PerronEstimate {
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Spectral radius of a nonnegative matrix B (leading n x n block) by power
/// iteration on I + B with Collatz-Wielandt bracketing.
inline PerronEstimate perron_root(const SparseMatrix& B, int n, double tol = 1e-8, int max_iterations = 10000) {
    PerronEstimate est;
    if (n == 0) {
        est.converged = true;
        return est;
    }
    Vector x = Vector::Ones(n), y(n);
    for (int k = 1; k <= max_iterations; ++k) {
        for (int i = 0; i < n; ++i) {
            double s = x[i];
            for (SparseMatrix::InnerIterator it(B, i); it; ++it) {
                if (it.col() < n) s += std::abs(it.value()) * x[it.col()];
            }
            y[i] = s;
        }
        double lo = INFINITY, hi = 0.0;
        for (int i = 0; i < n; ++i) {
            const double q = y[i] / x[i];
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        est.lower = lo - 1.0;
        est.upper = hi - 1.0;
        est.value = 0.5 * (est.lower + est.upper);
        est.iterations = k;
        x = y / y.maxCoeff();
        // A zero entry in x would stall the bracket; keep it strictly positive.
        for (int i = 0; i < n; ++i) x[i] = std::max(x[i], 1e-300);
        if (hi - lo <= tol * hi) {
            est.converged = true;
            break;
        }
    }
    return est;
}

/// Off-diagonal magnitudes with zero diagonal: |A| - diag(|A|).
inline SparseMatrix off_diagonal_abs(const SparseMatrix& A) {
    SparseMatrix B = A;
    for (int i = 0; i < B.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(B, i); it; ++it) it.valueRef() = (it.col() == i) ? 0.0 : std::abs(it.value());
    }
    return B;
}

struct StructureReport {
    bool diagonal_is_one = false;
    bool dirichlet_block_identity = false;
    std::size_t off_diagonal_nonzeros = 0;
    std::size_t positive_count = 0;
    double positive_fraction = 0.0;
    double positive_max = 0.0;
    double positive_max_ratio = 0.0;  ///< max value / SE over positive entries
    std::vector<double> off_diagonal_abs_sums;
    std::vector<std::size_t> dominance_violations;  ///< rows with sum > 1 + 3 SE + slack
    std::vector<std::size_t> strict_rows;            ///< rows with sum < 1 - 3 SE
    std::vector<std::size_t> strict_exposed_rows;    ///< strict rows whose patch touches the boundary
    bool strongly_connected = false;
    int component_count = 0;
    PerronEstimate perron;  ///< of the clipped interior iteration matrix
};

inline StructureReport structure_check(const StochasticSystem& sys, const Discretization* d = nullptr,
                                       double dominance_slack = 1e-3) {
    StructureReport rep;
    const int N = static_cast<int>(sys.size());
    const int interior = static_cast<int>(sys.interior_count());
    rep.diagonal_is_one = true;
    rep.dirichlet_block_identity = true;
    rep.off_diagonal_abs_sums.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        bool saw_diag = false;
        SparseMatrix::InnerIterator se(sys.standard_errors, i);
        for (SparseMatrix::InnerIterator it(sys.G, i); it; ++it, ++se) {
            if (it.col() == i) {
                saw_diag = true;
                if (it.value() != 1.0) rep.diagonal_is_one = false;
                continue;
            }
            if (i >= interior && it.value() != 0.0) rep.dirichlet_block_identity = false;
            ++rep.off_diagonal_nonzeros;
            rep.off_diagonal_abs_sums[i] += std::abs(it.value());
            if (it.value() > 0.0) {
                ++rep.positive_count;
                rep.positive_max = std::max(rep.positive_max, it.value());
                const double ratio = se.value() > 0.0 ? it.value() / se.value() : INFINITY;
                rep.positive_max_ratio = std::max(rep.positive_max_ratio, ratio);
            }
        }
        if (!saw_diag) rep.diagonal_is_one = false;
        if (i >= interior && sys.b_se[i] != 0.0) rep.dirichlet_block_identity = false;
    }
    rep.positive_fraction = rep.off_diagonal_nonzeros
                                ? static_cast<double>(rep.positive_count) / static_cast<double>(rep.off_diagonal_nonzeros)
                                : 0.0;
    for (int i = 0; i < interior; ++i) {
        const double se = sys.rows[i].aggregate_se;
        const double s = rep.off_diagonal_abs_sums[i];
        if (s > 1.0 + 3.0 * se + dominance_slack) rep.dominance_violations.push_back(i);
        if (s < 1.0 - 3.0 * se) {
            rep.strict_rows.push_back(i);
            const bool exposed = d ? !d->patches[i].dirichlet_sides.empty() : sys.rows[i].dirichlet_hits > 0;
            if (exposed) rep.strict_exposed_rows.push_back(i);
        }
    }
    strongly_connected_components(sys.G, interior, &rep.component_count);
    rep.strongly_connected = interior > 0 && rep.component_count == 1;
    const SparseMatrix B = off_diagonal_abs(clip_to_mmatrix(sys.G).clipped);
    rep.perron = perron_root(B, interior);
    return rep;
}

struct InverseNorm {
    double value = 0.0;
    std::string path;  ///< "solve" or "dense"
    std::optional<double> solve_value;
    std::optional<double> dense_value;
    std::optional<double> dense_min_entry;
};

inline double inv_norm_inf_dense(const DenseMatrix& A, double* min_entry = nullptr) {
    Eigen::PartialPivLU<DenseMatrix> lu(A);
    const DenseMatrix inv = lu.inverse();
    if (!inv.allFinite()) throw ConditioningError("matrix is singular to working precision", INFINITY);
    if (min_entry) *min_entry = inv.minCoeff();
    return norm_inf(inv);
}

/// max_i w_i for G w = 1, which is the inverse infinity norm when G^{-1} >= 0.
inline double inv_norm_inf_solve(const SparseMatrix& G) {
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> A = G;
    Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw ConditioningError("sparse LU failed: " + lu.lastErrorMessage(), INFINITY);
    const Vector w = lu.solve(Vector::Ones(G.rows()));
    if (!w.allFinite()) throw ConditioningError("sparse LU solve produced non-finite values", INFINITY);
    return w.maxCoeff();
}

/// Inverse infinity norm. Uses the solve path when the matrix passes the
/// M-matrix screen, the dense path otherwise; with both=true and N within the
/// dense cap, both paths run.
inline InverseNorm inv_norm_inf(const StochasticSystem& sys, bool both = false) {
    const StructureReport s = structure_check(sys);
    const bool mmatrix = s.positive_max_ratio <= 3.0 && s.dominance_violations.empty();
    InverseNorm out;
    const bool dense_ok = sys.size() <= kDenseCap;
    if (mmatrix) out.solve_value = inv_norm_inf_solve(sys.G);
    if ((!mmatrix || both) && dense_ok) {
        double mn = 0.0;
        out.dense_value = inv_norm_inf_dense(DenseMatrix(sys.G), &mn);
        out.dense_min_entry = mn;
    }
    if (mmatrix) {
        out.value = *out.solve_value;
        out.path = "solve";
    } else if (out.dense_value) {
        out.value = *out.dense_value;
        out.path = "dense";
    } else {
        throw UnsupportedOperation("matrix fails the M-matrix screen and exceeds the dense cap");
    }
    return out;
}

/// Mean exit-time inputs to the inverse-norm and condition bounds.
struct FetInputs {
    double max_domain_fet = 0.0;  ///< max over interior knots of E[tau^Omega]
    double min_patch_fet = 0.0;   ///< min over interior knots of E[tau^#]
    double subdomain_size = 0.0;  ///< H
    double knot_spacing = 0.0;    ///< dz
};

/// Brownian exit times from the rectangle series: domain FET at every interior
/// knot and patch FET at every interior knot.
inline FetInputs fet_inputs_from_series(const Discretization& d, int terms = 200) {
    FetInputs f;
    f.subdomain_size = d.subdomain_size();
    f.knot_spacing = d.knot_spacing();
    f.min_patch_fet = INFINITY;
    const double a = d.config.domain_half_side;
    for (std::size_t i = 0; i < d.interior_count(); ++i) {
        const Vec2 p = d.knots[i].position;
        f.max_domain_fet = std::max(f.max_domain_fet, fet_rect_series(a, a, p, terms));
        const Rect& r = d.patches[i].bounds;
        const Vec2 c{0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)};
        f.min_patch_fet = std::min(f.min_patch_fet, fet_rect_series(0.5 * r.width(), 0.5 * r.height(), p - c, terms));
    }
    return f;
}

inline double inverse_norm_bound(const FetInputs& f) { return 1.0 + f.max_domain_fet / f.min_patch_fet; }

inline double condition_bound(const FetInputs& f) {
    return 2.0 + 2.0 * f.max_domain_fet / (f.subdomain_size * f.knot_spacing);
}

struct ConditionReport {
    double norm = 0.0;
    InverseNorm inverse;
    double kappa_inf = 0.0;
    std::optional<double> kappa_2;
    std::optional<double> skeel_raw;
    std::optional<double> skeel_clipped;
    std::optional<double> kappa_inf_clipped;
    double inverse_bound = 0.0;    ///< 1 + max E[tau^Omega] / min E[tau^#]
    double condition_bound = 0.0;  ///< 2 + 2 max E[tau^Omega] / (H dz)
};

inline double skeel_condition(const DenseMatrix& A) {
    Eigen::PartialPivLU<DenseMatrix> lu(A);
    const DenseMatrix inv = lu.inverse();
    return norm_inf(DenseMatrix(inv.cwiseAbs() * A.cwiseAbs()));
}

inline ConditionReport condition_report(const StochasticSystem& sys, const FetInputs& fet, bool dense = true) {
    ConditionReport rep;
    rep.norm = norm_inf(sys.G);
    const bool dense_ok = dense && sys.size() <= kDenseCap;
    rep.inverse = inv_norm_inf(sys, dense_ok);
    rep.kappa_inf = rep.norm * rep.inverse.value;
    if (dense_ok) {
        const DenseMatrix A(sys.G);
        const Eigen::BDCSVD<DenseMatrix> svd(A);
        const auto& sv = svd.singularValues();
        rep.kappa_2 = sv[0] / sv[sv.size() - 1];
        rep.skeel_raw = skeel_condition(A);
        const DenseMatrix C(clip_to_mmatrix(sys.G).clipped);
        rep.skeel_clipped = skeel_condition(C);
        rep.kappa_inf_clipped = norm_inf(C) * inv_norm_inf_dense(C);
    }
    rep.inverse_bound = inverse_norm_bound(fet);
    rep.condition_bound = condition_bound(fet);
    return rep;
}

inline nlohmann::json to_json(const StructureReport& r) {
    return {{"diagonal_is_one", r.diagonal_is_one},
            {"dirichlet_block_identity", r.dirichlet_block_identity},
            {"off_diagonal_nonzeros", r.off_diagonal_nonzeros},
            {"positive_count", r.positive_count},
            {"positive_fraction", r.positive_fraction},
            {"positive_max", r.positive_max},
            {"positive_max_ratio", std::isfinite(r.positive_max_ratio) ? nlohmann::json(r.positive_max_ratio)
                                                                       : nlohmann::json("inf")},
            {"max_off_diagonal_abs_sum",
             r.off_diagonal_abs_sums.empty()
                 ? 0.0
                 : *std::max_element(r.off_diagonal_abs_sums.begin(), r.off_diagonal_abs_sums.end())},
            {"dominance_violations", r.dominance_violations},
            {"strict_rows", r.strict_rows.size()},
            {"strict_exposed_rows", r.strict_exposed_rows.size()},
            {"strongly_connected", r.strongly_connected},
            {"component_count", r.component_count},
            {"perron", {{"value", r.perron.value},
                        {"lower", r.perron.lower},
                        {"upper", r.perron.upper},
                        {"iterations", r.perron.iterations},
                        {"converged", r.perron.converged}}}};
}

inline nlohmann::json to_json(const ConditionReport& r) {
    nlohmann::json j = {{"norm_inf", r.norm},
                        {"inv_norm_inf", r.inverse.value},
                        {"inv_norm_path", r.inverse.path},
                        {"kappa_inf", r.kappa_inf},
                        {"inverse_bound", r.inverse_bound},
                        {"condition_bound", r.condition_bound}};
    if (r.inverse.solve_value) j["inv_norm_solve"] = *r.inverse.solve_value;
    if (r.inverse.dense_value) j["inv_norm_dense"] = *r.inverse.dense_value;
    j["kappa_2"] = r.kappa_2 ? nlohmann::json(*r.kappa_2) : nlohmann::json("not computed");
    if (r.skeel_raw) j["skeel_raw"] = *r.skeel_raw;
    if (r.skeel_clipped) j["skeel_clipped"] = *r.skeel_clipped;
    if (r.kappa_inf_clipped) j["kappa_inf_clipped"] = *r.kappa_inf_clipped;
    return j;
}

}  // namespace pddsparse
