#pragma once

// Monte Carlo assembly of the interface system G u = b.
//
// Row i is estimated from trajectories started at knot i and stopped on the
// boundary of its patch. An exit through an interface side at arc z adds
// -Y H_j(z) to every column j of that side's stencil; an exit on the domain
// boundary adds Y g to the right-hand side. Z is always added to b.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "pddsparse/geometry.hpp"
#include "pddsparse/interp.hpp"
#include "pddsparse/parallel.hpp"
#include "pddsparse/sparse.hpp"
#include "pddsparse/stochastics.hpp"

namespace pddsparse {

struct AssemblyOptions {
    McParams mc;
    BasisOptions basis;
    double truncation_threshold = 0.01;
};

struct RowDiagnostics {
    std::size_t samples = 0;
    std::size_t truncated = 0;
    std::size_t dirichlet_hits = 0;
    std::array<std::size_t, 4> side_hits{};
    double b_se = 0.0;
    double aggregate_se = 0.0;  ///< root sum of squares of the off-diagonal standard errors
    double residual_mean = 0.0; ///< sample mean of the row residual at the exact solution
    double residual_se = 0.0;
    std::uint32_t generation = 0;
    bool flagged = false;  ///< truncation fraction above threshold

    double truncated_fraction() const {
        return samples ? static_cast<double>(truncated) / static_cast<double>(samples) : 0.0;
    }
    double dirichlet_fraction() const {
        const std::size_t used = samples - truncated;
        return used ? static_cast<double>(dirichlet_hits) / static_cast<double>(used) : 0.0;
    }
};

struct RowEstimate {
    std::vector<int> columns;  ///< sorted, includes the diagonal
    std::vector<double> values;
    std::vector<double> standard_errors;
    double b = 0.0;
    RowDiagnostics diagnostics;
};

struct StochasticSystem {
    SparseMatrix G;
    SparseMatrix standard_errors;  ///< same pattern as G, zero on the diagonal
    Vector b;
    Vector b_se;
    std::vector<RowDiagnostics> rows;
    std::size_t dirichlet_count = 0;

    std::size_t size() const { return static_cast<std::size_t>(G.rows()); }
    std::size_t interior_count() const { return size() - dirichlet_count; }
    bool is_dirichlet_row(std::size_t i) const { return i >= interior_count(); }
};

using StencilBases = std::vector<CardinalBasis>;

/// Cardinal bases for every stencil, in stencil order. Built sequentially so
/// that later parallel assembly only reads the shared table cache.
inline StencilBases build_stencil_bases(const Discretization& d, const BasisOptions& opts) {
    StencilBases bases;
    bases.reserve(d.stencils.size());
    for (const Stencil& s : d.stencils) bases.push_back(build_cardinal_basis(s, d.knot_spacing(), opts));
    return bases;
}

namespace detail {

inline double arc_on_side(const PatchSide& ps, Vec2 p) {
    return (ps.side == Side::E || ps.side == Side::W) ? p.y - ps.origin.y : p.x - ps.origin.x;
}

/// Runs the row's trajectories in index order and hands each record to fn.
template <class Fn>
void for_each_exit(const Discretization& d, const ProblemSpec& problem, std::size_t i, const McParams& mc,
                   std::uint32_t generation, Fn&& fn) {
    const Patch& patch = d.patches.at(i);
    const RectRegion region{patch.bounds.x0, patch.bounds.x1, patch.bounds.y0, patch.bounds.y1};
    const Vec2 start = d.knots[i].position;
    for (std::size_t k = 0; k < mc.samples; ++k) {
        NormalStream stream({mc.seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k), generation});
        fn(simulate_exit(region, start, problem, mc.timestep, mc.max_steps, stream));
    }
}

}  // namespace detail

inline RowEstimate assemble_row(const Discretization& d, const StencilBases& bases, const ProblemSpec& problem,
                                std::size_t i, const AssemblyOptions& opts, std::uint32_t generation = 0) {
    if (i >= d.interior_count()) throw ParameterError("assemble_row needs a non-Dirichlet knot");
    if (bases.size() != d.stencils.size()) throw std::logic_error("stencil bases missing");
    if (opts.mc.samples == 0 || !(opts.mc.timestep > 0.0)) throw ParameterError("need h > 0 and at least one sample");
    const Patch& patch = d.patches[i];

    RowEstimate row;
    row.columns.push_back(static_cast<int>(i));
    for (const PatchSide& ps : patch.sides) {
        if (!ps.stencil) continue;
        for (std::size_t j : d.stencils[*ps.stencil].members) row.columns.push_back(static_cast<int>(j));
    }
    std::sort(row.columns.begin(), row.columns.end());
    row.columns.erase(std::unique(row.columns.begin(), row.columns.end()), row.columns.end());
    const auto local = [&](std::size_t j) {
        return static_cast<std::size_t>(std::lower_bound(row.columns.begin(), row.columns.end(), static_cast<int>(j)) -
                                        row.columns.begin());
    };
    std::array<std::vector<std::size_t>, 4> slot;
    std::array<std::vector<double>, 4> member_exact;
    std::size_t widest = 0;
    for (Side s : all_sides) {
        const PatchSide& ps = patch.side(s);
        if (!ps.stencil) continue;
        const Stencil& st = d.stencils[*ps.stencil];
        for (std::size_t j : st.members) {
            slot[index_of(s)].push_back(local(j));
            if (problem.exact) member_exact[index_of(s)].push_back(problem.exact(d.knots[j].position));
        }
        widest = std::max(widest, st.members.size());
    }

    const std::size_t n_cols = row.columns.size();
    std::vector<double> sum(n_cols, 0.0), sum_sq(n_cols, 0.0), H(widest);
    double b_sum = 0.0, b_sum_sq = 0.0, r_sum = 0.0, r_sum_sq = 0.0;
    const double u_i = problem.exact ? problem.exact(d.knots[i].position) : 0.0;
    RowDiagnostics& diag = row.diagnostics;
    diag.samples = opts.mc.samples;
    diag.generation = generation;

    detail::for_each_exit(d, problem, i, opts.mc, generation, [&](const ExitRecord& rec) {
        if (rec.truncated) {
            ++diag.truncated;
            return;
        }
        const PatchSide& ps = patch.sides[static_cast<std::size_t>(rec.side)];
        ++diag.side_hits[static_cast<std::size_t>(rec.side)];
        double score = rec.Z;
        double interpolated = 0.0;
        if (ps.is_interface) {
            const std::size_t s = index_of(ps.side);
            const CardinalBasis& basis = bases[*ps.stencil];
            std::span<double> h(H.data(), basis.size());
            basis.eval_all(detail::arc_on_side(ps, rec.point), h);
            for (std::size_t m = 0; m < h.size(); ++m) {
                const double v = -rec.Y * h[m];
                sum[slot[s][m]] += v;
                sum_sq[slot[s][m]] += v * v;
                if (problem.exact) interpolated += h[m] * member_exact[s][m];
            }
        } else {
            ++diag.dirichlet_hits;
            score += rec.Y * problem.g(rec.point);
        }
        b_sum += score;
        b_sum_sq += score * score;
        if (problem.exact) {
            const double r = u_i - rec.Y * interpolated - score;
            r_sum += r;
            r_sum_sq += r * r;
        }
    });

    const std::size_t used = diag.samples - diag.truncated;
    const auto mean_se = [used](double s, double s2) {
        if (used == 0) return std::pair{0.0, 0.0};
        const double n = static_cast<double>(used);
        const double mean = s / n;
        const double var = used > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
        return std::pair{mean, std::sqrt(var / n)};
    };
    row.values.resize(n_cols);
    row.standard_errors.resize(n_cols);
    double agg = 0.0;
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (row.columns[c] == static_cast<int>(i)) {
            row.values[c] = 1.0;
            row.standard_errors[c] = 0.0;
            continue;
        }
        std::tie(row.values[c], row.standard_errors[c]) = mean_se(sum[c], sum_sq[c]);
        agg += row.standard_errors[c] * row.standard_errors[c];
    }
    diag.aggregate_se = std::sqrt(agg);
    std::tie(row.b, diag.b_se) = mean_se(b_sum, b_sum_sq);
    if (problem.exact) std::tie(diag.residual_mean, diag.residual_se) = mean_se(r_sum, r_sum_sq);
    diag.flagged = diag.truncated_fraction() > opts.truncation_threshold;
    return row;
}

inline StochasticSystem assemble_system(const Discretization& d, const StencilBases& bases,
                                        const ProblemSpec& problem, const AssemblyOptions& opts) {
    const std::size_t N = d.size();
    const std::size_t interior = d.interior_count();
    std::vector<RowEstimate> rows(interior);
    parallel_for(interior, opts.mc.threads, [&](std::size_t i) { rows[i] = assemble_row(d, bases, problem, i, opts); });

    StochasticSystem sys;
    sys.dirichlet_count = d.dirichlet_count();
    sys.b.resize(static_cast<Eigen::Index>(N));
    sys.b_se = Vector::Zero(static_cast<Eigen::Index>(N));
    sys.rows.resize(N);
    std::vector<Eigen::Triplet<double>> g, se;
    for (std::size_t i = 0; i < interior; ++i) {
        const RowEstimate& r = rows[i];
        for (std::size_t c = 0; c < r.columns.size(); ++c) {
            g.emplace_back(static_cast<int>(i), r.columns[c], r.values[c]);
            se.emplace_back(static_cast<int>(i), r.columns[c], r.standard_errors[c]);
        }
        sys.b[static_cast<Eigen::Index>(i)] = r.b;
        sys.b_se[static_cast<Eigen::Index>(i)] = r.diagnostics.b_se;
        sys.rows[i] = r.diagnostics;
    }
    for (std::size_t k = interior; k < N; ++k) {
        g.emplace_back(static_cast<int>(k), static_cast<int>(k), 1.0);
        se.emplace_back(static_cast<int>(k), static_cast<int>(k), 0.0);
        sys.b[static_cast<Eigen::Index>(k)] = problem.g(d.knots[k].position);
    }
    sys.G.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    sys.G.setFromTriplets(g.begin(), g.end());
    sys.standard_errors.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    sys.standard_errors.setFromTriplets(se.begin(), se.end());
    sys.G.makeCompressed();
    sys.standard_errors.makeCompressed();
    return sys;
}

inline StochasticSystem assemble_system(const Discretization& d, const ProblemSpec& problem,
                                        const AssemblyOptions& opts) {
    return assemble_system(d, build_stencil_bases(d, opts.basis), problem, opts);
}

/// Replaces row i with a fresh estimate from an independent stream generation.
inline void recompute_row(StochasticSystem& sys, const Discretization& d, const StencilBases& bases,
                          const ProblemSpec& problem, std::size_t i, const AssemblyOptions& opts,
                          std::uint32_t generation) {
    if (sys.is_dirichlet_row(i)) throw ParameterError("Dirichlet rows are exact and never recomputed");
    const RowEstimate r = assemble_row(d, bases, problem, i, opts, generation);
    const int row = static_cast<int>(i);
    std::size_t c = 0;
    SparseMatrix::InnerIterator se_it(sys.standard_errors, row);
    for (SparseMatrix::InnerIterator it(sys.G, row); it; ++it, ++se_it, ++c) {
        if (c >= r.columns.size() || it.col() != r.columns[c]) throw std::logic_error("row pattern changed");
        it.valueRef() = r.values[c];
        se_it.valueRef() = r.standard_errors[c];
    }
    sys.b[row] = r.b;
    sys.b_se[row] = r.diagnostics.b_se;
    sys.rows[i] = r.diagnostics;
}

struct ExitHistogram {
    Side side = Side::E;
    bool is_interface = false;
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    double mass() const {
        const std::size_t hits = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
        return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    }
};

struct ExitHistogramSet {
    std::array<ExitHistogram, 4> sides;
    std::size_t dirichlet_hits = 0;  ///< exits through sides on the domain boundary
    std::size_t total = 0;           ///< non-truncated trajectories

    double interface_mass() const {
        double m = 0.0;
        for (const auto& h : sides) m += h.is_interface ? h.mass() : 0.0;
        return m;
    }
    double dirichlet_mass() const {
        return total ? static_cast<double>(dirichlet_hits) / static_cast<double>(total) : 0.0;
    }
};

/// Binned exit points on each side of knot i's patch, same trajectories as assemble_row.
inline ExitHistogramSet exit_histogram(const Discretization& d, const ProblemSpec& problem, std::size_t i,
                                       const McParams& mc, std::size_t bins, std::uint32_t generation = 0) {
    if (i >= d.interior_count()) throw ParameterError("exit_histogram needs a non-Dirichlet knot");
    if (bins == 0) throw ParameterError("need at least one bin");
    const Patch& patch = d.patches[i];
    ExitHistogramSet out;
    for (Side s : all_sides) {
        const PatchSide& ps = patch.side(s);
        ExitHistogram& h = out.sides[index_of(s)];
        h.side = s;
        h.is_interface = ps.is_interface;
        const double length = (s == Side::E || s == Side::W) ? ps.end.y - ps.origin.y : ps.end.x - ps.origin.x;
        h.edges.resize(bins + 1);
        for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = length * static_cast<double>(k) / static_cast<double>(bins);
        h.counts.assign(bins, 0);
    }
    detail::for_each_exit(d, problem, i, mc, generation, [&](const ExitRecord& rec) {
        if (rec.truncated) return;
        ++out.total;
        const PatchSide& ps = patch.sides[static_cast<std::size_t>(rec.side)];
        ExitHistogram& h = out.sides[static_cast<std::size_t>(rec.side)];
        const double z = detail::arc_on_side(ps, rec.point);
        const double length = h.edges.back();
        auto bin = static_cast<std::size_t>(std::clamp(z / length, 0.0, 1.0) * static_cast<double>(bins));
        ++h.counts[std::min(bin, bins - 1)];
        if (!ps.is_interface) ++out.dirichlet_hits;
    });
    for (auto& h : out.sides) h.total = out.total;
    return out;
}

inline nlohmann::json diagnostics_json(const StochasticSystem& sys) {
    using nlohmann::json;
    json rows = json::array();
    for (std::size_t i = 0; i < sys.interior_count(); ++i) {
        const RowDiagnostics& r = sys.rows[i];
        rows.push_back({{"row", i},
                        {"samples", r.samples},
                        {"truncated", r.truncated},
                        {"dirichlet_fraction", r.dirichlet_fraction()},
                        {"b_se", r.b_se},
                        {"aggregate_se", r.aggregate_se},
                        {"residual_mean", r.residual_mean},
                        {"residual_se", r.residual_se},
                        {"generation", r.generation},
                        {"flagged", r.flagged}});
    }
    std::size_t flagged = 0;
    for (const auto& r : sys.rows) flagged += r.flagged ? 1 : 0;
    return {{"schema_version", 1},
            {"size", sys.size()},
            {"dirichlet_count", sys.dirichlet_count},
            {"nonzeros", sys.G.nonZeros()},
            {"flagged_rows", flagged},
            {"rows", std::move(rows)}};
}

}  // namespace pddsparse
