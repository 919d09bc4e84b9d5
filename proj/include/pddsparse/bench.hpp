#pragma once

// Manufactured-solution benchmark, condition-number sweeps, preconditioner
// grids and spectrum dumps. Everything returned here is deterministic for a
// fixed seed; wall-clock timings are kept in a separate structure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "pddsparse/assembly.hpp"
#include "pddsparse/geometry.hpp"
#include "pddsparse/interp.hpp"
#include "pddsparse/krylov.hpp"
#include "pddsparse/matrix_analysis.hpp"
#include "pddsparse/preconditioning.hpp"
#include "pddsparse/stochastics.hpp"

namespace pddsparse {

/// u(x, y) of the benchmark, Poisson source F = lap u by finite differences.
class BenchmarkProblem {
public:
    static double exact(Vec2 p) {
        const double x = p.x, y = p.y;
        const double root = std::sqrt(1.0 + x * x / 100.0 + y * y / 50.0);
        const double wave = std::sin(3.0 * x / 25.0 + y / 20.0) + std::sin(x / 20.0 - 3.0 * y / 25.0);
        return 3.0 + std::sin(root) / 3.0 + std::tanh(wave) / 3.0;
    }

    /// Fourth-order central difference Laplacian of exact().
    static double laplacian_fd(Vec2 p, double step = 1e-3) {
        const double h = step;
        const double c = exact(p);
        const auto second = [&](Vec2 e) {
            const double f1 = exact(p + h * e), f2 = exact(p + 2.0 * h * e);
            const double b1 = exact(p - h * e), b2 = exact(p - 2.0 * h * e);
            return (-f2 + 16.0 * f1 - 30.0 * c + 16.0 * b1 - b2) / (12.0 * h * h);
        };
        return second({1.0, 0.0}) + second({0.0, 1.0});
    }

    static double gradient_norm(Vec2 p, double step = 1e-5) {
        const double gx = (exact({p.x + step, p.y}) - exact({p.x - step, p.y})) / (2.0 * step);
        const double gy = (exact({p.x, p.y + step}) - exact({p.x, p.y - step})) / (2.0 * step);
        return std::hypot(gx, gy);
    }

    /// Tabulates F on [-a, a]^2 with spacing close to `spacing`.
    explicit BenchmarkProblem(double half_side, double spacing = 0.05) : a_(half_side) {
        cells_ = std::max(1, static_cast<int>(std::ceil(2.0 * a_ / spacing)));
        step_ = 2.0 * a_ / cells_;
        table_.resize(static_cast<std::size_t>(cells_ + 1) * (cells_ + 1));
        for (int j = 0; j <= cells_; ++j) {
            for (int i = 0; i <= cells_; ++i) {
                table_[static_cast<std::size_t>(j) * (cells_ + 1) + i] =
                    laplacian_fd({-a_ + i * step_, -a_ + j * step_});
            }
        }
    }

    /// Bilinear lookup of F; points are clamped into the domain.
    double source_laplacian(Vec2 p) const {
        const double u = std::clamp((p.x + a_) / step_, 0.0, static_cast<double>(cells_));
        const double v = std::clamp((p.y + a_) / step_, 0.0, static_cast<double>(cells_));
        const int i = std::min(static_cast<int>(u), cells_ - 1);
        const int j = std::min(static_cast<int>(v), cells_ - 1);
        const double s = u - i, t = v - j;
        const std::size_t w = static_cast<std::size_t>(cells_ + 1);
        const double f00 = table_[j * w + i], f10 = table_[j * w + i + 1];
        const double f01 = table_[(j + 1) * w + i], f11 = table_[(j + 1) * w + i + 1];
        return (1 - s) * (1 - t) * f00 + s * (1 - t) * f10 + (1 - s) * t * f01 + s * t * f11;
    }

    /// Brownian convention: lap u = F becomes (1/2) lap u + f = 0 with f = -F/2.
    ProblemSpec spec() const {
        ProblemSpec p;
        p.source = [this](Vec2 x) { return -0.5 * source_laplacian(x); };
        p.dirichlet = &BenchmarkProblem::exact;
        p.exact = &BenchmarkProblem::exact;
        return p;
    }

private:
    double a_;
    int cells_ = 1;
    double step_ = 1.0;
    std::vector<double> table_;
};

enum class StartMode { coupled, uncoupled };

inline StartMode parse_start_mode(const std::string& s) {
    if (s == "coupled") return StartMode::coupled;
    if (s == "uncoupled" || s == "ones") return StartMode::uncoupled;
    throw ConfigError("unknown start mode '" + s + "'");
}

inline std::string to_string(StartMode m) { return m == StartMode::coupled ? "coupled" : "uncoupled"; }

inline BasisMode parse_basis(const std::string& s) {
    if (s == "rbf") return BasisMode::gaussian_rbf;
    if (s == "sinc") return BasisMode::sinc_limit;
    throw ConfigError("unknown basis '" + s + "'");
}

/// All tunables of a CLI run. JSON keys match the long flag names.
struct RunConfig {
    DiscretizationConfig geometry;
    // Flat Gaussians on stencils ending at the boundary have Lebesgue
    // constants near 1e5 at c = 5 dz; the sinc limit stays bounded.
    BasisOptions basis{BasisMode::sinc_limit, 5.0, 0.0};
    McParams mc{1e-2, 50000, 20240601, 100'000'000, 0};
    std::vector<int> t_list{0, 1, 2};
    std::vector<int> r_list{0, 50, 100};
    int t = 1;
    int r = 100;
    double tol = 1e-12;
    std::vector<StartMode> start_modes{StartMode::coupled, StartMode::uncoupled};
    std::size_t recompute_budget = 0;
};

inline void apply_json(RunConfig& c, const nlohmann::json& j) {
    const auto get = [&](const char* key, auto& target) {
        if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    double L = c.geometry.side_length();
    get("L", L);
    c.geometry.domain_half_side = 0.5 * L;
    get("m", c.geometry.grid_count);
    get("n", c.geometry.knot_density);
    get("elongation", c.geometry.elongation);
    get("shape-c", c.basis.shape_ratio);
    get("ridge", c.basis.ridge);
    if (j.contains("basis")) c.basis.mode = parse_basis(j.at("basis").get<std::string>());
    get("samples", c.mc.samples);
    get("timestep", c.mc.timestep);
    get("seed", c.mc.seed);
    get("threads", c.mc.threads);
    get("max-steps", c.mc.max_steps);
    get("t-list", c.t_list);
    get("r-list", c.r_list);
    get("t", c.t);
    get("r", c.r);
    get("tol", c.tol);
    get("recompute-budget", c.recompute_budget);
    if (j.contains("start-mode")) {
        c.start_modes.clear();
        const auto& v = j.at("start-mode");
        if (v.is_array()) {
            for (const auto& s : v) c.start_modes.push_back(parse_start_mode(s.get<std::string>()));
        } else {
            c.start_modes.push_back(parse_start_mode(v.get<std::string>()));
        }
    }
}

inline nlohmann::json to_json(const RunConfig& c) {
    std::vector<std::string> modes;
    for (StartMode m : c.start_modes) modes.push_back(to_string(m));
    return {{"L", c.geometry.side_length()},
            {"m", c.geometry.grid_count},
            {"n", c.geometry.knot_density},
            {"elongation", c.geometry.elongation},
            {"basis", std::string(to_string(c.basis.mode))},
            {"shape-c", c.basis.shape_ratio},
            {"ridge", c.basis.ridge},
            {"samples", c.mc.samples},
            {"timestep", c.mc.timestep},
            {"seed", c.mc.seed},
            {"max-steps", c.mc.max_steps},
            {"t-list", c.t_list},
            {"r-list", c.r_list},
            {"t", c.t},
            {"r", c.r},
            {"tol", c.tol},
            {"start-mode", modes},
            {"recompute-budget", c.recompute_budget}};
}

/// Wall-clock seconds by stage; never mixed into deterministic reports.
struct Timings {
    std::vector<std::pair<std::string, double>> stages;

    template <class Fn>
    auto time(const std::string& name, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            stages.emplace_back(name, seconds_since(start));
        } else {
            auto result = fn();
            stages.emplace_back(name, seconds_since(start));
            return result;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : stages) j[k] = v;
        return j;
    }

private:
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

struct GridCell {
    int t = 0;
    int r = 0;
    StartMode mode = StartMode::coupled;
    int rank = 0;
    bool breakdown = false;
    int lowrank_matvecs = 0;
    SolveReport solve;
    CostVerdict verdict;
    std::string error;
};

inline Vector start_vector(StartMode mode, const Vector& b) {
    return mode == StartMode::coupled ? b : Vector::Ones(b.size());
}

/// One preconditioned solve: Neumann order t, Arnoldi rank r (0 = none).
inline GridCell solve_cell(const StochasticSystem& sys, const AlgorithmAResult& a, int t, int r, StartMode mode,
                           double tol, int maxit, double* lowrank_seconds = nullptr) {
    GridCell cell;
    cell.t = t;
    cell.r = r;
    cell.mode = mode;
    const NeumannPrecond p(a, t);
    std::optional<ArnoldiCorrection> corr;
    const Vector x0 = Vector::Zero(sys.b.size());
    const auto t0 = std::chrono::steady_clock::now();
    if (r > 0) {
        corr = build_arnoldi_correction(sys.G, p, r, start_vector(mode, sys.b - sys.G * x0));
        cell.rank = corr->rank;
        cell.breakdown = corr->breakdown;
        cell.lowrank_matvecs = corr->matvecs;
    }
    if (lowrank_seconds) *lowrank_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool raw = (t == 0 && r == 0);
    const ArnoldiCorrection* c = corr ? &*corr : nullptr;
    const LinearOperator A = [&](const Vector& v) { return Vector(sys.G * v); };
    const LinearOperator M = raw ? LinearOperator{} : LinearOperator([&](const Vector& v) { return apply_pi(p, c, v); });
    cell.solve = gmres(A, sys.b, x0, M, tol, maxit);
    return cell;
}

struct GridReport {
    std::vector<GridCell> cells;
    int raw_iterations = 0;
};

inline GridReport run_table_grid(const StochasticSystem& sys, const AlgorithmAResult& a, const std::vector<int>& ts,
                                 const std::vector<int>& rs, const std::vector<StartMode>& modes, double tol,
                                 Timings* timings = nullptr) {
    GridReport rep;
    const int maxit = static_cast<int>(sys.size());
    GridCell raw = solve_cell(sys, a, 0, 0, StartMode::coupled, tol, maxit);
    rep.raw_iterations = raw.solve.iterations;
    for (int t : ts) {
        for (int r : rs) {
            for (StartMode mode : modes) {
                if (t == 0 && r == 0) {
                    if (mode != modes.front()) continue;
                    GridCell c = raw;
                    c.mode = mode;
                    c.verdict = cost_model(0, 0, c.solve.iterations, rep.raw_iterations);
                    rep.cells.push_back(std::move(c));
                    continue;
                }
                if (r == 0 && mode != modes.front()) continue;  // the start vector only matters with r > 0
                GridCell c;
                double lowrank = 0.0;
                const auto start = std::chrono::steady_clock::now();
                try {
                    c = solve_cell(sys, a, t, r, mode, tol, maxit, &lowrank);
                    c.verdict = cost_model(t, c.rank, c.solve.iterations, rep.raw_iterations);
                } catch (const std::exception& e) {
                    c.t = t;
                    c.r = r;
                    c.mode = mode;
                    c.error = e.what();
                }
                if (timings) {
                    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    const std::string key = "t" + std::to_string(t) + "_r" + std::to_string(r) + "_" + to_string(mode);
                    timings->stages.emplace_back(key + "_lowrank", lowrank);
                    timings->stages.emplace_back(key + "_gmres", total - lowrank);
                }
                rep.cells.push_back(std::move(c));
            }
        }
    }
    return rep;
}

inline std::string grid_csv(const GridReport& g) {
    std::string out = "t,r,start,rank,iterations,converged,lowrank_matvecs,cost,pays,true_residual,error\n";
    for (const GridCell& c : g.cells) {
        out += std::to_string(c.t) + "," + std::to_string(c.r) + "," + to_string(c.mode) + "," +
               std::to_string(c.rank) + "," + std::to_string(c.solve.iterations) + "," +
               (c.solve.converged ? "1" : "0") + "," + std::to_string(c.lowrank_matvecs) + "," +
               std::to_string(c.verdict.cost) + "," + (c.verdict.pays ? "1" : "0") + "," +
               format_double(c.solve.true_residual) + "," + (c.error.empty() ? "" : "\"" + c.error + "\"") + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const GridReport& g) {
    nlohmann::json cells = nlohmann::json::array();
    for (const GridCell& c : g.cells) {
        cells.push_back({{"t", c.t},
                         {"r", c.r},
                         {"start", to_string(c.mode)},
                         {"rank", c.rank},
                         {"breakdown", c.breakdown},
                         {"iterations", c.solve.iterations},
                         {"converged", c.solve.converged},
                         {"lowrank_matvecs", c.lowrank_matvecs},
                         {"cost", c.verdict.cost},
                         {"pays", c.verdict.pays},
                         {"true_residual", c.solve.true_residual},
                         {"error", c.error}});
    }
    return {{"raw_iterations", g.raw_iterations}, {"cells", std::move(cells)}};
}

enum class SpectrumOption { raw, neumann, neumann_arnoldi };

/// Eigenvalues of M G for the chosen left preconditioner M.
inline std::vector<std::complex<double>> dump_spectrum(const StochasticSystem& sys, SpectrumOption option,
                                                       const AlgorithmAResult* a = nullptr, int t = 0, int r = 0,
                                                       StartMode mode = StartMode::coupled) {
    const auto N = static_cast<Eigen::Index>(sys.size());
    if (static_cast<std::size_t>(N) > kDenseCap) {
        throw UnsupportedOperation("spectrum refused: N = " + std::to_string(N) + " exceeds the dense cap of " +
                                   std::to_string(kDenseCap));
    }
    DenseMatrix A(sys.G);
    if (option != SpectrumOption::raw) {
        if (!a) throw ParameterError("preconditioned spectrum needs the algorithm_a result");
        const NeumannPrecond p(*a, t);
        std::optional<ArnoldiCorrection> corr;
        if (option == SpectrumOption::neumann_arnoldi && r > 0) {
            corr = build_arnoldi_correction(sys.G, p, r, start_vector(mode, sys.b));
        }
        for (Eigen::Index j = 0; j < N; ++j) {
            A.col(j) = apply_pi(p, corr ? &*corr : nullptr, Vector(A.col(j)));
        }
    }
    Eigen::EigenSolver<DenseMatrix> es(A, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalue computation failed");
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + N);
    std::sort(ev.begin(), ev.end(), [](auto x, auto y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return ev;
}

inline double percentile_distance_from_one(const std::vector<std::complex<double>>& ev, double q) {
    std::vector<double> d;
    d.reserve(ev.size());
    for (auto z : ev) d.push_back(std::abs(z - 1.0));
    return detail::quantile(d, q);
}

inline std::string spectrum_csv(const std::vector<std::complex<double>>& ev) {
    std::string out = "re,im\n";
    for (auto z : ev) out += format_double(z.real()) + "," + format_double(z.imag()) + "\n";
    return out;
}

struct BenchmarkResult {
    Discretization discretization;
    StochasticSystem system;
    StructureReport structure;
    std::optional<ConditionReport> condition;
    FetInputs fet;
    AlgorithmAResult precond;
    GridReport grid;
    GridCell solve;
    Vector solution;
    double max_error = 0.0;
    double rms_error = 0.0;
    bool dirichlet_exact = false;
    double interpolation_defect = 0.0;  ///< max |sum_j H_j u_j - u| on patch sides
    double max_gradient = 0.0;
    double max_residual_se = 0.0;
    double max_residual_mean = 0.0;
    double error_budget = 0.0;
    double residual_bound = 0.0;  ///< ||G^-1|| max |mean residual at u|, bounds the error up to solve tolerance
};

/// Largest interpolation error of the exact solution over all interface sides.
inline double interpolation_defect(const Discretization& d, const StencilBases& bases,
                                   double (*u)(Vec2), int samples_per_side = 41) {
    double worst = 0.0;
    std::vector<double> H;
    for (std::size_t i = 0; i < d.interior_count(); ++i) {
        for (const PatchSide& ps : d.patches[i].sides) {
            if (!ps.stencil) continue;
            const Stencil& st = d.stencils[*ps.stencil];
            const CardinalBasis& basis = bases[*ps.stencil];
            H.resize(basis.size());
            for (int s = 0; s < samples_per_side; ++s) {
                const double w = static_cast<double>(s) / (samples_per_side - 1);
                const Vec2 p = ps.origin + w * (ps.end - ps.origin);
                basis.eval_all(detail::arc_on_side(ps, p), H);
                double v = 0.0;
                for (std::size_t k = 0; k < st.members.size(); ++k) v += H[k] * u(d.knots[st.members[k]].position);
                worst = std::max(worst, std::abs(v - u(p)));
            }
        }
    }
    return worst;
}

inline BenchmarkResult run_benchmark(const RunConfig& cfg, Timings& timings) {
    BenchmarkResult res;
    res.discretization = build_discretization(cfg.geometry);
    const Discretization& d = res.discretization;
    const BenchmarkProblem bench(d.config.domain_half_side);
    const ProblemSpec problem = bench.spec();
    AssemblyOptions opts;
    opts.mc = cfg.mc;
    opts.basis = cfg.basis;
    const StencilBases bases = timings.time("bases", [&] { return build_stencil_bases(d, cfg.basis); });
    res.system = timings.time("assembly", [&] { return assemble_system(d, bases, problem, opts); });
    RecomputeContext ctx{&d, &bases, &problem, opts};
    res.precond = timings.time("algorithm_a", [&] { return algorithm_a(res.system, cfg.recompute_budget, &ctx); });
    res.structure = timings.time("structure", [&] { return structure_check(res.system, &d); });
    res.fet = fet_inputs_from_series(d);
    res.condition = timings.time("condition", [&] { return condition_report(res.system, res.fet); });
    res.grid = timings.time("grid", [&] {
        return run_table_grid(res.system, res.precond, cfg.t_list, cfg.r_list, cfg.start_modes, cfg.tol, &timings);
    });
    res.solve = timings.time("solve", [&] {
        return solve_cell(res.system, res.precond, cfg.t, cfg.r, cfg.start_modes.front(), cfg.tol,
                          static_cast<int>(res.system.size()));
    });
    // Identity rows: their components are the data itself.
    res.solution = res.solve.solve.x;
    for (std::size_t k = res.system.interior_count(); k < res.system.size(); ++k) {
        res.solution[static_cast<Eigen::Index>(k)] = res.system.b[static_cast<Eigen::Index>(k)];
    }
    double sq = 0.0;
    res.dirichlet_exact = true;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const double u = BenchmarkProblem::exact(d.knots[k].position);
        const double e = std::abs(res.solution[static_cast<Eigen::Index>(k)] - u);
        res.max_error = std::max(res.max_error, e);
        sq += e * e;
        if (k >= d.interior_count() && res.solution[static_cast<Eigen::Index>(k)] != u) res.dirichlet_exact = false;
        res.max_gradient = std::max(res.max_gradient, BenchmarkProblem::gradient_norm(d.knots[k].position));
    }
    res.rms_error = std::sqrt(sq / static_cast<double>(d.size()));
    res.interpolation_defect = interpolation_defect(d, bases, &BenchmarkProblem::exact);
    for (std::size_t i = 0; i < res.system.interior_count(); ++i) {
        res.max_residual_se = std::max(res.max_residual_se, res.system.rows[i].residual_se);
        res.max_residual_mean = std::max(res.max_residual_mean, std::abs(res.system.rows[i].residual_mean));
    }
    const double inv = res.condition->inverse.value;
    res.error_budget = inv * (3.0 * res.max_residual_se + 0.5826 * std::sqrt(cfg.mc.timestep) * res.max_gradient +
                              res.interpolation_defect);
    res.residual_bound = inv * res.max_residual_mean;
    return res;
}

inline nlohmann::json to_json(const BenchmarkResult& r, const RunConfig& cfg) {
    nlohmann::json j = {{"schema_version", 1},
                        {"config", to_json(cfg)},
                        {"knot_count", r.discretization.size()},
                        {"dirichlet_count", r.discretization.dirichlet_count()},
                        {"nonzeros", r.system.G.nonZeros()},
                        {"structure", to_json(r.structure)},
                        {"fet", {{"max_domain_fet", r.fet.max_domain_fet}, {"min_patch_fet", r.fet.min_patch_fet}}},
                        {"precond", summary_json(r.precond)},
                        {"grid", to_json(r.grid)},
                        {"solve", to_json(r.solve.solve)},
                        {"max_error", r.max_error},
                        {"rms_error", r.rms_error},
                        {"dirichlet_exact", r.dirichlet_exact},
                        {"interpolation_defect", r.interpolation_defect},
                        {"max_gradient", r.max_gradient},
                        {"max_residual_se", r.max_residual_se},
                        {"max_residual_mean", r.max_residual_mean},
                        {"error_budget", r.error_budget},
                        {"residual_bound", r.residual_bound}};
    if (r.condition) j["condition"] = to_json(*r.condition);
    j["precond"].erase("row_excess");
    return j;
}

struct ScenarioPoint {
    DiscretizationConfig geometry;
    std::size_t N = 0;
    ConditionReport condition;
    FetInputs fet;
    bool kappa_within_twice_inverse = false;  ///< kappa_inf <= 2 ||G^-1||
    bool skeel_within_one_plus_kappa = false;  ///< Skeel <= 1 + kappa_inf on the clipped matrix
};

struct ScenarioResult {
    std::string id;
    std::vector<ScenarioPoint> points;
    double alpha = 0.0;
    double beta = 0.0;
};

struct ScenarioSpec {
    std::string id;  ///< "i", "ii" or "iii"
    std::vector<DiscretizationConfig> points;
    McParams mc;
    double relative_timestep = 4e-4;  ///< h = relative_timestep * H^2
    BasisOptions basis{BasisMode::sinc_limit, 5.0, 0.0};
    bool dense = true;
};

/// Default sweeps: i grows L at fixed H, n; ii grows n at fixed L, H;
/// iii grows m at fixed L, n.
inline ScenarioSpec default_scenario(const std::string& id, int elongation = 3) {
    ScenarioSpec s;
    s.id = id;
    s.mc.samples = 1000;
    const auto cfg = [&](double L, int m, double n) { return DiscretizationConfig{0.5 * L, m, n, elongation}; };
    if (id == "i") {
        for (int L : {8, 12, 16, 20}) s.points.push_back(cfg(L, L / 2, 4));
    } else if (id == "ii") {
        for (int n : {4, 8, 16, 32}) s.points.push_back(cfg(8, 4, n));
    } else if (id == "iii") {
        for (int m : {4, 6, 8, 12}) s.points.push_back(cfg(24, m, 4));
    } else {
        throw ConfigError("unknown scenario '" + id + "' (expected i, ii or iii)");
    }
    return s;
}

/// Least-squares fit of log(y) = log(beta) + alpha log(x).
inline std::pair<double, double> fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double beta = std::exp((sy - alpha * sx) / n);
    return {alpha, beta};
}

inline ScenarioResult run_scenario(const ScenarioSpec& spec, Timings* timings = nullptr) {
    if (spec.points.size() < 4) throw ConfigError("a scenario needs at least 4 sweep points");
    ScenarioResult res;
    res.id = spec.id;
    const ProblemSpec laplace;
    for (const DiscretizationConfig& g : spec.points) {
        const auto start = std::chrono::steady_clock::now();
        const Discretization d = build_discretization(g);
        AssemblyOptions opts;
        opts.mc = spec.mc;
        opts.mc.timestep = spec.relative_timestep * g.subdomain_size() * g.subdomain_size();
        opts.basis = spec.basis;
        const StochasticSystem sys = assemble_system(d, laplace, opts);
        ScenarioPoint p;
        p.geometry = g;
        p.N = d.size();
        p.fet = fet_inputs_from_series(d);
        p.condition = condition_report(sys, p.fet, spec.dense);
        p.kappa_within_twice_inverse = p.condition.kappa_inf <= 2.0 * p.condition.inverse.value;
        p.skeel_within_one_plus_kappa = p.condition.skeel_clipped && p.condition.kappa_inf_clipped &&
                          *p.condition.skeel_clipped <= 1.0 + *p.condition.kappa_inf_clipped;
        res.points.push_back(std::move(p));
        if (timings) {
            timings->stages.emplace_back(
                "scenario_" + spec.id + "_N" + std::to_string(d.size()),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
    }
    std::vector<double> xs, ys;
    for (const auto& p : res.points) {
        xs.push_back(static_cast<double>(p.N));
        ys.push_back(std::max(p.condition.kappa_inf - 1.0, 1e-300));
    }
    std::tie(res.alpha, res.beta) = fit_power_law(xs, ys);
    return res;
}

inline std::string scenario_csv(const ScenarioResult& r) {
    std::string out = "scenario,L,m,n,N,kappa_inf,kappa_2,inv_norm_inf,condition_bound,inverse_bound,skeel_clipped\n";
    for (const auto& p : r.points) {
        out += r.id + "," + format_double(p.geometry.side_length()) + "," + std::to_string(p.geometry.grid_count) + "," +
               format_double(p.geometry.knot_density) + "," + std::to_string(p.N) + "," +
               format_double(p.condition.kappa_inf) + "," +
               (p.condition.kappa_2 ? format_double(*p.condition.kappa_2) : std::string("nan")) + "," +
               format_double(p.condition.inverse.value) + "," + format_double(p.condition.condition_bound) + "," +
               format_double(p.condition.inverse_bound) + "," +
               (p.condition.skeel_clipped ? format_double(*p.condition.skeel_clipped) : std::string("nan")) + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const ScenarioResult& r) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points) {
        pts.push_back({{"L", p.geometry.side_length()},
                       {"m", p.geometry.grid_count},
                       {"n", p.geometry.knot_density},
                       {"N", p.N},
                       {"condition", to_json(p.condition)},
                       {"max_domain_fet", p.fet.max_domain_fet},
                       {"min_patch_fet", p.fet.min_patch_fet},
                       {"kappa_within_twice_inverse", p.kappa_within_twice_inverse},
                       {"skeel_within_one_plus_kappa", p.skeel_within_one_plus_kappa}});
    }
    return {{"schema_version", 1}, {"scenario", r.id}, {"alpha", r.alpha}, {"beta", r.beta}, {"points", pts}};
}

}  // namespace pddsparse
