// Command-line driver. Every subcommand rebuilds what it needs from the
// configuration so that artifacts depend only on the config and the seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pddsparse/pddsparse.hpp"

namespace fs = std::filesystem;
using namespace pddsparse;
using nlohmann::json;

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<double> L, n, shape_c, timestep, tol;
    std::optional<int> m, elongation, t, r;
    std::optional<std::size_t> samples, recompute_budget;
    std::vector<std::string> start_mode;
    std::optional<std::string> basis;
    std::vector<int> t_list, r_list;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--out-dir", o.out_dir, "artifact directory");
    app->add_option("--seed", o.seed);
    app->add_option("--threads", o.threads, "0 = hardware concurrency");
    app->add_option("--L", o.L, "domain side length");
    app->add_option("--m", o.m, "subdomains per side");
    app->add_option("--n", o.n, "knots per unit length");
    app->add_option("--elongation", o.elongation);
    app->add_option("--shape-c", o.shape_c, "Gaussian shape parameter in units of the knot spacing");
    app->add_option("--basis", o.basis)->check(CLI::IsMember({"rbf", "sinc"}));
    app->add_option("--samples", o.samples, "trajectories per row");
    app->add_option("--timestep", o.timestep);
    app->add_option("--t", o.t, "Neumann order");
    app->add_option("--r", o.r, "Arnoldi rank");
    app->add_option("--t-list", o.t_list);
    app->add_option("--r-list", o.r_list);
    app->add_option("--tol", o.tol, "GMRES relative tolerance");
    app->add_option("--start-mode", o.start_mode)->check(CLI::IsMember({"coupled", "uncoupled", "ones"}));
    app->add_option("--recompute-budget", o.recompute_budget, "rows algorithm_a may resample");
}

RunConfig resolve(const Overrides& o) {
    RunConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        apply_json(c, json::parse(in));
    }
    json j = json::object();
    if (o.L) j["L"] = *o.L;
    if (o.m) j["m"] = *o.m;
    if (o.n) j["n"] = *o.n;
    if (o.elongation) j["elongation"] = *o.elongation;
    if (o.shape_c) j["shape-c"] = *o.shape_c;
    if (o.basis) j["basis"] = *o.basis;
    if (o.samples) j["samples"] = *o.samples;
    if (o.timestep) j["timestep"] = *o.timestep;
    if (o.seed) j["seed"] = *o.seed;
    if (o.threads) j["threads"] = *o.threads;
    if (o.t) j["t"] = *o.t;
    if (o.r) j["r"] = *o.r;
    if (!o.t_list.empty()) j["t-list"] = o.t_list;
    if (!o.r_list.empty()) j["r-list"] = o.r_list;
    if (o.tol) j["tol"] = *o.tol;
    if (!o.start_mode.empty()) j["start-mode"] = o.start_mode;
    if (o.recompute_budget) j["recompute-budget"] = *o.recompute_budget;
    apply_json(c, j);
    const TessellationCheck check = is_valid_tessellation(c.geometry);
    if (!check.valid) std::fprintf(stderr, "note: tessellation not valid for strong connectivity (%s)\n", check.reason.c_str());
    return c;
}

class Artifacts {
public:
    explicit Artifacts(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void text(const std::string& name, const std::string& content) const {
        std::ofstream out(path(name), std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + path(name));
    }

    void json_file(const std::string& name, const json& j) const { text(name, j.dump(2) + "\n"); }

    void vector_csv(const std::string& name, const std::string& header, const Vector& v) const {
        std::string s = header + "\n";
        for (Eigen::Index i = 0; i < v.size(); ++i) s += std::to_string(i) + "," + format_double(v[i]) + "\n";
        text(name, s);
    }

private:
    fs::path dir_;
};

struct Assembled {
    Discretization d;
    StencilBases bases;
    ProblemSpec problem;
    std::unique_ptr<BenchmarkProblem> bench;
    StochasticSystem sys;
};

std::unique_ptr<Assembled> assemble(const RunConfig& c, Timings& tm) {
    auto a = std::make_unique<Assembled>();
    a->d = build_discretization(c.geometry);
    a->bench = std::make_unique<BenchmarkProblem>(a->d.config.domain_half_side);
    a->problem = a->bench->spec();
    a->bases = tm.time("bases", [&] { return build_stencil_bases(a->d, c.basis); });
    AssemblyOptions opts;
    opts.mc = c.mc;
    opts.basis = c.basis;
    a->sys = tm.time("assembly", [&] { return assemble_system(a->d, a->bases, a->problem, opts); });
    return a;
}

AlgorithmAResult precondition(Assembled& a, const RunConfig& c, Timings& tm) {
    AssemblyOptions opts;
    opts.mc = c.mc;
    opts.basis = c.basis;
    RecomputeContext ctx{&a.d, &a.bases, &a.problem, opts};
    return tm.time("algorithm_a", [&] { return algorithm_a(a.sys, c.recompute_budget, &ctx); });
}

void write_system(const Artifacts& out, const StochasticSystem& sys) {
    write_matrix_market(sys.G, out.path("G.mtx"));
    write_matrix_market(sys.standard_errors, out.path("G_se.mtx"));
    write_vector(sys.b, out.path("b.mtx"));
    write_vector(sys.b_se, out.path("b_se.mtx"));
    out.json_file("diagnostics.json", diagnostics_json(sys));
}

json with_header(json j, const RunConfig& c) {
    j["schema_version"] = 1;
    j["config"] = to_json(c);
    return j;
}

int cmd_geometry(const RunConfig& c, const Artifacts& out, Timings&) {
    const Discretization d = build_discretization(c.geometry);
    out.json_file("geometry.json", to_json(d));
    std::printf("N = %zu, Dirichlet = %zu, stencils = %zu\n", d.size(), d.dirichlet_count(), d.stencils.size());
    return 0;
}

int cmd_assemble(const RunConfig& c, const Artifacts& out, Timings& tm) {
    auto a = assemble(c, tm);
    write_system(out, a->sys);
    std::printf("N = %zu, nnz = %ld\n", a->sys.size(), static_cast<long>(a->sys.G.nonZeros()));
    return 0;
}

int cmd_analyze(const RunConfig& c, const Artifacts& out, Timings& tm) {
    auto a = assemble(c, tm);
    write_system(out, a->sys);
    const StructureReport s = tm.time("structure", [&] { return structure_check(a->sys, &a->d); });
    const FetInputs fet = fet_inputs_from_series(a->d);
    const ConditionReport cr = tm.time("condition", [&] { return condition_report(a->sys, fet); });
    out.json_file("structure.json", with_header(to_json(s), c));
    out.json_file("condition.json", with_header(to_json(cr), c));
    std::printf("kappa_inf = %.6g (bound %.6g), ||G^-1|| = %.6g (bound %.6g)\n", cr.kappa_inf, cr.condition_bound,
                cr.inverse.value, cr.inverse_bound);
    return 0;
}

int cmd_precondition(const RunConfig& c, const Artifacts& out, Timings& tm) {
    auto a = assemble(c, tm);
    const AlgorithmAResult pa = precondition(*a, c, tm);
    write_system(out, a->sys);
    json bounds = json::array();
    if (a->sys.size() <= kDenseCap) {
        for (int t : c.t_list) {
            if (t < 1) continue;
            bounds.push_back(to_json(tm.time("bounds_t" + std::to_string(t), [&] { return precond_bounds(a->sys.G, pa, t); })));
        }
    }
    json j = with_header(summary_json(pa), c);
    j.erase("row_excess");
    j["bounds"] = bounds;
    out.json_file("precondition.json", j);
    std::printf("delta = %.6g, recomputed rows = %zu\n", pa.delta, pa.recomputed_rows.size());
    return 0;
}

int cmd_solve(const RunConfig& c, const Artifacts& out, Timings& tm) {
    auto a = assemble(c, tm);
    const AlgorithmAResult pa = precondition(*a, c, tm);
    write_system(out, a->sys);
    const GridCell cell = tm.time("solve", [&] {
        return solve_cell(a->sys, pa, c.t, c.r, c.start_modes.front(), c.tol, static_cast<int>(a->sys.size()));
    });
    write_vector(cell.solve.x, out.path("x.mtx"));
    out.vector_csv("solution.csv", "index,value", cell.solve.x);
    json j = with_header(to_json(cell.solve), c);
    j["rank"] = cell.rank;
    j["lowrank_matvecs"] = cell.lowrank_matvecs;
    out.json_file("solve.json", j);
    std::printf("iterations = %d, converged = %d, true residual = %.3g\n", cell.solve.iterations,
                cell.solve.converged ? 1 : 0, cell.solve.true_residual);
    return cell.solve.converged ? 0 : 2;
}

int cmd_table_grid(const RunConfig& c, const Artifacts& out, Timings& tm) {
    auto a = assemble(c, tm);
    const AlgorithmAResult pa = precondition(*a, c, tm);
    const GridReport g = run_table_grid(a->sys, pa, c.t_list, c.r_list, c.start_modes, c.tol, &tm);
    out.text("table.csv", grid_csv(g));
    out.json_file("table.json", with_header(to_json(g), c));
    std::fputs(grid_csv(g).c_str(), stdout);
    return 0;
}

int cmd_spectrum(const RunConfig& c, const Artifacts& out, Timings& tm, const std::string& option) {
    auto a = assemble(c, tm);
    const AlgorithmAResult pa = precondition(*a, c, tm);
    SpectrumOption opt = SpectrumOption::raw;
    if (option == "neumann") opt = SpectrumOption::neumann;
    if (option == "arnoldi") opt = SpectrumOption::neumann_arnoldi;
    const auto ev = tm.time("spectrum", [&] { return dump_spectrum(a->sys, opt, &pa, c.t, c.r, c.start_modes.front()); });
    out.text("spectrum_" + option + ".csv", spectrum_csv(ev));
    std::printf("p90 |lambda - 1| = %.6g\n", percentile_distance_from_one(ev, 0.9));
    return 0;
}

int cmd_benchmark(const RunConfig& c, const Artifacts& out, Timings& tm) {
    const BenchmarkResult r = run_benchmark(c, tm);
    write_system(out, r.system);
    write_vector(r.solution, out.path("x.mtx"));
    std::string s = "index,x,y,kind,computed,exact,error\n";
    for (std::size_t k = 0; k < r.discretization.size(); ++k) {
        const Knot& kn = r.discretization.knots[k];
        const double u = BenchmarkProblem::exact(kn.position);
        const double v = r.solution[static_cast<Eigen::Index>(k)];
        s += std::to_string(k) + "," + format_double(kn.position.x) + "," + format_double(kn.position.y) + "," +
             std::string(to_string(kn.kind)) + "," + format_double(v) + "," + format_double(u) + "," +
             format_double(v - u) + "\n";
    }
    out.text("solution.csv", s);
    out.text("table.csv", grid_csv(r.grid));
    out.json_file("benchmark.json", to_json(r, c));
    std::printf("N = %zu, max error = %.4g, rms = %.4g, budget = %.4g, iterations = %d\n", r.discretization.size(),
                r.max_error, r.rms_error, r.error_budget, r.solve.solve.iterations);
    return 0;
}

int cmd_scenario(const RunConfig& c, const Artifacts& out, Timings& tm, const std::string& id, double rel_h) {
    ScenarioSpec spec = default_scenario(id, c.geometry.elongation);
    spec.mc.samples = c.mc.samples;
    spec.mc.seed = c.mc.seed;
    spec.mc.threads = c.mc.threads;
    spec.basis = c.basis;
    spec.relative_timestep = rel_h;
    const ScenarioResult r = run_scenario(spec, &tm);
    out.text("scenario_" + id + ".csv", scenario_csv(r));
    json j = to_json(r);
    j["samples"] = spec.mc.samples;
    j["relative_timestep"] = rel_h;
    j["seed"] = spec.mc.seed;
    out.json_file("scenario_" + id + ".json", j);
    std::fputs(scenario_csv(r).c_str(), stdout);
    std::printf("alpha = %.4f, beta = %.4g\n", r.alpha, r.beta);
    return 0;
}

int cmd_fet_validate(const RunConfig& c, const Artifacts& out, Timings& tm) {
    McParams p = c.mc;
    json j = {{"schema_version", 1}, {"seed", p.seed}, {"samples", p.samples}, {"timestep", p.timestep}};
    const FetEstimate disc = tm.time("disc", [&] { return mean_fet_mc(DiscRegion{{0, 0}, 1.0}, {0, 0}, p, 0); });
    j["disc"] = {{"mc", disc.mean}, {"se", disc.standard_error}, {"exact", fet_circle(1.0, 0.0)}};
    const RectRegion sq{-0.5, 0.5, -0.5, 0.5};
    const FetEstimate square = tm.time("square", [&] { return mean_fet_mc(sq, {0, 0}, p, 1); });
    j["square"] = {{"mc", square.mean}, {"se", square.standard_error}, {"series", fet_rect_series(0.5, 0.5, {0.0, 0.0})}};
    out.json_file("fet.json", j);
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic domain decomposition with sparse stochastic systems"};
    app.require_subcommand(1);
    Overrides o;
    std::string spectrum_option = "raw";
    std::string scenario_id = "i";
    double scenario_rel_h = 4e-4;

    const auto sub = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, o);
        return s;
    };
    auto* geometry = sub("geometry", "build and dump the discretization");
    auto* assemble_cmd = sub("assemble", "assemble the stochastic system");
    auto* analyze = sub("analyze", "structure and condition reports");
    auto* precond = sub("precondition", "positive-entry cancellation and Neumann bounds");
    auto* solve = sub("solve", "preconditioned GMRES solve");
    auto* benchmark = sub("benchmark", "manufactured-solution benchmark");
    auto* scenario = sub("scenario", "condition-number scaling sweep");
    scenario->add_option("--id", scenario_id)->check(CLI::IsMember({"i", "ii", "iii"}));
    scenario->add_option("--relative-timestep", scenario_rel_h, "h / H^2");
    auto* grid = sub("table-grid", "iteration counts over (t, r, start mode)");
    auto* spectrum = sub("spectrum", "dense eigenvalues of the (preconditioned) operator");
    spectrum->add_option("--option", spectrum_option)->check(CLI::IsMember({"raw", "neumann", "arnoldi"}));
    auto* fet = sub("fet-validate", "first-exit-time Monte Carlo against closed forms");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(o);
        const Artifacts out(o.out_dir);
        Timings tm;
        int rc = 0;
        if (geometry->parsed()) rc = cmd_geometry(cfg, out, tm);
        if (assemble_cmd->parsed()) rc = cmd_assemble(cfg, out, tm);
        if (analyze->parsed()) rc = cmd_analyze(cfg, out, tm);
        if (precond->parsed()) rc = cmd_precondition(cfg, out, tm);
        if (solve->parsed()) rc = cmd_solve(cfg, out, tm);
        if (benchmark->parsed()) rc = cmd_benchmark(cfg, out, tm);
        if (scenario->parsed()) rc = cmd_scenario(cfg, out, tm, scenario_id, scenario_rel_h);
        if (grid->parsed()) rc = cmd_table_grid(cfg, out, tm);
        if (spectrum->parsed()) rc = cmd_spectrum(cfg, out, tm, spectrum_option);
        if (fet->parsed()) rc = cmd_fet_validate(cfg, out, tm);
        out.json_file("timings.json", tm.to_json());
        return rc;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
