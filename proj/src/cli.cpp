#include "thb/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "thb/admissibility.hpp"
#include "thb/afem_driver.hpp"
#include "thb/errors.hpp"
#include "thb/io.hpp"

namespace thb {

namespace {

struct RunFlags {
    std::string problem = "smooth";
    int degree = 3;
    int base_cells = 4;
    double theta = 0.5;
    double tol = 1e-4;
    int max_iter = 30;
    int max_level = 10;
    std::string output = "afem_out";
    std::uint64_t seed = 0;
    bool dump_indicators = false;
    bool no_timing = false;
    int levels = 4;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--problem", f.problem, "smooth, peak or discrete")
        ->check(CLI::IsMember(problem_names()));
    cmd->add_option("--degree", f.degree, "spline degree")->check(CLI::Range(2, 4));
    cmd->add_option("--base-cells", f.base_cells, "cells per side at level 0")->check(CLI::Range(2, 1024));
    cmd->add_option("--tol", f.tol, "stop when eta <= tol")->check(CLI::PositiveNumber);
    cmd->add_option("--max-level", f.max_level, "deepest refinement level")->check(CLI::Range(0, 15));
    cmd->add_option("--output", f.output, "output directory");
    cmd->add_option("--seed", f.seed, "seed of the discrete problem");
    cmd->add_flag("--dump-indicators", f.dump_indicators, "write indicators_NNNN.csv per step");
    cmd->add_flag("--no-timing", f.no_timing, "write wall_ms = 0 for byte-identical CSVs");
}

ProblemSpec spec_from(const RunFlags& f) {
    ProblemSpec spec = make_problem(f.problem, f.degree, f.base_cells, f.seed);
    spec.theta = f.theta;
    spec.tol = f.tol;
    spec.max_iter = f.max_iter;
    spec.max_level = f.max_level;
    return spec;
}

void print_record(const IterationRecord& r) {
    std::printf("iter %3d  cells %7ld  dof %7d  eta %.3e", r.iter, r.ncells, r.ndof, std::sqrt(r.eta2));
    if (std::isfinite(r.energy_err2)) std::printf("  err %.3e", std::sqrt(r.energy_err2));
    std::printf("  marked %6d  %.0f ms\n", r.marked, r.wall_ms);
    std::fflush(stdout);
}

int run_loop(const RunFlags& f, bool uniform) {
    const ProblemSpec spec = spec_from(f);
    AfemOptions opt;
    opt.output = f.output;
    opt.dump_indicators = f.dump_indicators;
    opt.timing = !f.no_timing;
    opt.on_record = print_record;
    const AfemResult res = uniform ? run_uniform(spec, f.levels, opt) : run_afem(spec, opt);
    std::printf("stop: %s\n", to_string(res.stop).c_str());
    std::printf("wrote %s\n", (opt.output / "iterations.csv").string().c_str());
    return 0;
}

int check_mesh(const std::string& path) {
    const MeshDocument doc = parse_mesh_document(read_json_file(path));
    const auto structural = structural_violations(doc.degree, doc.base_cells, doc.cells);
    if (!structural.empty()) {
        std::printf("admissible: false\n");
        for (const auto& v : structural) std::printf("violation: %s\n", v.c_str());
        return 1;
    }
    const HierPartition mesh = HierPartition::from_cells(doc.degree, doc.base_cells, doc.cells);
    const auto report = is_admissible(mesh);
    std::printf("cells: %zu  levels: %d\n", mesh.size(), mesh.num_levels());
    std::printf("admissible: %s\n", report.admissible ? "true" : "false");
    for (const auto& v : report.violations)
        std::printf("violation: cell %s touched by levels %d..%d\n", to_string(v.cell).c_str(), v.min_level,
                    v.max_level);
    return report.admissible ? 0 : 1;
}

int report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const auto records = read_iterations_csv(in);
    nlohmann::json out;
    out["records"] = records.size();
    for (auto [name, q] : {std::pair{"energy", Quantity::energy}, std::pair{"eta", Quantity::eta},
                           std::pair{"total", Quantity::total}}) {
        try {
            const RateFit fit = rate_estimate(records, q);
            out["rates"][name] = {{"s", fit.s}, {"residual", fit.residual}, {"points", fit.points}};
        } catch (const std::invalid_argument&) {
            out["rates"][name] = nullptr;
        }
    }
    const auto scan = contraction_scan(records);
    if (scan.front().skipped)
        out["contraction"] = nullptr;
    else
        out["contraction"] = {{"best_C", scan.front().C},
                              {"max_ratio", scan.front().max_ratio},
                              {"alpha", scan.front().alpha_fit}};
    const double lambda = complexity_constant(records);
    out["complexity_lambda"] = std::isfinite(lambda) ? nlohmann::json(lambda) : nlohmann::json();
    std::printf("%s\n", out.dump(1).c_str());
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Adaptive THB-spline solver for the clamped biharmonic problem"};
    app.require_subcommand(1);

    RunFlags run_flags, uniform_flags;
    auto* run = app.add_subcommand("run", "adaptive SOLVE-ESTIMATE-MARK-REFINE loop");
    add_run_flags(run, run_flags);
    run->add_option("--theta", run_flags.theta, "Doerfler parameter")->check(CLI::Range(0.0, 1.0));
    run->add_option("--max-iter", run_flags.max_iter, "iteration limit")->check(CLI::PositiveNumber);

    auto* uniform = app.add_subcommand("uniform", "uniform refinement baseline");
    add_run_flags(uniform, uniform_flags);
    uniform->add_option("--levels", uniform_flags.levels, "finest uniform level")->check(CLI::Range(0, 10));

    std::string mesh_path;
    auto* check = app.add_subcommand("check-mesh", "admissibility of a mesh JSON file");
    check->add_option("mesh", mesh_path, "mesh file")->required();

    std::string csv_path;
    auto* rep = app.add_subcommand("report", "rates and contraction from iterations.csv");
    rep->add_option("csv", csv_path, "iterations.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            if (!(run_flags.theta > 0.0)) throw ConfigError("--theta must lie in (0, 1]");
            return run_loop(run_flags, false);
        }
        if (uniform->parsed()) return run_loop(uniform_flags, true);
        if (check->parsed()) return check_mesh(mesh_path);
        if (rep->parsed()) return report(csv_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s (condition estimate %.3e)\n", e.what(), e.condition_estimate());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace thb
