#include "thb/afem_driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "thb/errors.hpp"
#include "thb/galerkin_solver.hpp"
#include "thb/io.hpp"
#include "thb/marking.hpp"

namespace thb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string numbered(const char* stem, int k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, k, ext);
    return buf;
}

// Solve and estimate on one mesh; fills everything but marked/refinement data.
struct Step {
    std::shared_ptr<const ThbBasis> basis;
    SplineField field;
    IndicatorMap indicators;
    IterationRecord record;
};

Step solve_step(const ProblemSpec& spec, const HierPartition& mesh, int iter) {
    auto basis = std::make_shared<const ThbBasis>(mesh);
    const auto space = constrain_space(basis);
    const auto system = assemble(space, spec.f);
    SolveStats stats;
    SplineField U = solve(system, &stats);
    IndicatorMap map = estimate(U, spec.f);

    IterationRecord r;
    r.iter = iter;
    r.ncells = static_cast<long>(mesh.size());
    r.ndof = space.size();
    r.eta2 = map.eta2_total;
    r.osc2 = map.osc2_total;
    if (spec.manufactured()) {
        const double e = energy_norm_error(U, spec.exact_laplacian);
        r.energy_err2 = e * e;
        r.total_err2 = r.energy_err2 + r.osc2;
    } else {
        r.energy_err2 = kNaN;
        r.total_err2 = kNaN;
    }
    r.max_level = mesh.num_levels() - 1;
    r.load_norm = system.load.norm();
    r.solver_residual = stats.relative_residual;
    r.refined_share = kNaN;
    r.alpha_step = kNaN;
    return {std::move(basis), std::move(U), std::move(map), r};
}

double quasi_error(const IterationRecord& r, double C) {
    return std::isnan(r.energy_err2) ? C * r.eta2 : r.energy_err2 + C * r.eta2;
}

void finish_record(IterationRecord& r, const std::vector<IterationRecord>& previous) {
    if (!previous.empty()) {
        const double q0 = quasi_error(previous.back(), 1.0);
        r.alpha_step = q0 > 0.0 ? quasi_error(r, 1.0) / q0 : kNaN;
    }
}

void emit(const AfemOptions& options, AfemResult& result, const Step& step) {
    if (!options.output.empty()) {
        if (options.write_meshes)
            write_json_file((options.output / numbered("mesh", step.record.iter, "json")).string(),
                            mesh_to_json(step.basis->mesh()));
        if (options.dump_indicators) {
            std::ofstream out(options.output / numbered("indicators", step.record.iter, "csv"));
            if (!out) throw std::runtime_error("cannot write indicator dump");
            write_indicator_csv(out, step.indicators);
        }
        std::ofstream csv(options.output / "iterations.csv");
        if (!csv) throw std::runtime_error("cannot write iterations.csv");
        write_iterations_csv(csv, result.records);
    }
    if (options.on_record) options.on_record(result.records.back());
}

void write_final(const AfemOptions& options, const ProblemSpec& spec, const AfemResult& result) {
    if (options.output.empty()) return;
    if (result.final_field)
        write_json_file((options.output / "field.json").string(), field_to_json(*result.final_field));
    write_json_file((options.output / "summary.json").string(), run_summary(spec, result));
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::tolerance: return "tolerance";
        case StopReason::converged: return "converged";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::level_cap: return "level_cap";
    }
    return "unknown";
}

HierPartition uniform_partition(int base_cells, int degree, int level, int max_levels) {
    HierPartition mesh = initial_partition(base_cells, degree, max_levels);
    for (int l = 0; l < level; ++l) mesh = mesh_refine(mesh, mesh.cells());
    return mesh;
}

AfemResult run_afem(const ProblemSpec& spec, const AfemOptions& options) {
    if (!(spec.theta > 0.0 && spec.theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
    if (spec.max_iter < 1) throw ConfigError("max_iter must be positive");
    if (spec.max_level < 0 || spec.max_level >= 16) throw ConfigError("max_level must lie in [0, 15]");
    if (!options.output.empty()) std::filesystem::create_directories(options.output);

    AfemResult result{{}, StopReason::max_iterations,
                      initial_partition(spec.base_cells, spec.degree, spec.max_level + 1), {}};
    HierPartition mesh = result.final_mesh;
    for (int iter = 1;; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        Step step = solve_step(spec, mesh, iter);
        finish_record(step.record, result.records);

        std::optional<StopReason> stop;
        MarkingResult marking;
        if (std::sqrt(step.record.eta2) <= spec.tol) {
            stop = StopReason::tolerance;
        } else {
            marking = dorfler_mark(step.indicators.eta2(), step.basis->cells(), spec.theta);
            if (marking.converged || marking.marked.empty()) stop = StopReason::converged;
        }
        std::vector<LevelCell> marked;
        for (int k : marking.marked) marked.push_back(step.basis->cells()[k]);
        if (!stop && iter >= spec.max_iter) stop = StopReason::max_iterations;
        if (!stop && std::any_of(marked.begin(), marked.end(),
                                 [&](const LevelCell& c) { return c.level >= spec.max_level; }))
            stop = StopReason::level_cap;

        if (!stop) {
            step.record.marked = static_cast<int>(marked.size());
            HierPartition next = mesh_refine(mesh, marked);
            std::set<int> omega;
            for (int c = 0; c < step.basis->num_cells(); ++c)
                if (!next.is_active(step.basis->cells()[c]))
                    for (int q : step.basis->patch(c)) omega.insert(q);
            const std::vector<int> idx(omega.begin(), omega.end());
            step.record.refined_share = step.indicators.eta2_on(idx) / step.indicators.eta2_total;
            mesh = std::move(next);
        }
        step.record.wall_ms = options.timing ? elapsed_ms(start) : 0.0;
        result.records.push_back(step.record);
        result.final_mesh = step.basis->mesh();
        result.final_field = step.field;
        emit(options, result, step);
        if (stop) {
            result.stop = *stop;
            break;
        }
    }
    write_final(options, spec, result);
    return result;
}

AfemResult run_uniform(const ProblemSpec& spec, int levels, const AfemOptions& options) {
    if (levels < 0 || levels >= 16) throw ConfigError("uniform levels must lie in [0, 15]");
    if (!options.output.empty()) std::filesystem::create_directories(options.output);
    AfemResult result{{}, StopReason::max_iterations,
                      initial_partition(spec.base_cells, spec.degree, levels + 1), {}};
    for (int level = 0; level <= levels; ++level) {
        const auto start = std::chrono::steady_clock::now();
        const HierPartition mesh = uniform_partition(spec.base_cells, spec.degree, level, levels + 1);
        Step step = solve_step(spec, mesh, level + 1);
        finish_record(step.record, result.records);
        step.record.marked = level < levels ? static_cast<int>(mesh.size()) : 0;
        step.record.refined_share = level < levels ? 1.0 : kNaN;
        step.record.wall_ms = options.timing ? elapsed_ms(start) : 0.0;
        result.records.push_back(step.record);
        result.final_mesh = mesh;
        result.final_field = step.field;
        emit(options, result, step);
    }
    write_final(options, spec, result);
    return result;
}

ContractionReport contraction_diagnostic(const std::vector<IterationRecord>& records, double C,
                                         int first) {
    ContractionReport rep;
    rep.C = C;
    if (records.size() < 3) return rep;
    for (const auto& r : records)
        if (std::isnan(r.energy_err2)) return rep;
    rep.skipped = false;
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k + 1 < records.size(); ++k) {
        if (records[k].iter < first) continue;
        const double q0 = quasi_error(records[k], C);
        const double q1 = quasi_error(records[k + 1], C);
        rep.ratios.push_back(q0 > 0.0 ? q1 / q0 : 0.0);
    }
    for (const auto& r : records) {
        if (r.iter < first) continue;
        const double q = quasi_error(r, C);
        if (q > 0.0) {
            xs.push_back(r.iter);
            ys.push_back(std::log(q));
        }
    }
    rep.max_ratio = rep.ratios.empty() ? 0.0 : *std::max_element(rep.ratios.begin(), rep.ratios.end());
    if (xs.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
        mx /= xs.size();
        my /= ys.size();
        double sxy = 0, sxx = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sxy += (xs[k] - mx) * (ys[k] - my);
            sxx += (xs[k] - mx) * (xs[k] - mx);
        }
        rep.alpha_fit = std::exp(sxy / sxx);
    }
    return rep;
}

std::vector<ContractionReport> contraction_scan(const std::vector<IterationRecord>& records, int first) {
    std::vector<ContractionReport> all;
    for (int k = -3; k <= 3; ++k) all.push_back(contraction_diagnostic(records, std::pow(10.0, k), first));
    auto best = std::min_element(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.max_ratio < b.max_ratio;
    });
    std::vector<ContractionReport> out{*best};
    out.insert(out.end(), all.begin(), all.end());
    return out;
}

RateFit rate_fit(const std::vector<double>& dims, const std::vector<double>& values) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < dims.size(); ++k)
        if (values[k] > 0.0 && dims[k] > 0.0 && std::isfinite(values[k])) {
            xs.push_back(std::log(dims[k]));
            ys.push_back(std::log(values[k]));
        }
    if (xs.size() < 3) throw std::invalid_argument("rate fit needs at least 3 positive values");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxy += (xs[k] - mx) * (ys[k] - my);
        sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    double res = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double d = ys[k] - (my + slope * (xs[k] - mx));
        res += d * d;
    }
    return {slope == 0.0 ? 0.0 : -slope, std::sqrt(res / n), static_cast<int>(xs.size())};
}

RateFit rate_estimate(const std::vector<IterationRecord>& records, Quantity q) {
    const std::size_t n = records.size();
    if (n < 4) throw std::invalid_argument("rate estimate needs at least 4 records");
    const std::size_t start = std::min(n / 2, n - 3);
    std::vector<double> dims, values;
    for (std::size_t k = start; k < n; ++k) {
        const auto& r = records[k];
        const double v = q == Quantity::energy ? r.energy_err2 : q == Quantity::eta ? r.eta2 : r.total_err2;
        dims.push_back(r.ndof);
        values.push_back(std::sqrt(v));
    }
    return rate_fit(dims, values);
}

double complexity_constant(const std::vector<IterationRecord>& records) {
    double worst = kNaN;
    long marked = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (k > 0 && marked > 0) {
            const double lambda = static_cast<double>(records[k].ncells - records[0].ncells) / marked;
            worst = std::isnan(worst) ? lambda : std::max(worst, lambda);
        }
        marked += records[k].marked;
    }
    return worst;
}

ThresholdResult threshold_refine(const CellFunctional& e, double eps, const HierPartition& initial,
                                 int max_sweeps) {
    if (!(eps > 0.0)) throw std::invalid_argument("threshold_refine: eps must be positive");
    ThresholdResult out{initial, 0, 0.0};
    for (;;) {
        std::vector<LevelCell> marked;
        double sum = 0.0;
        for (const auto& c : out.mesh.cells()) {
            const double v = e(out.mesh, c);
            sum += v * v;
            if (v > eps) marked.push_back(c);
        }
        if (marked.empty()) {
            out.sum_e2 = sum;
            if (sum > static_cast<double>(out.mesh.size()) * eps * eps * (1 + 1e-12))
                throw std::logic_error("threshold_refine: sum of squared errors exceeds #P eps^2");
            return out;
        }
        if (out.sweeps == max_sweeps)
            throw ResourceError("threshold_refine: no termination after " + std::to_string(max_sweeps) +
                                " sweeps (functional not contractive?)");
        out.mesh = mesh_refine(out.mesh, marked);
        ++out.sweeps;
    }
}

void write_iterations_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
    out << "iter,ncells,ndof,eta2,osc2,energy_err2,total_err2,marked,alpha_step,wall_ms\n";
    std::ostringstream line;
    line.precision(17);
    for (const auto& r : records) {
        line.str("");
        line << r.iter << ',' << r.ncells << ',' << r.ndof << ',' << r.eta2 << ',' << r.osc2 << ','
             << r.energy_err2 << ',' << r.total_err2 << ',' << r.marked << ',' << r.alpha_step << ','
             << r.wall_ms << '\n';
        out << line.str();
    }
}

std::vector<IterationRecord> read_iterations_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) ||
        line.rfind("iter,ncells,ndof,eta2,osc2,energy_err2,total_err2,marked,alpha_step", 0) != 0)
        throw std::invalid_argument("iterations CSV: unexpected header");
    std::vector<IterationRecord> out;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() < 9) throw std::invalid_argument("iterations CSV: short row " + std::to_string(row));
        try {
            IterationRecord r;
            r.iter = std::stoi(fields[0]);
            r.ncells = std::stol(fields[1]);
            r.ndof = std::stoi(fields[2]);
            r.eta2 = std::stod(fields[3]);
            r.osc2 = std::stod(fields[4]);
            r.energy_err2 = std::stod(fields[5]);
            r.total_err2 = std::stod(fields[6]);
            r.marked = std::stoi(fields[7]);
            r.alpha_step = std::stod(fields[8]);
            r.wall_ms = fields.size() > 9 ? std::stod(fields[9]) : 0.0;
            out.push_back(r);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("iterations CSV: bad number in row " + std::to_string(row));
        }
    }
    return out;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json rate_json(const std::vector<IterationRecord>& records, Quantity q) {
    try {
        const RateFit fit = rate_estimate(records, q);
        return {{"s", fit.s}, {"residual", fit.residual}, {"points", fit.points}};
    } catch (const std::invalid_argument&) {
        return nullptr;
    }
}

}  // namespace

nlohmann::json run_summary(const ProblemSpec& spec, const AfemResult& result) {
    const auto& rec = result.records;
    nlohmann::json j;
    j["problem"] = spec.name;
    j["degree"] = spec.degree;
    j["base_cells"] = spec.base_cells;
    j["theta"] = spec.theta;
    j["tol"] = spec.tol;
    j["seed"] = spec.seed;
    j["stop_reason"] = to_string(result.stop);
    j["iterations"] = rec.size();
    if (!rec.empty()) {
        j["final"] = {{"ncells", rec.back().ncells},
                      {"ndof", rec.back().ndof},
                      {"eta2", rec.back().eta2},
                      {"energy_err2", number_or_null(rec.back().energy_err2)},
                      {"solver_residual", rec.back().solver_residual}};
    }
    j["rates"] = {{"energy", rate_json(rec, Quantity::energy)},
                  {"eta", rate_json(rec, Quantity::eta)},
                  {"total", rate_json(rec, Quantity::total)}};

    const auto scan = contraction_scan(rec);
    if (scan.front().skipped) {
        j["contraction"] = nullptr;
    } else {
        nlohmann::json grid = nlohmann::json::array();
        for (std::size_t k = 1; k < scan.size(); ++k)
            grid.push_back({{"C", scan[k].C}, {"max_ratio", scan[k].max_ratio}, {"alpha", scan[k].alpha_fit}});
        j["contraction"] = {{"best_C", scan.front().C},
                            {"max_ratio", scan.front().max_ratio},
                            {"alpha", scan.front().alpha_fit},
                            {"scan", grid}};
    }
    j["complexity_lambda"] = number_or_null(complexity_constant(rec));

    // Effectivity eta / |||u - U||| from iteration 2 on.
    double eff_min = kNaN, eff_max = kNaN;
    for (const auto& r : rec)
        if (r.iter >= 2 && r.energy_err2 > 0.0) {
            const double eff = std::sqrt(r.eta2 / r.energy_err2);
            eff_min = std::isnan(eff_min) ? eff : std::min(eff_min, eff);
            eff_max = std::isnan(eff_max) ? eff : std::max(eff_max, eff);
        }
    j["effectivity"] = {{"min", number_or_null(eff_min)}, {"max", number_or_null(eff_max)}};

    // #M_l * rho_l^{1/s} against its median.
    const Quantity q = spec.manufactured() ? Quantity::total : Quantity::eta;
    const nlohmann::json rate = rate_json(rec, q);
    if (!rate.is_null() && rate["s"].get<double>() > 0.0) {
        const double s = rate["s"].get<double>();
        std::vector<double> vals;
        for (const auto& r : rec)
            if (r.marked > 0) vals.push_back(r.marked * std::pow(std::sqrt(q == Quantity::total ? r.total_err2 : r.eta2), 1.0 / s));
        if (!vals.empty()) {
            std::vector<double> sorted = vals;
            std::sort(sorted.begin(), sorted.end());
            const double med = sorted[sorted.size() / 2];
            const bool within = std::all_of(vals.begin(), vals.end(), [&](double v) { return v <= 10 * med && v >= med / 10; });
            j["marked_cardinality"] = {{"values", vals}, {"median", med}, {"within_10x", within}};
        }
    }

    // Refined-share floor over steps where the total error contracted.
    double floor = kNaN;
    for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
        const double a = q == Quantity::total ? rec[k].total_err2 : rec[k].eta2;
        const double b = q == Quantity::total ? rec[k + 1].total_err2 : rec[k + 1].eta2;
        if (b < a && std::isfinite(rec[k].refined_share))
            floor = std::isnan(floor) ? rec[k].refined_share : std::min(floor, rec[k].refined_share);
    }
    j["refined_share_floor"] = number_or_null(floor);
    return j;
}

}  // namespace thb
