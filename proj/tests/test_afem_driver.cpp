#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "thb/admissibility.hpp"
#include "thb/afem_driver.hpp"
#include "thb/errors.hpp"
#include "thb/galerkin_solver.hpp"
#include "thb/io.hpp"

using namespace thb;
namespace fs = std::filesystem;

namespace {

ProblemSpec smooth(double theta = 0.5, double tol = 1e-3) {
    auto s = make_problem("smooth", 3, 4);
    s.theta = theta;
    s.tol = tol;
    return s;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("thb_driver_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

IterationRecord record(int iter, int ndof, double err2) {
    IterationRecord r;
    r.iter = iter;
    r.ndof = ndof;
    r.ncells = ndof;
    r.energy_err2 = err2;
    r.eta2 = err2;
    r.total_err2 = err2;
    return r;
}

}  // namespace

TEST_CASE("presets satisfy the clamped boundary conditions") {
    for (const std::string name : {"smooth", "discrete"}) {
        const auto p = make_problem(name, 4, 4, 9);
        REQUIRE(p.manufactured());
        const double h = 1e-6;
        auto ux = [&](Point q) {
            const double a = std::max(q.x - h, 0.0), b = std::min(q.x + h, 1.0);
            return (p.exact({b, q.y}) - p.exact({a, q.y})) / (b - a);
        };
        auto uy = [&](Point q) {
            const double a = std::max(q.y - h, 0.0), b = std::min(q.y + h, 1.0);
            return (p.exact({q.x, b}) - p.exact({q.x, a})) / (b - a);
        };
        // One-sided differences at the boundary carry an O(h) error.
        CHECK(boundary_defect(p.exact, ux, uy) <= 1e-4);
    }
    CHECK_FALSE(make_problem("peak", 3, 4).manufactured());
    CHECK_THROWS_AS(make_problem("nonsense", 3, 4), ConfigError);
    CHECK_THROWS_AS(make_problem("smooth", 3, 1), ConfigError);
}

TEST_CASE("spline data stops after one iteration") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto p = make_problem("discrete", 4, 4, seed);
        const auto res = run_afem(p);
        REQUIRE(res.records.size() == 1);
        CHECK(res.stop == StopReason::tolerance);
        CHECK(std::sqrt(res.records[0].eta2) <= 1e-8 * res.records[0].load_norm);
        const auto& V = p.reference->coefficients();
        CHECK((res.final_field->coefficients() - V).norm() <= 1e-8 * V.norm());
    }
}

TEST_CASE("zero data: one iteration, contraction skipped") {
    ProblemSpec p = make_problem("smooth", 3, 4);
    p.f = [](Point) { return 0.0; };
    p.exact = p.f;
    p.exact_laplacian = p.f;
    const auto res = run_afem(p);
    CHECK(res.records.size() == 1);
    CHECK(res.records[0].eta2 == 0.0);
    CHECK(contraction_diagnostic(res.records, 1.0).skipped);
}

TEST_CASE("smooth adaptive run") {
    const auto spec = smooth(0.5, 3e-3);
    const auto res = run_afem(spec);
    const auto& rec = res.records;
    REQUIRE(rec.size() >= 6);
    CHECK(res.stop == StopReason::tolerance);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        for (double v : {rec[k].eta2, rec[k].osc2, rec[k].energy_err2, rec[k].total_err2})
            CHECK((std::isfinite(v) && v >= 0.0));
        if (k > 0) CHECK(rec[k].ncells >= rec[k - 1].ncells);
        if (k >= 2) CHECK(rec[k].eta2 < rec[k - 1].eta2);
    }
    CHECK(is_admissible(res.final_mesh).admissible);

    const auto scan = contraction_scan(rec);
    CHECK_FALSE(scan.front().skipped);
    CHECK(scan.front().max_ratio < 1.0);

    const double lambda = complexity_constant(rec);
    CHECK(lambda > 0.0);
    CHECK(lambda <= 40.0);

    const auto energy = rate_estimate(rec, Quantity::energy);
    const auto eta = rate_estimate(rec, Quantity::eta);
    MESSAGE("rates energy " << energy.s << " eta " << eta.s);
    CHECK(std::abs(energy.s - eta.s) <= 0.2 * energy.s);

    const auto summary = run_summary(spec, res);
    CHECK(summary["marked_cardinality"]["within_10x"].get<bool>());
    CHECK(summary["refined_share_floor"].get<double>() > 0.0);
    CHECK(summary["stop_reason"] == "tolerance");
}

TEST_CASE("theta one refines every cell with a positive indicator") {
    auto spec = smooth(1.0, 1e-12);
    spec.max_iter = 3;
    const auto res = run_afem(spec);
    REQUIRE(res.records.size() == 3);
    for (std::size_t k = 0; k + 1 < res.records.size(); ++k)
        CHECK(res.records[k].marked == res.records[k].ncells);
    CHECK(res.stop == StopReason::max_iterations);
}

TEST_CASE("small theta contracts more slowly") {
    auto slow = smooth(0.1, 1e-12);
    slow.max_iter = 12;
    auto fast = smooth(0.8, 1e-12);
    fast.max_iter = 6;
    const auto a_slow = contraction_diagnostic(run_afem(slow).records, 1.0);
    const auto a_fast = contraction_diagnostic(run_afem(fast).records, 1.0);
    MESSAGE("alpha theta=0.1 " << a_slow.alpha_fit << ", theta=0.8 " << a_fast.alpha_fit);
    CHECK(a_slow.alpha_fit > a_fast.alpha_fit);
}

TEST_CASE("level cap stops the loop") {
    auto spec = smooth(0.5, 1e-12);
    spec.max_level = 1;
    const auto res = run_afem(spec);
    CHECK(res.stop == StopReason::level_cap);
    CHECK(res.final_mesh.num_levels() <= 2);
}

TEST_CASE("invalid loop settings") {
    auto spec = smooth();
    spec.theta = 0.0;
    CHECK_THROWS_AS(run_afem(spec), ConfigError);
    spec = smooth();
    spec.max_iter = 0;
    CHECK_THROWS_AS(run_afem(spec), ConfigError);
}

TEST_CASE("uniform baseline") {
    const auto res = run_uniform(smooth(), 3);
    REQUIRE(res.records.size() == 4);
    for (int l = 0; l < 4; ++l) CHECK(res.records[l].ndof == (4 * (1 << l) - 1) * (4 * (1 << l) - 1));
    const auto fit = rate_estimate(res.records, Quantity::energy);
    CHECK(fit.s == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("rate estimate") {
    std::vector<IterationRecord> rec;
    for (int k = 0; k < 6; ++k) rec.push_back(record(k + 1, 10 << k, 3.0 * std::pow(10 << k, -1.5)));
    // err^2 ~ dim^-1.5 gives err ~ dim^-0.75.
    CHECK(rate_estimate(rec, Quantity::energy).s == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rate_estimate(rec, Quantity::energy).points == 3);

    std::vector<IterationRecord> flat;
    for (int k = 0; k < 5; ++k) flat.push_back(record(k + 1, 10 * (k + 1), 2.0));
    CHECK(rate_estimate(flat, Quantity::eta).s == doctest::Approx(0.0));

    CHECK_THROWS_AS(rate_estimate(std::vector<IterationRecord>(flat.begin(), flat.begin() + 3), Quantity::eta),
                    std::invalid_argument);
    flat[4].eta2 = 0.0;
    flat[3].eta2 = -1.0;
    CHECK_THROWS_AS(rate_estimate(flat, Quantity::eta), std::invalid_argument);
}

TEST_CASE("contraction diagnostic needs three records") {
    std::vector<IterationRecord> rec{record(1, 9, 1.0), record(2, 20, 0.5)};
    CHECK(contraction_diagnostic(rec, 1.0).skipped);
    rec.push_back(record(3, 40, 0.25));
    const auto rep = contraction_diagnostic(rec, 1.0, 1);
    CHECK_FALSE(rep.skipped);
    CHECK(rep.max_ratio == doctest::Approx(0.5));
    CHECK(rep.alpha_fit == doctest::Approx(0.5));
}

TEST_CASE("threshold refinement") {
    const HierPartition p0 = initial_partition(4, 3);
    auto e = [](const HierPartition& m, const LevelCell& c) {
        const double w = m.cell_width(c.level);
        return std::pow(w * w, 0.5) * 2.0;
    };
    const double e0 = e(p0, p0.cells().front());

    SUBCASE("above the initial maximum") {
        const auto r = threshold_refine(e, 1.5 * e0, p0);
        CHECK(r.sweeps == 0);
        CHECK(r.mesh == p0);
    }
    SUBCASE("half the initial value") {
        const auto r = threshold_refine(e, 0.5 * e0, p0);
        CHECK(r.sweeps == 1);
        CHECK(r.mesh.size() == 4 * p0.size());
        CHECK(r.sum_e2 <= r.mesh.size() * 0.25 * e0 * e0);
    }
    SUBCASE("non-contractive functional") {
        auto flat = [](const HierPartition&, const LevelCell&) { return 1.0; };
        CHECK_THROWS_AS(threshold_refine(flat, 0.5, p0, 3), std::exception);
    }
}

TEST_CASE("CSV round trip") {
    const auto res = run_afem(smooth(0.5, 1e-2));
    std::stringstream ss;
    write_iterations_csv(ss, res.records);
    const auto back = read_iterations_csv(ss);
    REQUIRE(back.size() == res.records.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(back[k].ndof == res.records[k].ndof);
        CHECK(back[k].eta2 == res.records[k].eta2);
        CHECK(back[k].energy_err2 == res.records[k].energy_err2);
    }
    std::stringstream bad("iter,foo\n1,2\n");
    CHECK_THROWS_AS(read_iterations_csv(bad), std::invalid_argument);
}

TEST_CASE("output directory and reproducibility") {
    const auto dir = scratch("out");
    AfemOptions opt;
    opt.output = dir / "a";
    opt.dump_indicators = true;
    opt.timing = false;
    auto spec = make_problem("peak", 3, 4, 5);
    spec.max_iter = 4;
    spec.tol = 1e-12;
    const auto res = run_afem(spec, opt);
    for (const char* f : {"iterations.csv", "mesh_0001.json", "mesh_0004.json", "indicators_0002.csv",
                          "field.json", "summary.json"})
        CHECK(fs::exists(opt.output / f));
    CHECK(mesh_from_json(read_json_file((opt.output / "mesh_0004.json").string())) == res.final_mesh);

    AfemOptions again = opt;
    again.output = dir / "b";
    run_afem(spec, again);
    CHECK(slurp(dir / "a" / "iterations.csv") == slurp(dir / "b" / "iterations.csv"));

    // With timing, every column but wall_ms matches.
    AfemOptions timed = opt;
    timed.output = dir / "c";
    timed.timing = true;
    run_afem(spec, timed);
    std::ifstream a(dir / "a" / "iterations.csv"), c(dir / "c" / "iterations.csv");
    std::string la, lc;
    while (std::getline(a, la) && std::getline(c, lc))
        CHECK(la.substr(0, la.rfind(',')) == lc.substr(0, lc.rfind(',')));
    fs::remove_all(dir);
}
