#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "test_support.hpp"
#include "thb/admissibility.hpp"
#include "thb/errors.hpp"
#include "thb/hier_mesh.hpp"
#include "thb/io.hpp"

using namespace thb;
using thb::testing::overlaps;

namespace {

double total_area(const HierPartition& mesh) {
    double a = 0.0;
    for (const auto& c : mesh.cells()) a += std::pow(mesh.cell_width(c.level), 2);
    return a;
}

// S(tau, k) from the definition: every level-k B-spline whose support meets
// tau contributes all level-k cells of its support.
std::set<LevelCell> support_extension_oracle(const HierPartition& mesh, const LevelCell& tau, int k) {
    const int r = mesh.degree();
    const int n = mesh.cells_per_side(k);
    const long scale = 1L << (tau.level - k);  // tau units per level-k cell
    std::set<LevelCell> out;
    for (int bi = 0; bi < n + r; ++bi)
        for (int bj = 0; bj < n + r; ++bj) {
            const int x0 = std::max(bi - r, 0), x1 = std::min(bi, n - 1) + 1;
            const int y0 = std::max(bj - r, 0), y1 = std::min(bj, n - 1) + 1;
            if (!overlaps(x0 * scale, x1 * scale, tau.i, tau.i + 1) ||
                !overlaps(y0 * scale, y1 * scale, tau.j, tau.j + 1))
                continue;
            for (int i = x0; i < x1; ++i)
                for (int j = y0; j < y1; ++j) out.insert({k, i, j});
        }
    return out;
}

// Pairs of active cells sharing a boundary segment of positive length.
std::size_t adjacent_pairs(const HierPartition& mesh) {
    const auto cells = mesh.cells();
    const int deep = mesh.num_levels() - 1;
    std::size_t count = 0;
    for (std::size_t a = 0; a < cells.size(); ++a)
        for (std::size_t b = a + 1; b < cells.size(); ++b) {
            auto ext = [&](const LevelCell& c) {
                const long s = 1L << (deep - c.level);
                return std::array<long, 4>{c.i * s, (c.i + 1) * s, c.j * s, (c.j + 1) * s};
            };
            const auto ea = ext(cells[a]);
            const auto eb = ext(cells[b]);
            const bool share_x = (ea[1] == eb[0] || eb[1] == ea[0]) && overlaps(ea[2], ea[3], eb[2], eb[3]);
            const bool share_y = (ea[3] == eb[2] || eb[3] == ea[2]) && overlaps(ea[0], ea[1], eb[0], eb[1]);
            if (share_x || share_y) ++count;
        }
    return count;
}

}  // namespace

TEST_CASE("initial partition") {
    const auto mesh = initial_partition(4, 3);
    CHECK(mesh.size() == 16);
    CHECK(mesh.num_levels() == 1);
    for (const auto& c : mesh.cells()) CHECK(c.level == 0);
    CHECK(is_admissible(mesh).admissible);
    CHECK(edges(mesh).interior.size() == 2 * 4 * 3);
    CHECK(mesh.diameter({0, 0, 0}) == doctest::Approx(std::sqrt(2.0) / 4));
    CHECK_THROWS_AS(initial_partition(1, 2), ConfigError);
    CHECK_THROWS_AS(initial_partition(2, 2), ConfigError);  // no interior function left
    CHECK_THROWS_AS(initial_partition(3, 4), ConfigError);
    CHECK_THROWS_AS(initial_partition(4, 1), ConfigError);
    CHECK_NOTHROW(initial_partition(3, 2));
}

TEST_CASE("support extension") {
    const auto mesh = initial_partition(4, 2);
    SUBCASE("interior cell gives the 5x5 block") {
        const LevelCell tau{0, 2, 2};
        const auto ext = support_extension(mesh, tau, 0);
        CHECK(ext.size() == 16);  // clipped by the 4x4 grid
        const auto fine = mesh_refine(mesh, mesh.cells());
        const LevelCell t1{1, 3, 4};
        const auto e1 = support_extension(fine, t1, 1);
        CHECK(e1.size() == 25);
        CHECK(std::set<LevelCell>(e1.begin(), e1.end()) == support_extension_oracle(fine, t1, 1));
    }
    SUBCASE("corner cell is clipped") {
        const LevelCell corner{0, 0, 0};
        const auto ext = support_extension(mesh, corner, 0);
        CHECK(ext.size() == 9);
        CHECK(std::set<LevelCell>(ext.begin(), ext.end()) == support_extension_oracle(mesh, corner, 0));
    }
    SUBCASE("matches the enumeration oracle on coarser levels") {
        for (int r = 2; r <= 4; ++r) {
            const auto m = initial_partition(4, r);
            for (int l = 0; l <= 2; ++l)
                for (int k = 0; k <= l; ++k)
                    for (const LevelCell tau : {LevelCell{l, 0, 0}, LevelCell{l, 3, 5},
                                                LevelCell{l, (4 << l) - 1, 1}}) {
                        if (tau.i >= (4 << l) || tau.j >= (4 << l)) continue;
                        const auto ext = support_extension(m, tau, k);
                        CHECK(std::set<LevelCell>(ext.begin(), ext.end()) ==
                              support_extension_oracle(m, tau, k));
                        if (k == l) CHECK(std::find(ext.begin(), ext.end(), tau) != ext.end());
                    }
        }
    }
}

TEST_CASE("cell neighbourhood") {
    const auto mesh = initial_partition(4, 2);
    CHECK(cell_neighborhood(mesh, {0, 1, 1}).empty());
    CHECK_THROWS_AS(cell_neighborhood(mesh, {1, 0, 0}), std::invalid_argument);

    const auto refined = recursive_refine(mesh, {0, 0, 0});
    const LevelCell child{1, 1, 1};
    // Brute force: active level-0 cells containing a cell of S(child, 1).
    std::set<LevelCell> expected;
    for (const auto& s : support_extension_oracle(refined, child, 1))
        for (const auto& c : refined.cells())
            if (c.level == 0 && c.contains(s)) expected.insert(c);
    const auto nb = cell_neighborhood(refined, child);
    CHECK(std::set<LevelCell>(nb.begin(), nb.end()) == expected);
    CHECK(expected == std::set<LevelCell>{{0, 0, 1}, {0, 1, 0}, {0, 1, 1}});

    const auto uniform1 = mesh_refine(mesh, mesh.cells());
    for (const auto& c : uniform1.cells()) CHECK(cell_neighborhood(uniform1, c).empty());
}

TEST_CASE("recursive and mesh refinement") {
    const auto mesh = initial_partition(4, 3);
    const auto once = recursive_refine(mesh, {0, 0, 0});
    CHECK(once.size() == 19);
    CHECK(total_area(once) == doctest::Approx(1.0).epsilon(1e-12));

    const auto twice = recursive_refine(once, {1, 1, 1});
    CHECK(twice.size() > 19 + 3);  // neighbourhood was refined first
    CHECK(is_admissible(twice).admissible);

    CHECK_THROWS_AS(recursive_refine(mesh, {1, 0, 0}), std::invalid_argument);
    CHECK(mesh_refine(mesh, {}) == mesh);
    const auto all = mesh_refine(mesh, mesh.cells());
    CHECK(all.size() == 64);
    for (const auto& c : all.cells()) CHECK(c.level == 1);
    CHECK_THROWS_AS(mesh_refine(mesh, {{1, 0, 0}}), std::invalid_argument);

    HierPartition capped = initial_partition(4, 2, 2);
    capped = mesh_refine(capped, {{0, 0, 0}});
    CHECK_THROWS_AS(mesh_refine(capped, {{1, 0, 0}}), ResourceError);
}

TEST_CASE("randomised refinement keeps partitions admissible and monotone") {
    std::mt19937_64 rng(2024);
    for (int run = 0; run < 60; ++run) {
        const int r = 2 + run % 3;
        HierPartition mesh = initial_partition(4, r);
        std::uniform_int_distribution<int> steps_dist(1, 6);
        const int steps = steps_dist(rng);
        for (int s = 0; s < steps; ++s) {
            const auto cells = mesh.cells();
            std::vector<LevelCell> marked;
            std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
            for (int m = 0; m < 3; ++m) {
                const auto c = cells[pick(rng)];
                if (c.level < 6) marked.push_back(c);
            }
            RefineStats stats;
            const auto next = mesh_refine(mesh, marked, &stats);
            // Monotone: every old cell is present or covered by descendants.
            for (const auto& c : mesh.cells()) REQUIRE(next.in_subdomain(c));
            REQUIRE(next.size() == mesh.size() + 3 * stats.split);
            mesh = next;
        }
        REQUIRE(total_area(mesh) == doctest::Approx(1.0).epsilon(1e-12));
        const auto report = is_admissible(mesh);
        REQUIRE(report.admissible);
        // Level-l subdomain stays inside U^{l-1}.
        for (int l = 1; l < mesh.num_levels(); ++l) {
            std::set<LevelCell> aux;
            for (const auto& c : auxiliary_domain(mesh, l - 1)) aux.insert(c);
            for (int i = 0; i < mesh.cells_per_side(l); ++i)
                for (int j = 0; j < mesh.cells_per_side(l); ++j) {
                    const LevelCell c{l, i, j};
                    if (mesh.in_subdomain(c)) REQUIRE(aux.contains(c.parent()));
                }
        }
    }
}

TEST_CASE("admissibility violations are detected") {
    // Plain splits without closure: a 3x3 block of level-2 cells' parents
    // inside a 2x2 block of refined level-0 cells. Level-2 functions exist
    // there while truncated level-0 functions still reach the block border.
    HierPartition mesh = initial_partition(4, 2);
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) mesh.split({0, i, j});
    for (int i = 3; i <= 5; ++i)
        for (int j = 3; j <= 5; ++j) mesh.split({1, i, j});
    const auto report = is_admissible(mesh);
    CHECK_FALSE(report.admissible);
    REQUIRE_FALSE(report.violations.empty());
    bool level_two_hit = false;
    for (const auto& v : report.violations) {
        CHECK(v.max_level - v.min_level >= 2);
        if (v.cell.level == 2) level_two_hit = true;
    }
    CHECK(level_two_hit);
}

TEST_CASE("auxiliary domain") {
    const auto mesh = initial_partition(4, 2);
    CHECK(auxiliary_domain(mesh, 0).size() == 16);
    CHECK(auxiliary_domain(mesh, 3).empty());
    const auto once = recursive_refine(mesh, {0, 2, 1});
    const auto u0 = auxiliary_domain(once, 0);
    for (const auto& c : once.cells_at(1))
        CHECK(std::find(u0.begin(), u0.end(), c.parent()) != u0.end());
    // The refined cell's own level-1 auxiliary domain is empty: every support
    // extension leaves the 2x2 block.
    CHECK(auxiliary_domain(once, 1).empty());
}

TEST_CASE("edges") {
    const auto mesh = initial_partition(4, 3);
    const auto e = edges(mesh);
    CHECK(e.interior.size() == 24);
    CHECK(e.boundary.size() == 16);
    const auto once = recursive_refine(mesh, {0, 0, 0});
    const auto e1 = edges(once);
    CHECK(e1.interior.size() == adjacent_pairs(once));
    CHECK(e1.interior.size() == 24 + 4 + 2);
    for (const auto& edge : e1.interior) CHECK(edge.num_cells == 2);
    for (const auto& edge : e1.boundary) CHECK(edge.num_cells == 1);
    // Boundary edge lengths sum to one per side.
    std::array<double, 4> side_length{};
    for (const auto& edge : e1.boundary) {
        const int side = edge.axis * 2 + (edge.line == 0 ? 0 : 1);
        side_length[side] += edge_length(once, edge);
    }
    for (double s : side_length) CHECK(s == doctest::Approx(1.0));

    std::mt19937_64 rng(8);
    for (int run = 0; run < 10; ++run) {
        const auto m = thb::testing::random_mesh(rng, 2 + run % 2, 4, 3, 5, 400);
        const auto es = edges(m);
        CHECK(es.interior.size() == adjacent_pairs(m));
        for (const auto& edge : es.interior) {
            // The edge is a full face of its finer adjacent cell.
            const auto& fine = edge.cells[0].level >= edge.cells[1].level ? edge.cells[0] : edge.cells[1];
            CHECK(fine.level == edge.level);
        }
    }
}

TEST_CASE("overlay") {
    const auto p0 = initial_partition(4, 2);
    const auto a = recursive_refine(p0, {0, 0, 0});
    const auto b = recursive_refine(p0, {0, 3, 3});
    CHECK(overlay(a, a).mesh == a);
    CHECK(overlay(p0, a).mesh == a);
    const auto ab = overlay(a, b);
    CHECK(ab.closure_splits == 0);
    CHECK(ab.mesh.size() == a.size() + b.size() - p0.size());
    CHECK(is_admissible(ab.mesh).admissible);

    std::mt19937_64 rng(99);
    for (int run = 0; run < 10; ++run) {
        const auto m1 = thb::testing::random_mesh(rng, 2, 4, 3, 5, 600);
        const auto m2 = thb::testing::random_mesh(rng, 2, 4, 3, 5, 600);
        const auto o = overlay(m1, m2);
        CHECK(is_admissible(o.mesh).admissible);
        for (const auto& c : m1.cells()) CHECK(o.mesh.in_subdomain(c));
        for (const auto& c : m2.cells()) CHECK(o.mesh.in_subdomain(c));
        if (o.closure_splits == 0) CHECK(o.mesh.size() <= m1.size() + m2.size() - p0.size());
    }
    CHECK_THROWS_AS(overlay(p0, initial_partition(4, 3)), std::invalid_argument);
}

TEST_CASE("mesh JSON round trip and validation") {
    std::mt19937_64 rng(5);
    const auto mesh = thb::testing::random_mesh(rng, 3, 4, 3, 5, 500);
    const auto doc = mesh_to_json(mesh);
    CHECK(doc["degree"] == 3);
    CHECK(doc["base_cells"] == 4);
    const auto back = mesh_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back == mesh);
    CHECK(mesh_to_json(back).dump() == doc.dump());

    auto overlap = doc;
    overlap["cells"].push_back({0, 0, 0});
    if (mesh.is_active({0, 0, 0})) overlap["cells"].push_back({1, 0, 0});
    CHECK_THROWS_AS(mesh_from_json(overlap), std::invalid_argument);
    auto gap = doc;
    gap["cells"].erase(gap["cells"].begin());
    CHECK_THROWS_AS(mesh_from_json(gap), std::invalid_argument);
    CHECK_THROWS_AS(mesh_from_json(nlohmann::json{{"degree", 3}}), std::invalid_argument);
}
