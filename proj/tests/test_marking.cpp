#include <doctest.h>

#include <algorithm>
#include <random>

#include "thb/marking.hpp"

using namespace thb;

namespace {

std::vector<LevelCell> row_cells(std::size_t n) {
    std::vector<LevelCell> cells;
    for (std::size_t k = 0; k < n; ++k) cells.push_back({0, static_cast<int>(k), 0});
    return cells;
}

// Smallest subset size whose sum reaches theta * total, by enumeration.
int brute_force_minimum(const std::vector<double>& eta2, double theta) {
    const int n = static_cast<int>(eta2.size());
    double total = 0.0;
    for (double e : eta2) total += e;
    int best = n + 1;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        const int size = __builtin_popcount(mask);
        if (size >= best) continue;
        double s = 0.0;
        for (int k = 0; k < n; ++k)
            if (mask & (1u << k)) s += eta2[k];
        if (s >= theta * total * (1 - 1e-12)) best = size;
    }
    return best;
}

}  // namespace

TEST_CASE("one dominant cell") {
    const std::vector<double> eta2{4, 1, 1, 1, 1};
    const auto cells = row_cells(5);
    const auto m = dorfler_mark(eta2, cells, 0.5);
    REQUIRE(m.marked.size() == 1);
    CHECK(m.marked[0] == 0);
    CHECK(m.fraction == doctest::Approx(0.5));
    CHECK(brute_force_minimum(eta2, 0.5) == 1);
}

TEST_CASE("theta one marks every positive cell") {
    const std::vector<double> eta2{0.3, 0.0, 2.0, 1e-30, 0.0};
    const auto m = dorfler_mark(eta2, row_cells(5), 1.0);
    std::vector<int> got = m.marked;
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<int>{0, 2, 3});
    CHECK(m.fraction == doctest::Approx(1.0));
}

TEST_CASE("equal indicators") {
    const std::vector<double> eta2(10, 0.7);
    const auto m = dorfler_mark(eta2, row_cells(10), 0.3);
    CHECK(m.marked.size() == 3);
    CHECK(brute_force_minimum(eta2, 0.3) == 3);
    // Ties go to the lexicographically smallest cells.
    CHECK(m.marked == std::vector<int>{0, 1, 2});
}

TEST_CASE("all zero indicators signal convergence") {
    const std::vector<double> eta2(4, 0.0);
    const auto m = dorfler_mark(eta2, row_cells(4), 0.5);
    CHECK(m.converged);
    CHECK(m.marked.empty());
}

TEST_CASE("invalid arguments") {
    const std::vector<double> eta2{1.0, 2.0};
    CHECK_THROWS_AS(dorfler_mark(eta2, row_cells(2), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dorfler_mark(eta2, row_cells(2), 1.5), std::invalid_argument);
    CHECK_THROWS_AS(dorfler_mark(eta2, row_cells(3), 0.5), std::invalid_argument);
    const std::vector<double> bad{1.0, -1.0};
    CHECK_THROWS_AS(dorfler_mark(bad, row_cells(2), 0.5), std::invalid_argument);
}

TEST_CASE("Doerfler property, minimality and determinism on random instances") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> size(1, 15);
    std::uniform_real_distribution<double> theta_d(0.05, 1.0);
    std::exponential_distribution<double> value(1.0);
    std::bernoulli_distribution duplicate(0.2);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        std::vector<double> eta2;
        for (int k = 0; k < n; ++k)
            eta2.push_back(k > 0 && duplicate(rng) ? eta2.back() : value(rng));
        const double theta = theta_d(rng);
        std::vector<LevelCell> cells = row_cells(n);
        std::shuffle(cells.begin(), cells.end(), rng);
        const auto m = dorfler_mark(eta2, cells, theta);
        double total = 0.0, sum = 0.0;
        for (double e : eta2) total += e;
        for (int k : m.marked) sum += eta2[k];
        CHECK(sum >= theta * total * (1 - 1e-12));
        CHECK(static_cast<int>(m.marked.size()) == brute_force_minimum(eta2, theta));
        CHECK(dorfler_mark(eta2, cells, theta).marked == m.marked);
    }
}
