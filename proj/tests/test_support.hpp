#pragma once

// Shared generators and brute-force oracles for the test suites.

#include <algorithm>
#include <random>
#include <vector>

#include "thb/estimator.hpp"
#include "thb/galerkin_solver.hpp"
#include "thb/hier_mesh.hpp"

namespace thb::testing {

/// Random admissible mesh: `steps` rounds of mesh_refine on a random subset
/// of active cells below `max_level`, biased towards a random focus point so
/// that several levels appear.
inline HierPartition random_mesh(std::mt19937_64& rng, int degree, int base_cells, int steps,
                                 int max_level, std::size_t max_cells = 5000) {
    HierPartition mesh = initial_partition(base_cells, degree);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Point focus{u(rng), u(rng)};
    for (int s = 0; s < steps; ++s) {
        std::vector<LevelCell> marked;
        for (const auto& c : mesh.cells()) {
            if (c.level + 1 >= max_level) continue;
            const Box b = mesh.box(c);
            const double dx = std::max({b.x0 - focus.x, 0.0, focus.x - b.x1});
            const double dy = std::max({b.y0 - focus.y, 0.0, focus.y - b.y1});
            const double dist = std::hypot(dx, dy);
            const double p = dist == 0.0 ? 0.9 : std::min(0.9, 0.02 / (dist + 0.02) + 0.03);
            if (u(rng) < p) marked.push_back(c);
        }
        if (marked.empty()) continue;
        HierPartition next = mesh_refine(mesh, marked);
        if (next.size() > max_cells) break;
        mesh = std::move(next);
    }
    return mesh;
}

/// Uniform mesh with every cell at `level`.
inline HierPartition uniform_mesh(int base_cells, int degree, int level) {
    HierPartition mesh = initial_partition(base_cells, degree);
    for (int l = 0; l < level; ++l) mesh = mesh_refine(mesh, mesh.cells());
    return mesh;
}

/// Random field on the clamped subspace of `basis`, coefficients in [-1, 1].
inline SplineField random_field(std::mt19937_64& rng, const std::shared_ptr<const ThbBasis>& basis) {
    const auto space = constrain_space(basis);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(space.size());
    for (int k = 0; k < space.size(); ++k) v[k] = u(rng);
    return field_from_dofs(space, v);
}

/// Patches omega_tau of all cells.
inline std::vector<std::vector<int>> all_patches(const ThbBasis& basis) {
    std::vector<std::vector<int>> out;
    for (int c = 0; c < basis.num_cells(); ++c) out.push_back(basis.patch(c));
    return out;
}

/// Measured Lipschitz constant of one random pair (V, W): the largest
/// |eta(V,t) - eta(W,t)| / |V - W|_{H^2(patch of t)} over all cells.
inline double lipschitz_constant(std::mt19937_64& rng, const std::shared_ptr<const ThbBasis>& basis,
                                 const std::vector<std::vector<int>>& patches, const ScalarFunction& f) {
    const auto V = random_field(rng, basis);
    const auto W = random_field(rng, basis);
    const auto ev = estimate(V, f);
    const auto ew = estimate(W, f);
    const SplineField diff(basis, V.coefficients() - W.coefficients());
    std::vector<double> cell_h2(basis->num_cells());
    for (int c = 0; c < basis->num_cells(); ++c) {
        const int one[1] = {c};
        const double s = h2_seminorm(diff, one);
        cell_h2[c] = s * s;
    }
    double worst = 0.0;
    for (int c = 0; c < basis->num_cells(); ++c) {
        double d2 = 0.0;
        for (int q : patches[c]) d2 += cell_h2[q];
        if (d2 < 1e-24) continue;
        worst = std::max(worst, std::abs(std::sqrt(ev.cells[c].eta2()) - std::sqrt(ew.cells[c].eta2())) /
                                    std::sqrt(d2));
    }
    return worst;
}

/// Deepest active level + 1 capped meshes can still exceed max_level through
/// the closure only if a marked cell is below the cap; the closure only adds
/// coarser splits, so levels stay below max_level.
inline int deepest_level(const HierPartition& mesh) { return mesh.num_levels() - 1; }

/// Open-interval overlap of integer cell ranges [a0,a1) and [b0,b1) given
/// in a common unit.
inline bool overlaps(long a0, long a1, long b0, long b1) { return a0 < b1 && b0 < a1; }

}  // namespace thb::testing
