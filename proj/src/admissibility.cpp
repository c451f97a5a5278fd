#include "thb/admissibility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thb {

AdmissibilityReport is_admissible(const ThbBasis& basis) {
    AdmissibilityReport report;
    for (int c = 0; c < basis.num_cells(); ++c) {
        const auto& t = basis.table(c);
        if (t.functions.empty()) continue;
        int lo = basis.functions()[t.functions.front()].level;
        int hi = lo;
        for (int f : t.functions) {
            lo = std::min(lo, basis.functions()[f].level);
            hi = std::max(hi, basis.functions()[f].level);
        }
        if (hi - lo > 1) report.violations.push_back({t.cell, lo, hi});
    }
    report.admissible = report.violations.empty();
    return report;
}

AdmissibilityReport is_admissible(const HierPartition& mesh) {
    return is_admissible(ThbBasis(mesh));
}

ShapeRegularity shape_regularity(const ThbBasis& basis) {
    ShapeRegularity out;
    const auto& mesh = basis.mesh();
    for (int c = 0; c < basis.num_cells(); ++c) {
        const auto patch = basis.patch(c);
        out.max_patch_cells = std::max(out.max_patch_cells, patch.size());
        Box hull{1.0, 0.0, 1.0, 0.0};
        for (int k : patch) {
            const Box b = mesh.box(basis.cells()[k]);
            hull.x0 = std::min(hull.x0, b.x0);
            hull.x1 = std::max(hull.x1, b.x1);
            hull.y0 = std::min(hull.y0, b.y0);
            hull.y1 = std::max(hull.y1, b.y1);
        }
        const double diam = std::hypot(hull.x1 - hull.x0, hull.y1 - hull.y0);
        out.max_patch_ratio =
            std::max(out.max_patch_ratio, diam / mesh.diameter(basis.cells()[c]));
    }
    return out;
}

namespace {

// Union of the active cell sets: a cell survives unless the other partition
// is finer there.
HierPartition union_mesh(const HierPartition& a, const HierPartition& b) {
    auto finer_at = [](const HierPartition& m, const LevelCell& c) {
        return m.in_subdomain(c) && !m.is_active(c);
    };
    std::vector<LevelCell> cells;
    for (const auto& c : a.cells())
        if (!finer_at(b, c)) cells.push_back(c);
    for (const auto& c : b.cells())
        if (!finer_at(a, c) && !a.is_active(c)) cells.push_back(c);
    return HierPartition::from_cells(a.degree(), a.base_cells(), cells,
                                     std::max(a.max_levels(), b.max_levels()));
}

}  // namespace

OverlayResult overlay(const HierPartition& a, const HierPartition& b) {
    if (a.degree() != b.degree() || a.base_cells() != b.base_cells())
        throw std::invalid_argument("overlay: partitions have different degree or base cells");
    OverlayResult result{union_mesh(a, b), 0};
    for (;;) {
        const ThbBasis basis(result.mesh);
        const auto report = is_admissible(basis);
        if (report.admissible) break;
        // Split the coarse active cells that reach a violating cell through
        // the support extension one level below it.
        std::vector<LevelCell> to_split;
        for (const auto& v : report.violations) {
            for (const auto& s : support_extension(result.mesh, v.cell, v.cell.level - 1)) {
                const auto owner = result.mesh.active_ancestor(s);
                if (owner && owner->level < v.cell.level - 1) to_split.push_back(*owner);
            }
        }
        std::sort(to_split.begin(), to_split.end());
        to_split.erase(std::unique(to_split.begin(), to_split.end()), to_split.end());
        if (to_split.empty()) throw std::logic_error("overlay: admissibility closure stalled");
        for (const auto& c : to_split) result.mesh.split(c);
        result.closure_splits += to_split.size();
    }
    return result;
}

}  // namespace thb
