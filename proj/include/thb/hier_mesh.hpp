#pragma once

// Hierarchical dyadic partitions of the unit square. Cells are integer
// triples (level, i, j); all mesh logic is exact integer arithmetic.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "thb/cardinal_splines.hpp"

namespace thb {

inline constexpr int kDefaultMaxLevels = 12;

struct LevelCell {
    int level = 0;
    int i = 0;
    int j = 0;

    [[nodiscard]] LevelCell parent() const noexcept { return {level - 1, i >> 1, j >> 1}; }
    /// Ancestor (or self) on a coarser level k <= level.
    [[nodiscard]] LevelCell ancestor(int k) const noexcept {
        return {k, i >> (level - k), j >> (level - k)};
    }
    [[nodiscard]] std::array<LevelCell, 4> children() const noexcept {
        const int l = level + 1;
        return {LevelCell{l, 2 * i, 2 * j}, LevelCell{l, 2 * i + 1, 2 * j},
                LevelCell{l, 2 * i, 2 * j + 1}, LevelCell{l, 2 * i + 1, 2 * j + 1}};
    }
    /// True if `other` lies inside this cell (or is this cell).
    [[nodiscard]] bool contains(const LevelCell& other) const noexcept {
        return other.level >= level && other.ancestor(level) == *this;
    }

    friend auto operator<=>(const LevelCell&, const LevelCell&) = default;
};

std::string to_string(const LevelCell& c);

/// Key usable in hash maps across levels.
[[nodiscard]] inline std::uint64_t cell_key(const LevelCell& c) noexcept {
    return (static_cast<std::uint64_t>(c.level) << 56) | (static_cast<std::uint64_t>(c.i) << 28) |
           static_cast<std::uint64_t>(c.j);
}

/// Axis-aligned box [x0,x1] x [y0,y1].
struct Box {
    double x0, x1, y0, y1;
};

class HierPartition {
public:
    /// Uniform level-0 partition without configuration checks; see
    /// initial_partition() for the validated entry point.
    HierPartition(int degree, int base_cells, int max_levels = kDefaultMaxLevels);

    /// Builds a partition from an explicit active-cell list. Throws
    /// std::invalid_argument listing the structural problems if the cells are
    /// out of range, overlap, or fail to cover the square.
    static HierPartition from_cells(int degree, int base_cells, const std::vector<LevelCell>& cells,
                                    int max_levels = kDefaultMaxLevels);

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] int base_cells() const noexcept { return base_cells_; }
    [[nodiscard]] int max_levels() const noexcept { return max_levels_; }
    /// Number of levels in use: deepest active level + 1.
    [[nodiscard]] int num_levels() const noexcept;
    [[nodiscard]] int cells_per_side(int level) const noexcept { return base_cells_ << level; }
    [[nodiscard]] std::size_t size() const noexcept { return count_; }

    [[nodiscard]] double cell_width(int level) const noexcept {
        return 1.0 / cells_per_side(level);
    }
    /// h_tau: diameter of a square cell.
    [[nodiscard]] double diameter(const LevelCell& c) const noexcept;
    [[nodiscard]] Box box(const LevelCell& c) const noexcept;
    [[nodiscard]] bool in_range(const LevelCell& c) const noexcept;

    [[nodiscard]] bool is_active(const LevelCell& c) const noexcept;
    /// True if the level-k cell lies in the closed subdomain of level k, i.e.
    /// it is active or covered by finer active cells.
    [[nodiscard]] bool in_subdomain(const LevelCell& c) const noexcept;
    /// The active cell containing c (c itself or an ancestor), if any.
    [[nodiscard]] std::optional<LevelCell> active_ancestor(const LevelCell& c) const noexcept;
    /// Active cell containing p; points on cell boundaries go to the cell on
    /// the right/top, the square's right/top edges to the last cell.
    [[nodiscard]] LevelCell locate(Point p) const;

    /// Active cells sorted lexicographically by (level, i, j).
    [[nodiscard]] std::vector<LevelCell> cells() const;
    [[nodiscard]] std::vector<LevelCell> cells_at(int level) const;

    /// Replaces an active cell by its four children without any closure.
    /// Throws ResourceError beyond the level cap, std::invalid_argument if c
    /// is not active.
    void split(const LevelCell& c);

    friend bool operator==(const HierPartition& a, const HierPartition& b);

private:
    static std::uint64_t key(int i, int j) noexcept {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
               static_cast<std::uint32_t>(j);
    }
    void ensure_level(int level);

    int degree_;
    int base_cells_;
    int max_levels_;
    std::size_t count_ = 0;
    std::vector<std::unordered_set<std::uint64_t>> active_;
    std::vector<std::unordered_set<std::uint64_t>> refined_;
};

/// Structural problems of an explicit cell list (empty when valid).
std::vector<std::string> structural_violations(int degree, int base_cells,
                                               const std::vector<LevelCell>& cells,
                                               int max_levels = kDefaultMaxLevels);

/// Validated uniform level-0 mesh. Requires 2 <= degree <= 5,
/// base_cells >= max(2, degree) and at least one interior basis function
/// after clamping (base_cells + degree >= 5); throws ConfigError otherwise.
HierPartition initial_partition(int base_cells, int degree, int max_levels = kDefaultMaxLevels);

/// S(tau, k): level-k cells touched by a level-k B-spline that is nonzero on
/// tau; a (2r+1)^2 block around the level-k ancestor clipped to the square.
std::vector<LevelCell> support_extension(const HierPartition& mesh, const LevelCell& cell, int k);

/// N(P, tau): active cells of level(tau)-1 containing a cell of
/// S(tau, level(tau)). Empty for level-0 cells.
std::vector<LevelCell> cell_neighborhood(const HierPartition& mesh, const LevelCell& cell);

/// Refines the neighbourhood recursively, then tau itself if still active.
HierPartition recursive_refine(const HierPartition& mesh, const LevelCell& cell);

struct RefineStats {
    std::size_t marked = 0;
    /// Cells split, including those forced by the neighbourhood closure.
    std::size_t split = 0;
};

/// Admissible refinement of all marked cells. Throws std::invalid_argument
/// if a marked cell is not active in `mesh`.
HierPartition mesh_refine(const HierPartition& mesh, const std::vector<LevelCell>& marked,
                          RefineStats* stats = nullptr);

/// U^l: level-l cells whose support extension S(tau, l) lies in the level-l
/// subdomain.
std::vector<LevelCell> auxiliary_domain(const HierPartition& mesh, int level);

/// Overlay of two partitions plus the number of cells split by the
/// admissibility closure (zero when the plain union is admissible).
struct OverlayResult {
    HierPartition mesh;
    std::size_t closure_splits = 0;
};

/// Coarsest common refinement, closed under admissibility. Throws
/// std::invalid_argument on mismatched degree/base cells.
OverlayResult overlay(const HierPartition& a, const HierPartition& b);

struct Edge {
    int level = 0;
    /// 0: edge on a line x = const (normal along x); 1: on y = const.
    int axis = 0;
    /// Line coordinate and segment start in units of the level width.
    int line = 0;
    int start = 0;
    /// Adjacent active cells; cells[1] is unused on boundary edges.
    /// For interior edges cells[0] lies on the negative side of the line.
    std::array<LevelCell, 2> cells{};
    int num_cells = 1;
};

struct EdgeSet {
    std::vector<Edge> interior;
    std::vector<Edge> boundary;
};

/// Interior edges split to the finer side at level interfaces, plus boundary
/// edges. Sorted by (level, axis, line, start).
EdgeSet edges(const HierPartition& mesh);

/// h_sigma of an edge.
[[nodiscard]] inline double edge_length(const HierPartition& mesh, const Edge& e) noexcept {
    return mesh.cell_width(e.level);
}

}  // namespace thb
