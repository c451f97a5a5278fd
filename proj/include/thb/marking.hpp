#pragma once

// Doerfler marking: the smallest set of cells carrying a theta-fraction of
// the total squared indicator.

#include <span>
#include <vector>

#include "thb/hier_mesh.hpp"

namespace thb {

struct MarkingResult {
    /// Indices into the indicator list, in decreasing indicator order.
    std::vector<int> marked;
    double theta = 0.0;
    /// sum over marked / total; 0 when the total vanishes.
    double fraction = 0.0;
    /// All indicators are zero: nothing to mark.
    bool converged = false;
};

/// Sorts by eta^2 descending, ties by cell (level, i, j), and takes the
/// shortest prefix reaching theta * total (relative slack 1e-12; theta = 1
/// marks every positive cell). Throws invalid_argument for theta
/// outside (0, 1], sizes that differ, or negative or non-finite indicators.
MarkingResult dorfler_mark(std::span<const double> eta2, std::span<const LevelCell> cells,
                           double theta);

}  // namespace thb
