#pragma once

#include <vector>

#include "thb/hier_mesh.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// A cell touched by truncated functions of non-successive levels.
struct AdmissibilityViolation {
    LevelCell cell;
    int min_level = 0;
    int max_level = 0;
};

struct AdmissibilityReport {
    bool admissible = true;
    std::vector<AdmissibilityViolation> violations;
};

/// Definition-level check: on every active cell the truncated basis
/// functions that do not vanish there come from at most two successive
/// levels.
AdmissibilityReport is_admissible(const HierPartition& mesh);
AdmissibilityReport is_admissible(const ThbBasis& basis);

/// Shape-regularity measurements over all active cells.
struct ShapeRegularity {
    /// max #omega_tau
    std::size_t max_patch_cells = 0;
    /// max diam(omega_tau) / h_tau
    double max_patch_ratio = 0.0;
};

ShapeRegularity shape_regularity(const ThbBasis& basis);

}  // namespace thb
