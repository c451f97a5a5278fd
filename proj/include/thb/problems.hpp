#pragma once

// Biharmonic model problems: d^2 u = f on the unit square, u = du/dn = 0 on
// the boundary.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thb/thb_basis.hpp"

namespace thb {

struct ProblemSpec {
    std::string name;
    ScalarFunction f;
    /// Manufactured solution and its Laplacian; empty when unknown.
    ScalarFunction exact;
    ScalarFunction exact_laplacian;
    /// Spline whose bilaplacian is f ("discrete" preset only).
    std::optional<SplineField> reference;

    int degree = 3;
    int base_cells = 4;
    double theta = 0.5;
    double tol = 1e-4;
    int max_iter = 30;
    int max_level = 10;
    std::uint64_t seed = 0;

    [[nodiscard]] bool manufactured() const noexcept { return static_cast<bool>(exact_laplacian); }
};

/// Names accepted by make_problem.
const std::vector<std::string>& problem_names();

/// "smooth", "peak" or "discrete". Throws ConfigError for an unknown name or
/// invalid discretization parameters.
ProblemSpec make_problem(const std::string& name, int degree, int base_cells,
                         std::uint64_t seed = 0);

/// Bilaplacian of a field, evaluated on the cell that owns the point.
double field_bilaplacian(const SplineField& v, Point p);

/// Random field on the clamped level-0 space with coefficients in [-1, 1].
SplineField random_coarse_field(int degree, int base_cells, std::uint64_t seed);

/// Largest |u| and |grad u . n| over `samples` points per side.
double boundary_defect(const ScalarFunction& u, const ScalarFunction& ux,
                       const ScalarFunction& uy, int samples = 200);

}  // namespace thb
