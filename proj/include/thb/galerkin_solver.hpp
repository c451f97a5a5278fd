#pragma once

// Discrete clamped-plate problem: find U in X_P with (dU, dV) = (f, V) for
// all V, where d is the Laplacian and X_P is the H^2_0 subset of the
// truncated hierarchical basis.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <string>
#include <vector>

#include "thb/thb_basis.hpp"

namespace thb {

struct ConstrainedSpace {
    std::shared_ptr<const ThbBasis> basis;
    /// Basis function behind each unknown.
    std::vector<int> dofs;
    /// Unknown of each basis function, -1 for eliminated boundary functions.
    std::vector<int> dof_of;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(dofs.size()); }
};

/// Drops, per origin level and direction, the two clamped functions at each
/// end (nonzero value or normal derivative on the boundary). Throws
/// ConfigError when nothing is left.
ConstrainedSpace constrain_space(std::shared_ptr<const ThbBasis> basis);

struct LinearSystem {
    ConstrainedSpace space;
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd load;
};

/// Cell-by-cell Gauss-Legendre assembly with r+1 points per direction.
LinearSystem assemble(const ConstrainedSpace& space, const ScalarFunction& f);

struct SolveStats {
    int dim = 0;
    long nnz = 0;
    double relative_residual = 0.0;
    double factor_ms = 0.0;
    double condition_estimate = 0.0;
    std::string method;
};

/// Sparse LDL^T with iterative refinement below 50k unknowns, diagonally
/// preconditioned CG above or when the factorization falls short. Accepts a
/// relative residual of 1e-10, or a componentwise backward error of 64 eps
/// on fine meshes where 1e-10 is out of double-precision reach. Throws
/// SolverError on a non-SPD matrix or when CG fails within 50*dim steps.
SplineField solve(const LinearSystem& system, SolveStats* stats = nullptr);

/// Field with the given unknowns (eliminated functions get 0).
SplineField field_from_dofs(const ConstrainedSpace& space, const Eigen::VectorXd& values);
/// Unknowns of a field on the space's basis.
Eigen::VectorXd dofs_of_field(const ConstrainedSpace& space, const SplineField& field);

/// ||d u - d U||_{L2} with r+2 Gauss points per direction on every cell.
double energy_norm_error(const SplineField& U, const ScalarFunction& laplacian_exact);

/// |||fine - coarse||| for a field on a refinement of the coarse field's mesh.
double energy_norm_difference(const SplineField& fine, const SplineField& coarse);

/// a(U, V) for two fields on the same basis.
double energy_inner(const SplineField& u, const SplineField& v);

/// (f, V)_{L2}, with the assembly rule.
double load_functional(const SplineField& v, const ScalarFunction& f);

}  // namespace thb
