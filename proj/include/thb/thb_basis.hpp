#pragma once

// Hierarchical B-spline selection, truncation and evaluation of truncated
// hierarchical B-splines (THB-splines) and of discrete fields built on them.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "thb/cardinal_splines.hpp"
#include "thb/hier_mesh.hpp"

namespace thb {

using ScalarFunction = std::function<double(Point)>;

/// Shared per-configuration level hierarchy (cached, thread safe).
std::shared_ptr<const SplineLevels> shared_levels(int degree, int base_cells, int max_levels);

struct Coefficient {
    TensorIndex index;
    double value = 0.0;
};

/// Sparse coefficients of one level.
struct LevelExpansion {
    int level = 0;
    std::vector<Coefficient> entries;  // sorted by index
};

struct ThbFunction {
    int level = 0;
    TensorIndex index;
    /// Kept coefficients per level after each truncation stage, starting with
    /// {index: 1} on the origin level. Entries whose support misses the
    /// subdomain of their level are dropped: they vanish there and never feed
    /// a later stage.
    std::vector<LevelExpansion> kept;
    /// Contributions removed by truncation, per finer level. The function
    /// equals the origin B-spline minus everything listed here.
    std::vector<LevelExpansion> removed;
};

/// HB selection: level-l B-splines with support in the level-l subdomain but
/// not in the level-(l+1) subdomain. Sorted by (level, i, j); untruncated.
std::vector<ThbFunction> hb_select(const HierPartition& mesh, const SplineLevels& levels);

/// Applies trunc^{l+1}, ..., trunc^{L-1} to every function.
std::vector<ThbFunction> truncate_all(std::vector<ThbFunction> basis, const HierPartition& mesh,
                                      const SplineLevels& levels);

/// Point evaluation of a (possibly truncated) function, independent of any
/// cell lookup.
double thb_eval(const ThbFunction& f, const SplineLevels& levels, Point p, int dx = 0, int dy = 0);

/// Values and derivatives 0..nder on cell index `cell` of a clamped level
/// knot vector (span = cell + degree); layout as KnotVector::basis_ders.
void cell_basis_1d(const KnotVector& kv, int cell, double x, int nder, std::span<double> out);

/// The truncated basis of a partition together with, for every active cell,
/// the restriction of each nonzero function to the cell's level tensor basis.
class ThbBasis {
public:
    struct CellTable {
        LevelCell cell;
        std::vector<int> functions;  // ascending
        /// functions.size() x (r+1)^2; slot a*(r+1)+b is the tensor function
        /// (cell.i + a, cell.j + b) of the cell's level.
        std::vector<double> coeffs;
    };

    explicit ThbBasis(HierPartition mesh);

    [[nodiscard]] const HierPartition& mesh() const noexcept { return mesh_; }
    [[nodiscard]] const SplineLevels& levels() const noexcept { return *levels_; }
    [[nodiscard]] int degree() const noexcept { return mesh_.degree(); }
    [[nodiscard]] int local_size() const noexcept { return (degree() + 1) * (degree() + 1); }

    [[nodiscard]] std::span<const ThbFunction> functions() const noexcept { return functions_; }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(functions_.size()); }
    [[nodiscard]] std::vector<int> count_per_level() const;

    [[nodiscard]] const std::vector<LevelCell>& cells() const noexcept { return cells_; }
    [[nodiscard]] int num_cells() const noexcept { return static_cast<int>(cells_.size()); }
    /// Index into cells(), or -1 when the cell is not active.
    [[nodiscard]] int cell_index(const LevelCell& c) const;
    [[nodiscard]] const CellTable& table(int cell) const { return tables_.at(cell); }
    /// Active cells on which function f is nonzero.
    [[nodiscard]] const std::vector<int>& function_cells(int f) const {
        return function_cells_.at(f);
    }
    /// omega_tau: active cells touched by any function nonzero on the cell.
    [[nodiscard]] std::vector<int> patch(int cell) const;

    /// Cell containing p, as an index into cells().
    [[nodiscard]] int locate(Point p) const { return cell_index(mesh_.locate(p)); }

private:
    HierPartition mesh_;
    std::shared_ptr<const SplineLevels> levels_;
    std::vector<ThbFunction> functions_;
    std::vector<LevelCell> cells_;
    std::vector<CellTable> tables_;
    std::vector<std::vector<int>> function_cells_;
    std::unordered_map<std::uint64_t, int> cell_lookup_;
};

/// Tensor derivatives of the (r+1)^2 level functions on one cell at one
/// point, for all orders dx, dy <= nder.
class LocalTensorValues {
public:
    LocalTensorValues(const SplineLevels& levels, const LevelCell& cell, Point p, int nder);

    /// Derivative (dx, dy) of local tensor function a*(r+1)+b.
    [[nodiscard]] double operator()(int slot, int dx, int dy) const noexcept {
        const int a = slot / (r_ + 1);
        const int b = slot % (r_ + 1);
        return x_[dx * (r_ + 1) + a] * y_[dy * (r_ + 1) + b];
    }
    /// Contracts local tensor coefficients with derivative (dx, dy).
    [[nodiscard]] double apply(std::span<const double> local, int dx, int dy) const noexcept;

private:
    int r_;
    std::array<double, (kMaxDegree + 1) * (kMaxDegree + 1)> x_{};
    std::array<double, (kMaxDegree + 1) * (kMaxDegree + 1)> y_{};
};

/// A discrete function: shared basis plus one coefficient per basis function
/// (the full basis; functions outside a constrained space carry 0).
class SplineField {
public:
    SplineField(std::shared_ptr<const ThbBasis> basis, Eigen::VectorXd coefficients);

    [[nodiscard]] const ThbBasis& basis() const noexcept { return *basis_; }
    [[nodiscard]] const std::shared_ptr<const ThbBasis>& basis_ptr() const noexcept {
        return basis_;
    }
    [[nodiscard]] const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }

    /// Local tensor coefficients of the field on an active cell.
    [[nodiscard]] std::vector<double> local_coefficients(int cell) const;

private:
    std::shared_ptr<const ThbBasis> basis_;
    Eigen::VectorXd coefficients_;
};

/// Value or derivative at p, using the polynomial piece of the containing
/// cell. Throws std::invalid_argument for points outside [0,1]^2.
double field_eval(const SplineField& field, Point p, int dx = 0, int dy = 0);

/// Same, but evaluating the polynomial piece of a given active cell (p may
/// lie on or outside its boundary).
double field_eval_on_cell(const SplineField& field, int cell, Point p, int dx = 0, int dy = 0);

/// Sum over all functions of coefficient * thb_eval; the global reference
/// for field_eval.
double field_eval_global(const SplineField& field, Point p, int dx = 0, int dy = 0);

/// Quasi-interpolant sum_F lambda_F(v) F with lambda_F the coefficient of F's
/// origin B-spline in the local L2 projection of v onto the level tensor
/// space of one active cell of the origin level inside supp F (the one
/// farthest from the boundary, ties by lowest (i, j)).
SplineField quasi_interpolate(const ScalarFunction& v, std::shared_ptr<const ThbBasis> basis);

/// Cell used by quasi_interpolate for function f.
LevelCell dual_cell(const ThbBasis& basis, int f);

}  // namespace thb
