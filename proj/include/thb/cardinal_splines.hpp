#pragma once

// Univariate B-splines on open knot vectors, their tensor products, and the
// two-scale (knot insertion) relation between consecutive dyadic levels.

#include <span>
#include <vector>

namespace thb {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Tensor index (i, j) into a level basis.
struct TensorIndex {
    int i = 0;
    int j = 0;
    friend auto operator<=>(const TensorIndex&, const TensorIndex&) = default;
};

inline constexpr int kMaxDegree = 5;

class KnotVector {
public:
    /// General nondecreasing knot vector. Throws std::invalid_argument on
    /// unsorted knots, degree outside [0, kMaxDegree] or too few knots.
    KnotVector(int degree, std::vector<double> knots, int level = 0);

    /// Open (clamped) uniform knots on [0,1] with base_cells * 2^level
    /// interior cells; end knots repeated degree+1 times.
    static KnotVector clamped_uniform(int level, int degree, int base_cells);

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] int level() const noexcept { return level_; }
    [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }
    /// Number of basis functions: #knots - degree - 1.
    [[nodiscard]] int size() const noexcept {
        return static_cast<int>(knots_.size()) - degree_ - 1;
    }

    /// Knot vector with the midpoint of every nonempty interval inserted.
    [[nodiscard]] KnotVector dyadic_refinement() const;

    /// Span s with t_s <= x < t_{s+1} restricted to the valid range
    /// [degree, size()-1]; x at the right end maps to the last span.
    [[nodiscard]] int find_span(double x) const;

    /// Values and derivatives 0..nder of the degree+1 functions that are
    /// nonzero on `span`, evaluated with that span's polynomial pieces (x may
    /// lie outside the span, the pieces are extended). Layout:
    /// out[d * (degree+1) + k] is derivative d of function span-degree+k.
    void basis_ders(int span, double x, int nder, std::span<double> out) const;

private:
    int degree_;
    int level_;
    std::vector<double> knots_;
};

/// d-th derivative of basis function i at x (Cox-de Boor recursion, right
/// continuous; the final knot closes the last nonempty interval). Returns 0
/// outside the support and for d > degree. Throws std::out_of_range on a bad
/// index.
double bspline_eval(const KnotVector& kv, int i, double x, int d = 0);

/// Coarse basis function expressed in the dyadically refined basis.
struct TwoScaleRow {
    int coarse = 0;
    std::vector<int> fine;
    std::vector<double> coeffs;
};

/// Two-scale row of basis function i by knot insertion (Boehm) of all
/// midpoints into the local knot vector of the function.
TwoScaleRow two_scale(const KnotVector& coarse, int i);

/// Product of univariate derivatives, zero outside the tensor support box.
double tensor_eval(const KnotVector& kvx, const KnotVector& kvy, TensorIndex ij, Point p,
                   int dx = 0, int dy = 0);

/// Clamped knot vectors for levels 0..max_levels-1 on [0,1] with cached
/// two-scale rows between consecutive levels. Immutable after construction.
class SplineLevels {
public:
    SplineLevels(int degree, int base_cells, int max_levels);

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] int base_cells() const noexcept { return base_cells_; }
    [[nodiscard]] int max_levels() const noexcept { return static_cast<int>(knots_.size()); }
    [[nodiscard]] int cells(int level) const noexcept { return base_cells_ << level; }
    [[nodiscard]] int dim(int level) const noexcept { return cells(level) + degree_; }
    [[nodiscard]] const KnotVector& knots(int level) const { return knots_.at(level); }
    /// Row of function i of `level` in terms of level+1.
    [[nodiscard]] const TwoScaleRow& refine_row(int level, int i) const {
        return rows_.at(level).at(i);
    }

    /// First and last cell index (inclusive) of the support of function i.
    [[nodiscard]] std::pair<int, int> support_cells(int level, int i) const noexcept;

private:
    int degree_;
    int base_cells_;
    std::vector<KnotVector> knots_;
    std::vector<std::vector<TwoScaleRow>> rows_;
};

}  // namespace thb
