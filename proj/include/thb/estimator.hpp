#pragma once

// Residual a posteriori indicators for the clamped plate:
//   eta^2(V, tau) = h^4 ||f - d^2 V||^2_tau
//                 + sum over interior edges s of tau of
//                   h_s^3 ||[d(dV)/dn]||^2_s + h_s ||[dV]||^2_s
// where d is the Laplacian. Every edge term counts for both adjacent cells.

#include <iosfwd>
#include <span>
#include <vector>

#include "thb/hier_mesh.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

struct CellIndicator {
    LevelCell cell;
    double interior = 0.0;
    double j1 = 0.0;
    double j2 = 0.0;
    double osc2 = 0.0;

    [[nodiscard]] double eta2() const noexcept { return interior + j1 + j2; }
};

struct IndicatorMap {
    /// Indexed like ThbBasis::cells().
    std::vector<CellIndicator> cells;
    double eta2_total = 0.0;
    double osc2_total = 0.0;

    [[nodiscard]] std::vector<double> eta2() const;
    /// Sum of eta^2 over the given cell indices.
    [[nodiscard]] double eta2_on(std::span<const int> cells) const;
};

/// h^4 ||f - d^2 V||^2 on cell `cell` with r+2 Gauss points per direction.
double interior_residual(const SplineField& v, const ScalarFunction& f, int cell);

struct JumpTerms {
    double j1 = 0.0;
    double j2 = 0.0;
};

/// Squared, scaled jumps of dV and its normal derivative across an interior
/// edge, from the polynomial pieces of the two adjacent cells with r+1 Gauss
/// points. Throws invalid_argument on a boundary edge.
JumpTerms edge_jump_terms(const SplineField& v, const Edge& e);

/// Projection degree of the data for oscillation.
[[nodiscard]] constexpr int oscillation_degree(int r) noexcept { return r > 4 ? r - 4 : 0; }

/// osc^2(tau) = h^4 ||f - P f||^2 with P the L2(tau) projection onto
/// polynomials of total degree oscillation_degree(r).
double oscillation(const ScalarFunction& f, const ThbBasis& basis, int cell);

/// All indicators of V for data f.
IndicatorMap estimate(const SplineField& v, const ScalarFunction& f);

/// osc^2 summed over all cells.
double oscillation_total(const ScalarFunction& f, const ThbBasis& basis);

/// sqrt(|||u - U|||^2 + osc^2(f, Omega)).
double total_error(const SplineField& u, const ScalarFunction& laplacian_exact,
                   const ScalarFunction& f);

/// |V|_{H^2} over the given cells (sum of squared second derivatives, the
/// mixed one counted twice).
double h2_seminorm(const SplineField& v, std::span<const int> cells);

/// CSV with header level,i,j,eta2_interior,eta2_j1,eta2_j2,osc2.
void write_indicator_csv(std::ostream& out, const IndicatorMap& map);

}  // namespace thb
