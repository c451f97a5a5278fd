#include "thb/galerkin_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <limits>

#include "thb/errors.hpp"
#include "thb/quadrature.hpp"

namespace thb {

namespace {

constexpr int kDirectLimit = 50000;
constexpr double kRefineTarget = 1e-13;

// Visits every Gauss point of every active cell: (cell index, point, weight).
template <typename Visitor>
void for_each_quadrature_point(const ThbBasis& basis, int points, Visitor&& visit) {
    const auto& rule = gauss_legendre(points);
    for (int c = 0; c < basis.num_cells(); ++c) {
        const Box b = basis.mesh().box(basis.cells()[c]);
        const double w = b.x1 - b.x0;
        for (std::size_t i = 0; i < rule.points.size(); ++i)
            for (std::size_t j = 0; j < rule.points.size(); ++j)
                visit(c, Point{b.x0 + w * rule.points[i], b.y0 + w * rule.points[j]},
                      rule.weights[i] * rule.weights[j] * w * w);
    }
}

double laplacian(const LocalTensorValues& vals, std::span<const double> local) {
    return vals.apply(local, 2, 0) + vals.apply(local, 0, 2);
}

// Relative residual 1e-10, or a componentwise backward error of 64 eps when
// that is below double-precision reach (||A|| ||x|| / ||b|| grows like h^-4).
bool converged(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x,
               const Eigen::VectorXd& b) {
    const double res = (A * x - b).norm();
    if (res <= 1e-10 * b.norm()) return true;
    const Eigen::VectorXd scale = A.cwiseAbs() * x.cwiseAbs() + b.cwiseAbs();
    return res <= 64 * std::numeric_limits<double>::epsilon() * scale.norm();
}

}  // namespace

ConstrainedSpace constrain_space(std::shared_ptr<const ThbBasis> basis) {
    ConstrainedSpace space;
    space.dof_of.assign(basis->size(), -1);
    const auto& levels = basis->levels();
    for (int f = 0; f < basis->size(); ++f) {
        const auto& fn = basis->functions()[f];
        const int n = levels.dim(fn.level);
        auto interior = [n](int k) { return k >= 2 && k <= n - 3; };
        if (interior(fn.index.i) && interior(fn.index.j)) {
            space.dof_of[f] = static_cast<int>(space.dofs.size());
            space.dofs.push_back(f);
        }
    }
    if (space.dofs.empty())
        throw ConfigError("constrained space is empty: too few base cells for the degree");
    space.basis = std::move(basis);
    return space;
}

LinearSystem assemble(const ConstrainedSpace& space, const ScalarFunction& f) {
    const auto& basis = *space.basis;
    const int r = basis.degree();
    const int ls = basis.local_size();
    const auto& rule = gauss_legendre(r + 1);
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd load = Eigen::VectorXd::Zero(space.size());

    std::vector<double> lap, val;
    for (int c = 0; c < basis.num_cells(); ++c) {
        const auto& table = basis.table(c);
        std::vector<int> local_dofs;
        std::vector<int> rows;
        for (std::size_t k = 0; k < table.functions.size(); ++k) {
            const int d = space.dof_of[table.functions[k]];
            if (d < 0) continue;
            local_dofs.push_back(d);
            rows.push_back(static_cast<int>(k));
        }
        const int m = static_cast<int>(local_dofs.size());
        if (m == 0) continue;
        Eigen::MatrixXd local_matrix = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd local_load = Eigen::VectorXd::Zero(m);
        const LevelCell cell = basis.cells()[c];
        const Box b = basis.mesh().box(cell);
        const double w = b.x1 - b.x0;
        Eigen::VectorXd lap_q(m), val_q(m);
        for (std::size_t i = 0; i < rule.points.size(); ++i)
            for (std::size_t j = 0; j < rule.points.size(); ++j) {
                const Point p{b.x0 + w * rule.points[i], b.y0 + w * rule.points[j]};
                const double wt = rule.weights[i] * rule.weights[j] * w * w;
                const LocalTensorValues vals(basis.levels(), cell, p, 2);
                for (int a = 0; a < m; ++a) {
                    const std::span<const double> coeffs(&table.coeffs[rows[a] * ls], ls);
                    lap_q[a] = laplacian(vals, coeffs);
                    val_q[a] = vals.apply(coeffs, 0, 0);
                }
                local_matrix.noalias() += wt * lap_q * lap_q.transpose();
                local_load += (wt * f(p)) * val_q;
            }
        for (int a = 0; a < m; ++a) {
            load[local_dofs[a]] += local_load[a];
            for (int bb = 0; bb < m; ++bb)
                triplets.emplace_back(local_dofs[a], local_dofs[bb], local_matrix(a, bb));
        }
    }
    LinearSystem system{space, Eigen::SparseMatrix<double>(space.size(), space.size()), load};
    system.matrix.setFromTriplets(triplets.begin(), triplets.end());
    system.matrix.makeCompressed();
    return system;
}

SplineField field_from_dofs(const ConstrainedSpace& space, const Eigen::VectorXd& values) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(space.basis->size());
    for (int d = 0; d < space.size(); ++d) full[space.dofs[d]] = values[d];
    return SplineField(space.basis, std::move(full));
}

Eigen::VectorXd dofs_of_field(const ConstrainedSpace& space, const SplineField& field) {
    Eigen::VectorXd out(space.size());
    for (int d = 0; d < space.size(); ++d) out[d] = field.coefficients()[space.dofs[d]];
    return out;
}

SplineField solve(const LinearSystem& system, SolveStats* stats) {
    using Clock = std::chrono::steady_clock;
    const auto& A = system.matrix;
    const auto& b = system.load;
    const int n = static_cast<int>(A.rows());
    SolveStats local;
    local.dim = n;
    local.nnz = static_cast<long>(A.nonZeros());
    const double bnorm = b.norm();
    const auto start = Clock::now();

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    bool solved = false;
    if (bnorm == 0.0) {
        solved = true;
        local.method = "trivial";
    } else if (n <= kDirectLimit) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() == Eigen::Success) {
            const Eigen::VectorXd d = ldlt.vectorD();
            local.condition_estimate = d.maxCoeff() / std::max(d.minCoeff(), 1e-300);
            if (d.minCoeff() <= 0.0)
                throw SolverError("matrix is not positive definite (nonpositive pivot)",
                                  local.condition_estimate);
            x = ldlt.solve(b);
            local.method = "ldlt";
            // Iterative refinement: rounding in the factor grows with h^-4.
            for (int step = 0; step < 3; ++step) {
                const Eigen::VectorXd res = b - A * x;
                if (res.norm() <= kRefineTarget * bnorm) break;
                x += ldlt.solve(res);
            }
            solved = converged(A, x, b);
        }
    }
    if (!solved) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(1e-11);
        cg.setMaxIterations(50 * std::max(n, 1));
        cg.compute(A);
        if (local.method == "ldlt")
            x = cg.solveWithGuess(b, x);
        else
            x = cg.solve(b);
        local.method = local.method.empty() ? "cg" : "ldlt+cg";
        const Eigen::VectorXd diag = A.diagonal();
        if (local.condition_estimate == 0.0)
            local.condition_estimate = diag.maxCoeff() / std::max(diag.minCoeff(), 1e-300);
        if (!converged(A, x, b))
            throw SolverError("conjugate gradient did not converge after " +
                                  std::to_string(cg.iterations()) + " iterations",
                              local.condition_estimate);
    }
    local.factor_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    local.relative_residual = bnorm == 0.0 ? 0.0 : (A * x - b).norm() / bnorm;
    if (stats) *stats = local;
    return field_from_dofs(system.space, x);
}

double energy_norm_error(const SplineField& U, const ScalarFunction& laplacian_exact) {
    const auto& basis = U.basis();
    double sum = 0.0;
    int current = -1;
    std::vector<double> local;
    for_each_quadrature_point(basis, basis.degree() + 2, [&](int c, Point p, double wt) {
        if (c != current) {
            local = U.local_coefficients(c);
            current = c;
        }
        const LocalTensorValues vals(basis.levels(), basis.cells()[c], p, 2);
        const double e = laplacian_exact(p) - laplacian(vals, local);
        sum += wt * e * e;
    });
    return std::sqrt(sum);
}

double energy_norm_difference(const SplineField& fine, const SplineField& coarse) {
    const auto& fb = fine.basis();
    const auto& cb = coarse.basis();
    double sum = 0.0;
    int current = -1;
    std::vector<double> local_fine, local_coarse;
    LevelCell coarse_cell;
    for_each_quadrature_point(fb, fb.degree() + 2, [&](int c, Point p, double wt) {
        if (c != current) {
            current = c;
            local_fine = fine.local_coefficients(c);
            const auto owner = cb.mesh().active_ancestor(fb.cells()[c]);
            if (!owner) throw std::invalid_argument("energy_norm_difference: meshes are not nested");
            coarse_cell = *owner;
            local_coarse = coarse.local_coefficients(cb.cell_index(coarse_cell));
        }
        const LocalTensorValues vf(fb.levels(), fb.cells()[c], p, 2);
        const LocalTensorValues vc(cb.levels(), coarse_cell, p, 2);
        const double e = laplacian(vf, local_fine) - laplacian(vc, local_coarse);
        sum += wt * e * e;
    });
    return std::sqrt(sum);
}

double energy_inner(const SplineField& u, const SplineField& v) {
    if (u.basis_ptr() != v.basis_ptr()) throw std::invalid_argument("energy_inner: different bases");
    const auto& basis = u.basis();
    double sum = 0.0;
    int current = -1;
    std::vector<double> lu, lv;
    for_each_quadrature_point(basis, basis.degree() + 1, [&](int c, Point p, double wt) {
        if (c != current) {
            current = c;
            lu = u.local_coefficients(c);
            lv = v.local_coefficients(c);
        }
        const LocalTensorValues vals(basis.levels(), basis.cells()[c], p, 2);
        sum += wt * laplacian(vals, lu) * laplacian(vals, lv);
    });
    return sum;
}

double load_functional(const SplineField& v, const ScalarFunction& f) {
    const auto& basis = v.basis();
    double sum = 0.0;
    int current = -1;
    std::vector<double> lv;
    for_each_quadrature_point(basis, basis.degree() + 1, [&](int c, Point p, double wt) {
        if (c != current) {
            current = c;
            lv = v.local_coefficients(c);
        }
        const LocalTensorValues vals(basis.levels(), basis.cells()[c], p, 0);
        sum += wt * f(p) * vals.apply(lv, 0, 0);
    });
    return sum;
}

}  // namespace thb
