#include "thb/estimator.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "thb/galerkin_solver.hpp"
#include "thb/quadrature.hpp"

namespace thb {

namespace {

double pow4(double h) { return h * h * h * h; }

double bilaplacian(const LocalTensorValues& vals, std::span<const double> local) {
    return vals.apply(local, 4, 0) + 2 * vals.apply(local, 2, 2) + vals.apply(local, 0, 4);
}

// Orthonormal Legendre polynomials on [0,1], degrees 0..q.
void legendre01(double s, int q, double* out) {
    const double t = 2 * s - 1;
    double p0 = 1.0, p1 = t;
    for (int k = 0; k <= q; ++k) {
        double pk;
        if (k == 0) {
            pk = p0;
        } else if (k == 1) {
            pk = p1;
        } else {
            pk = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        out[k] = std::sqrt(2.0 * k + 1) * pk;
    }
}

}  // namespace

std::vector<double> IndicatorMap::eta2() const {
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(c.eta2());
    return out;
}

double IndicatorMap::eta2_on(std::span<const int> idx) const {
    double s = 0.0;
    for (int c : idx) s += cells.at(c).eta2();
    return s;
}

double interior_residual(const SplineField& v, const ScalarFunction& f, int cell) {
    const auto& basis = v.basis();
    const LevelCell c = basis.cells()[cell];
    const Box b = basis.mesh().box(c);
    const double w = b.x1 - b.x0;
    const auto& rule = gauss_legendre(basis.degree() + 2);
    const auto local = v.local_coefficients(cell);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i)
        for (std::size_t j = 0; j < rule.points.size(); ++j) {
            const Point p{b.x0 + w * rule.points[i], b.y0 + w * rule.points[j]};
            const LocalTensorValues vals(basis.levels(), c, p, 4);
            const double res = f(p) - bilaplacian(vals, local);
            sum += rule.weights[i] * rule.weights[j] * res * res;
        }
    return pow4(basis.mesh().diameter(c)) * sum * w * w;
}

JumpTerms edge_jump_terms(const SplineField& v, const Edge& e) {
    if (e.num_cells != 2) throw std::invalid_argument("edge_jump_terms: boundary edge");
    const auto& basis = v.basis();
    const double h = edge_length(basis.mesh(), e);
    const double line = e.line * h;
    const double start = e.start * h;
    int idx[2];
    std::vector<double> local[2];
    for (int s = 0; s < 2; ++s) {
        idx[s] = basis.cell_index(e.cells[s]);
        if (idx[s] < 0) throw std::invalid_argument("edge_jump_terms: edge cell is not active");
        local[s] = v.local_coefficients(idx[s]);
    }
    const auto& rule = gauss_legendre(basis.degree() + 1);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double t = start + h * rule.points[q];
        const Point p = e.axis == 0 ? Point{line, t} : Point{t, line};
        double lap[2], dlap[2];
        for (int s = 0; s < 2; ++s) {
            const LocalTensorValues vals(basis.levels(), e.cells[s], p, 3);
            lap[s] = vals.apply(local[s], 2, 0) + vals.apply(local[s], 0, 2);
            dlap[s] = e.axis == 0 ? vals.apply(local[s], 3, 0) + vals.apply(local[s], 1, 2)
                                  : vals.apply(local[s], 2, 1) + vals.apply(local[s], 0, 3);
        }
        const double jl = lap[1] - lap[0];
        const double jd = dlap[1] - dlap[0];
        s1 += rule.weights[q] * jd * jd;
        s2 += rule.weights[q] * jl * jl;
    }
    return {h * h * h * s1 * h, h * s2 * h};
}

double oscillation(const ScalarFunction& f, const ThbBasis& basis, int cell) {
    const LevelCell c = basis.cells()[cell];
    const Box b = basis.mesh().box(c);
    const double w = b.x1 - b.x0;
    const int q = oscillation_degree(basis.degree());
    const auto& rule = gauss_legendre(basis.degree() + 2);
    const int n = static_cast<int>(rule.points.size());

    std::vector<double> fv(n * n), px(n * (q + 1)), py(n * (q + 1));
    for (int i = 0; i < n; ++i) {
        legendre01(rule.points[i], q, &px[i * (q + 1)]);
        legendre01(rule.points[i], q, &py[i * (q + 1)]);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            fv[i * n + j] = f({b.x0 + w * rule.points[i], b.y0 + w * rule.points[j]});

    // Moments against the orthonormal total-degree basis on the reference cell.
    std::vector<double> moments;
    for (int a = 0; a <= q; ++a)
        for (int bb = 0; a + bb <= q; ++bb) {
            double m = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    m += rule.weights[i] * rule.weights[j] * fv[i * n + j] * px[i * (q + 1) + a] *
                         py[j * (q + 1) + bb];
            moments.push_back(m);
        }
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double proj = 0.0;
            int k = 0;
            for (int a = 0; a <= q; ++a)
                for (int bb = 0; a + bb <= q; ++bb)
                    proj += moments[k++] * px[i * (q + 1) + a] * py[j * (q + 1) + bb];
            const double d = fv[i * n + j] - proj;
            sum += rule.weights[i] * rule.weights[j] * d * d;
        }
    return pow4(basis.mesh().diameter(c)) * sum * w * w;
}

IndicatorMap estimate(const SplineField& v, const ScalarFunction& f) {
    const auto& basis = v.basis();
    IndicatorMap map;
    map.cells.resize(basis.num_cells());
    for (int c = 0; c < basis.num_cells(); ++c) {
        auto& ci = map.cells[c];
        ci.cell = basis.cells()[c];
        ci.interior = interior_residual(v, f, c);
        ci.osc2 = oscillation(f, basis, c);
    }
    for (const Edge& e : edges(basis.mesh()).interior) {
        const JumpTerms t = edge_jump_terms(v, e);
        for (int s = 0; s < 2; ++s) {
            auto& ci = map.cells[basis.cell_index(e.cells[s])];
            ci.j1 += t.j1;
            ci.j2 += t.j2;
        }
    }
    for (const auto& ci : map.cells) {
        map.eta2_total += ci.eta2();
        map.osc2_total += ci.osc2;
    }
    return map;
}

double oscillation_total(const ScalarFunction& f, const ThbBasis& basis) {
    double s = 0.0;
    for (int c = 0; c < basis.num_cells(); ++c) s += oscillation(f, basis, c);
    return s;
}

double total_error(const SplineField& u, const ScalarFunction& laplacian_exact,
                   const ScalarFunction& f) {
    const double e = energy_norm_error(u, laplacian_exact);
    return std::sqrt(e * e + oscillation_total(f, u.basis()));
}

double h2_seminorm(const SplineField& v, std::span<const int> cells) {
    const auto& basis = v.basis();
    const auto& rule = gauss_legendre(basis.degree() + 1);
    double sum = 0.0;
    for (int cell : cells) {
        const LevelCell c = basis.cells()[cell];
        const Box b = basis.mesh().box(c);
        const double w = b.x1 - b.x0;
        const auto local = v.local_coefficients(cell);
        for (std::size_t i = 0; i < rule.points.size(); ++i)
            for (std::size_t j = 0; j < rule.points.size(); ++j) {
                const LocalTensorValues vals(basis.levels(), c,
                                             {b.x0 + w * rule.points[i], b.y0 + w * rule.points[j]}, 2);
                const double xx = vals.apply(local, 2, 0);
                const double xy = vals.apply(local, 1, 1);
                const double yy = vals.apply(local, 0, 2);
                sum += rule.weights[i] * rule.weights[j] * w * w * (xx * xx + 2 * xy * xy + yy * yy);
            }
    }
    return std::sqrt(sum);
}

void write_indicator_csv(std::ostream& out, const IndicatorMap& map) {
    out << "level,i,j,eta2_interior,eta2_j1,eta2_j2,osc2\n";
    out << std::setprecision(17);
    for (const auto& c : map.cells)
        out << c.cell.level << ',' << c.cell.i << ',' << c.cell.j << ',' << c.interior << ','
            << c.j1 << ',' << c.j2 << ',' << c.osc2 << '\n';
}

}  // namespace thb
