#include "thb/problems.hpp"

#include <cmath>
#include <random>

#include "thb/errors.hpp"
#include "thb/galerkin_solver.hpp"

namespace thb {

namespace {

// x^2 (1-x)^2 and its derivatives.
double bump(double x) { return x * x * (1 - x) * (1 - x); }
double bump_d2(double x) { return 2 - 12 * x + 12 * x * x; }
double bump_d4(double) { return 24.0; }

ProblemSpec smooth_problem() {
    ProblemSpec s;
    s.name = "smooth";
    s.exact = [](Point p) { return bump(p.x) * bump(p.y); };
    s.exact_laplacian = [](Point p) {
        return bump_d2(p.x) * bump(p.y) + bump(p.x) * bump_d2(p.y);
    };
    s.f = [](Point p) {
        return bump_d4(p.x) * bump(p.y) + 2 * bump_d2(p.x) * bump_d2(p.y) +
               bump(p.x) * bump_d4(p.y);
    };
    return s;
}

ProblemSpec peak_problem() {
    ProblemSpec s;
    s.name = "peak";
    s.f = [](Point p) {
        constexpr double cx = 0.3, cy = 0.65, w = 0.03;
        const double d2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
        return 1e3 * std::exp(-d2 / (2 * w * w));
    };
    return s;
}

}  // namespace

const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names{"smooth", "peak", "discrete"};
    return names;
}

double field_bilaplacian(const SplineField& v, Point p) {
    const int c = v.basis().locate(p);
    return field_eval_on_cell(v, c, p, 4, 0) + 2 * field_eval_on_cell(v, c, p, 2, 2) +
           field_eval_on_cell(v, c, p, 0, 4);
}

SplineField random_coarse_field(int degree, int base_cells, std::uint64_t seed) {
    auto basis = std::make_shared<const ThbBasis>(initial_partition(base_cells, degree));
    const ConstrainedSpace space = constrain_space(basis);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd values(space.size());
    for (int k = 0; k < space.size(); ++k) values[k] = u(rng);
    return field_from_dofs(space, values);
}

ProblemSpec make_problem(const std::string& name, int degree, int base_cells, std::uint64_t seed) {
    // Validates degree and base cells.
    (void)initial_partition(base_cells, degree);
    ProblemSpec s;
    if (name == "smooth") {
        s = smooth_problem();
    } else if (name == "peak") {
        s = peak_problem();
    } else if (name == "discrete") {
        const SplineField v = random_coarse_field(degree, base_cells, seed);
        s.name = "discrete";
        s.reference = v;
        s.f = [v](Point p) { return field_bilaplacian(v, p); };
        s.exact = [v](Point p) { return field_eval(v, p); };
        s.exact_laplacian = [v](Point p) {
            const int c = v.basis().locate(p);
            return field_eval_on_cell(v, c, p, 2, 0) + field_eval_on_cell(v, c, p, 0, 2);
        };
    } else {
        throw ConfigError("unknown problem '" + name + "'");
    }
    s.degree = degree;
    s.base_cells = base_cells;
    s.seed = seed;
    return s;
}

double boundary_defect(const ScalarFunction& u, const ScalarFunction& ux, const ScalarFunction& uy,
                       int samples) {
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = (k + 0.5) / samples;
        const Point pts[4] = {{t, 0.0}, {t, 1.0}, {0.0, t}, {1.0, t}};
        for (int side = 0; side < 4; ++side) {
            const Point p = pts[side];
            const double normal = side < 2 ? uy(p) : ux(p);
            worst = std::max({worst, std::abs(u(p)), std::abs(normal)});
        }
    }
    return worst;
}

}  // namespace thb
