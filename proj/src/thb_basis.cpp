#include "thb/thb_basis.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "thb/quadrature.hpp"

namespace thb {

std::shared_ptr<const SplineLevels> shared_levels(int degree, int base_cells, int max_levels) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, int>, std::shared_ptr<const SplineLevels>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{degree, base_cells, max_levels}];
    if (!slot) slot = std::make_shared<const SplineLevels>(degree, base_cells, max_levels);
    return slot;
}

namespace {

std::uint64_t index_key(TensorIndex t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.i)) << 32) |
           static_cast<std::uint32_t>(t.j);
}

TensorIndex index_from_key(std::uint64_t k) {
    return {static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)};
}

struct SupportStatus {
    bool all_inside = true;
    bool any_inside = false;
};

SupportStatus support_status(const HierPartition& mesh, const SplineLevels& levels, int level,
                             TensorIndex t) {
    SupportStatus s;
    const auto [x0, x1] = levels.support_cells(level, t.i);
    const auto [y0, y1] = levels.support_cells(level, t.j);
    for (int i = x0; i <= x1; ++i)
        for (int j = y0; j <= y1; ++j) {
            if (mesh.in_subdomain({level, i, j}))
                s.any_inside = true;
            else
                s.all_inside = false;
        }
    return s;
}

std::vector<Coefficient> sorted_entries(const std::unordered_map<std::uint64_t, double>& m) {
    std::vector<Coefficient> out;
    out.reserve(m.size());
    for (const auto& [k, v] : m) out.push_back({index_from_key(k), v});
    std::sort(out.begin(), out.end(),
              [](const Coefficient& a, const Coefficient& b) { return a.index < b.index; });
    return out;
}

}  // namespace

std::vector<ThbFunction> hb_select(const HierPartition& mesh, const SplineLevels& levels) {
    std::vector<ThbFunction> out;
    const int r = mesh.degree();
    for (int l = 0; l < mesh.num_levels(); ++l) {
        std::vector<TensorIndex> candidates;
        for (const auto& c : mesh.cells_at(l))
            for (int a = 0; a <= r; ++a)
                for (int b = 0; b <= r; ++b) candidates.push_back({c.i + a, c.j + b});
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (const auto& t : candidates) {
            if (!support_status(mesh, levels, l, t).all_inside) continue;
            // supp beta lies in the level-(l+1) subdomain iff none of its
            // level-l cells is active.
            bool inside_next = true;
            const auto [x0, x1] = levels.support_cells(l, t.i);
            const auto [y0, y1] = levels.support_cells(l, t.j);
            for (int i = x0; i <= x1 && inside_next; ++i)
                for (int j = y0; j <= y1; ++j)
                    if (mesh.is_active({l, i, j})) {
                        inside_next = false;
                        break;
                    }
            if (inside_next) continue;
            ThbFunction f;
            f.level = l;
            f.index = t;
            f.kept.push_back({l, {{t, 1.0}}});
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<ThbFunction> truncate_all(std::vector<ThbFunction> basis, const HierPartition& mesh,
                                      const SplineLevels& levels) {
    const int depth = mesh.num_levels();
    for (auto& f : basis) {
        f.kept.resize(1);
        f.removed.clear();
        std::vector<Coefficient> current = f.kept.front().entries;
        for (int m = f.level + 1; m < depth; ++m) {
            std::unordered_map<std::uint64_t, double> next;
            for (const auto& [t, c] : current) {
                const auto& rx = levels.refine_row(m - 1, t.i);
                const auto& ry = levels.refine_row(m - 1, t.j);
                for (std::size_t a = 0; a < rx.fine.size(); ++a)
                    for (std::size_t b = 0; b < ry.fine.size(); ++b)
                        next[index_key({rx.fine[a], ry.fine[b]})] += c * rx.coeffs[a] * ry.coeffs[b];
            }
            std::unordered_map<std::uint64_t, double> keep, drop;
            for (const auto& [k, c] : next) {
                const auto status = support_status(mesh, levels, m, index_from_key(k));
                if (status.all_inside)
                    drop.emplace(k, c);
                else if (status.any_inside)
                    keep.emplace(k, c);
            }
            if (!drop.empty()) f.removed.push_back({m, sorted_entries(drop)});
            if (keep.empty()) break;
            current = sorted_entries(keep);
            f.kept.push_back({m, current});
        }
    }
    return basis;
}

double thb_eval(const ThbFunction& f, const SplineLevels& levels, Point p, int dx, int dy) {
    const auto& kv0 = levels.knots(f.level);
    double v = tensor_eval(kv0, kv0, f.index, p, dx, dy);
    for (const auto& stage : f.removed) {
        const auto& kv = levels.knots(stage.level);
        for (const auto& [t, c] : stage.entries) v -= c * tensor_eval(kv, kv, t, p, dx, dy);
    }
    return v;
}

void cell_basis_1d(const KnotVector& kv, int cell, double x, int nder, std::span<double> out) {
    kv.basis_ders(cell + kv.degree(), x, nder, out);
}

ThbBasis::ThbBasis(HierPartition mesh)
    : mesh_(std::move(mesh)),
      levels_(shared_levels(mesh_.degree(), mesh_.base_cells(), mesh_.max_levels())) {
    functions_ = truncate_all(hb_select(mesh_, *levels_), mesh_, *levels_);
    cells_ = mesh_.cells();
    cell_lookup_.reserve(cells_.size());
    for (int k = 0; k < static_cast<int>(cells_.size()); ++k)
        cell_lookup_.emplace(cell_key(cells_[k]), k);

    const int r = degree();
    struct Contribution {
        int cell;
        int function;
        int slot;
        double value;
    };
    std::vector<Contribution> contributions;
    for (int f = 0; f < size(); ++f) {
        for (const auto& stage : functions_[f].kept) {
            for (const auto& [t, c] : stage.entries) {
                const auto [x0, x1] = levels_->support_cells(stage.level, t.i);
                const auto [y0, y1] = levels_->support_cells(stage.level, t.j);
                for (int i = x0; i <= x1; ++i)
                    for (int j = y0; j <= y1; ++j) {
                        const int cell = cell_index({stage.level, i, j});
                        if (cell < 0) continue;
                        contributions.push_back(
                            {cell, f, (t.i - i) * (r + 1) + (t.j - j), c});
                    }
            }
        }
    }
    std::sort(contributions.begin(), contributions.end(), [](const auto& a, const auto& b) {
        return std::tie(a.cell, a.function, a.slot) < std::tie(b.cell, b.function, b.slot);
    });
    tables_.resize(cells_.size());
    function_cells_.assign(functions_.size(), {});
    for (int k = 0; k < num_cells(); ++k) tables_[k].cell = cells_[k];
    for (const auto& c : contributions) {
        auto& t = tables_[c.cell];
        if (t.functions.empty() || t.functions.back() != c.function) {
            t.functions.push_back(c.function);
            t.coeffs.resize(t.coeffs.size() + local_size(), 0.0);
            function_cells_[c.function].push_back(c.cell);
        }
        t.coeffs[(t.functions.size() - 1) * local_size() + c.slot] += c.value;
    }
}

std::vector<int> ThbBasis::count_per_level() const {
    std::vector<int> out(mesh_.num_levels(), 0);
    for (const auto& f : functions_) ++out[f.level];
    return out;
}

int ThbBasis::cell_index(const LevelCell& c) const {
    auto it = cell_lookup_.find(cell_key(c));
    return it == cell_lookup_.end() ? -1 : it->second;
}

std::vector<int> ThbBasis::patch(int cell) const {
    std::vector<int> out;
    for (int f : tables_.at(cell).functions) {
        const auto& cs = function_cells_[f];
        out.insert(out.end(), cs.begin(), cs.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

LocalTensorValues::LocalTensorValues(const SplineLevels& levels, const LevelCell& cell, Point p,
                                     int nder)
    : r_(levels.degree()) {
    const auto& kv = levels.knots(cell.level);
    cell_basis_1d(kv, cell.i, p.x, nder, x_);
    cell_basis_1d(kv, cell.j, p.y, nder, y_);
}

double LocalTensorValues::apply(std::span<const double> local, int dx, int dy) const noexcept {
    double v = 0.0;
    for (int a = 0; a <= r_; ++a) {
        double row = 0.0;
        for (int b = 0; b <= r_; ++b) row += local[a * (r_ + 1) + b] * y_[dy * (r_ + 1) + b];
        v += x_[dx * (r_ + 1) + a] * row;
    }
    return v;
}

SplineField::SplineField(std::shared_ptr<const ThbBasis> basis, Eigen::VectorXd coefficients)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)) {
    if (!basis_) throw std::invalid_argument("SplineField: null basis");
    if (coefficients_.size() != basis_->size())
        throw std::invalid_argument("SplineField: coefficient count does not match the basis");
}

std::vector<double> SplineField::local_coefficients(int cell) const {
    const auto& t = basis_->table(cell);
    const int ls = basis_->local_size();
    std::vector<double> local(ls, 0.0);
    for (std::size_t k = 0; k < t.functions.size(); ++k) {
        const double c = coefficients_[t.functions[k]];
        if (c == 0.0) continue;
        for (int s = 0; s < ls; ++s) local[s] += c * t.coeffs[k * ls + s];
    }
    return local;
}

double field_eval_on_cell(const SplineField& field, int cell, Point p, int dx, int dy) {
    const auto& basis = field.basis();
    const int r = basis.degree();
    if (dx > r || dy > r) return 0.0;
    const auto local = field.local_coefficients(cell);
    const LocalTensorValues values(basis.levels(), basis.cells()[cell], p, std::max(dx, dy));
    return values.apply(local, dx, dy);
}

double field_eval(const SplineField& field, Point p, int dx, int dy) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
        throw std::invalid_argument("field_eval: point outside [0,1]^2");
    return field_eval_on_cell(field, field.basis().locate(p), p, dx, dy);
}

double field_eval_global(const SplineField& field, Point p, int dx, int dy) {
    const auto& basis = field.basis();
    double v = 0.0;
    for (int f = 0; f < basis.size(); ++f) {
        const double c = field.coefficients()[f];
        if (c != 0.0) v += c * thb_eval(basis.functions()[f], basis.levels(), p, dx, dy);
    }
    return v;
}

LevelCell dual_cell(const ThbBasis& basis, int f) {
    const auto& fn = basis.functions()[f];
    const auto& levels = basis.levels();
    const int n = levels.cells(fn.level);
    const auto [x0, x1] = levels.support_cells(fn.level, fn.index.i);
    const auto [y0, y1] = levels.support_cells(fn.level, fn.index.j);
    LevelCell best{-1, 0, 0};
    int best_depth = -1;
    for (int i = x0; i <= x1; ++i)
        for (int j = y0; j <= y1; ++j) {
            const LevelCell c{fn.level, i, j};
            if (!basis.mesh().is_active(c)) continue;
            const int depth = std::min({i, n - 1 - i, j, n - 1 - j});
            if (depth > best_depth) {
                best_depth = depth;
                best = c;
            }
        }
    if (best.level < 0) throw std::logic_error("dual_cell: function has no active origin-level cell");
    return best;
}

SplineField quasi_interpolate(const ScalarFunction& v, std::shared_ptr<const ThbBasis> basis) {
    const int r = basis->degree();
    const int ls = basis->local_size();
    const auto& rule = gauss_legendre(r + 3);
    std::map<std::uint64_t, Eigen::VectorXd> projections;
    Eigen::VectorXd coeffs(basis->size());
    for (int f = 0; f < basis->size(); ++f) {
        const LevelCell cell = dual_cell(*basis, f);
        auto it = projections.find(cell_key(cell));
        if (it == projections.end()) {
            const Box bx = basis->mesh().box(cell);
            const double w = bx.x1 - bx.x0;
            // Weighted least squares on the Gauss points: the L2 projection,
            // solved by QR to avoid squaring the condition number.
            const int npts = static_cast<int>(rule.points.size() * rule.points.size());
            Eigen::MatrixXd samples(npts, ls);
            Eigen::VectorXd rhs(npts);
            int row = 0;
            for (std::size_t a = 0; a < rule.points.size(); ++a)
                for (std::size_t b = 0; b < rule.points.size(); ++b, ++row) {
                    const Point p{bx.x0 + w * rule.points[a], bx.y0 + w * rule.points[b]};
                    const double sw = std::sqrt(rule.weights[a] * rule.weights[b]);
                    const LocalTensorValues vals(basis->levels(), cell, p, 0);
                    for (int s = 0; s < ls; ++s) samples(row, s) = sw * vals(s, 0, 0);
                    const double value = v(p);
                    if (!std::isfinite(value))
                        throw std::runtime_error("quasi_interpolate: non-finite sample on cell " +
                                                 to_string(cell));
                    rhs[row] = sw * value;
                }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(samples);
            if (qr.rank() < ls)
                throw std::runtime_error("quasi_interpolate: rank-deficient local projection on cell " +
                                         to_string(cell));
            it = projections.emplace(cell_key(cell), qr.solve(rhs)).first;
        }
        const auto& fn = basis->functions()[f];
        coeffs[f] = it->second[(fn.index.i - cell.i) * (r + 1) + (fn.index.j - cell.j)];
    }
    return SplineField(std::move(basis), std::move(coeffs));
}

}  // namespace thb
