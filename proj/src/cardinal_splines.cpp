#include "thb/cardinal_splines.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <stdexcept>
#include <string>

namespace thb {

KnotVector::KnotVector(int degree, std::vector<double> knots, int level)
    : degree_(degree), level_(level), knots_(std::move(knots)) {
    if (degree_ < 0 || degree_ > kMaxDegree)
        throw std::invalid_argument("KnotVector: degree out of range");
    if (static_cast<int>(knots_.size()) < degree_ + 2)
        throw std::invalid_argument("KnotVector: need at least degree+2 knots");
    if (!std::is_sorted(knots_.begin(), knots_.end()))
        throw std::invalid_argument("KnotVector: knots must be nondecreasing");
    if (knots_.front() == knots_.back())
        throw std::invalid_argument("KnotVector: empty parameter range");
}

KnotVector KnotVector::clamped_uniform(int level, int degree, int base_cells) {
    if (base_cells < 1 || level < 0) throw std::invalid_argument("clamped_uniform: bad level");
    const int n = base_cells << level;
    std::vector<double> knots;
    knots.reserve(n + 2 * degree + 1);
    for (int j = 0; j < n + 2 * degree + 1; ++j) {
        const int k = std::clamp(j - degree, 0, n);
        knots.push_back(static_cast<double>(k) / n);
    }
    return KnotVector(degree, std::move(knots), level);
}

KnotVector KnotVector::dyadic_refinement() const {
    std::vector<double> fine;
    fine.reserve(2 * knots_.size());
    for (std::size_t k = 0; k + 1 < knots_.size(); ++k) {
        fine.push_back(knots_[k]);
        if (knots_[k] < knots_[k + 1]) fine.push_back(0.5 * (knots_[k] + knots_[k + 1]));
    }
    fine.push_back(knots_.back());
    return KnotVector(degree_, std::move(fine), level_ + 1);
}

int KnotVector::find_span(double x) const {
    const int lo = degree_;
    const int hi = size() - 1;
    if (hi < lo) throw std::logic_error("find_span: knot vector has no valid span");
    // Largest s in [lo, hi] with t_s <= x and t_s < t_{s+1}.
    auto first_greater = std::upper_bound(knots_.begin() + lo, knots_.begin() + hi + 1, x);
    int s = static_cast<int>(first_greater - knots_.begin()) - 1;
    s = std::clamp(s, lo, hi);
    while (s > lo && knots_[s] == knots_[s + 1]) --s;
    return s;
}

void KnotVector::basis_ders(int span, double x, int nder, std::span<double> out) const {
    const int p = degree_;
    assert(static_cast<int>(out.size()) >= (nder + 1) * (p + 1));
    std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> ndu{};
    std::array<double, kMaxDegree + 1> left{}, right{};
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[span + 1 - j];
        right[j] = knots_[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    std::fill(out.begin(), out.begin() + (nder + 1) * (p + 1), 0.0);
    for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];

    std::array<std::array<double, kMaxDegree + 1>, 2> a{};
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= std::min(nder, p); ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            out[k * (p + 1) + r] = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= std::min(nder, p); ++k) {
        for (int j = 0; j <= p; ++j) out[k * (p + 1) + j] *= factor;
        factor *= (p - k);
    }
}

namespace {

double cox_de_boor(std::span<const double> t, int i, int p, double x, int d) {
    if (d > p) return 0.0;
    if (p == 0) {
        if (t[i] < t[i + 1]) {
            if (t[i] <= x && x < t[i + 1]) return 1.0;
            // Close the last nonempty interval at the final knot.
            if (x == t.back() && t[i + 1] == t.back()) return 1.0;
        }
        return 0.0;
    }
    const double dl = t[i + p] - t[i];
    const double dr = t[i + p + 1] - t[i + 1];
    if (d > 0) {
        double v = 0.0;
        if (dl > 0.0) v += cox_de_boor(t, i, p - 1, x, d - 1) / dl;
        if (dr > 0.0) v -= cox_de_boor(t, i + 1, p - 1, x, d - 1) / dr;
        return p * v;
    }
    double v = 0.0;
    if (dl > 0.0) v += (x - t[i]) / dl * cox_de_boor(t, i, p - 1, x, 0);
    if (dr > 0.0) v += (t[i + p + 1] - x) / dr * cox_de_boor(t, i + 1, p - 1, x, 0);
    return v;
}

// Boehm insertion of knot x into (u, c), with c_j = 0 outside [0, m).
void insert_knot(std::vector<double>& u, std::vector<double>& c, int p, double x) {
    const int m = static_cast<int>(c.size());
    const int k = static_cast<int>(std::upper_bound(u.begin(), u.end(), x) - u.begin()) - 1;
    std::vector<double> out(m + 1, 0.0);
    auto coef = [&](int j) { return (j >= 0 && j < m) ? c[j] : 0.0; };
    for (int j = 0; j <= m; ++j) {
        double a;
        if (j <= k - p) {
            a = 1.0;
        } else if (j >= k + 1) {
            a = 0.0;
        } else {
            a = (x - u[j]) / (u[j + p] - u[j]);
        }
        out[j] = a * coef(j) + (1.0 - a) * coef(j - 1);
    }
    u.insert(u.begin() + k + 1, x);
    c = std::move(out);
}

}  // namespace

double bspline_eval(const KnotVector& kv, int i, double x, int d) {
    if (i < 0 || i >= kv.size())
        throw std::out_of_range("bspline_eval: basis index " + std::to_string(i) + " out of range");
    if (d < 0) throw std::invalid_argument("bspline_eval: negative derivative order");
    return cox_de_boor(kv.knots(), i, kv.degree(), x, d);
}

TwoScaleRow two_scale(const KnotVector& coarse, int i) {
    if (i < 0 || i >= coarse.size()) throw std::out_of_range("two_scale: basis index out of range");
    const int p = coarse.degree();
    const auto t = coarse.knots();
    std::vector<double> u(t.begin() + i, t.begin() + i + p + 2);
    std::vector<double> c{1.0};
    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < u.size(); ++k)
        if (u[k] < u[k + 1]) mids.push_back(0.5 * (u[k] + u[k + 1]));
    for (double x : mids) insert_knot(u, c, p, x);

    int offset = i;
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
        if (t[k] < t[k + 1] && 0.5 * (t[k] + t[k + 1]) < t[i]) ++offset;

    TwoScaleRow row;
    row.coarse = i;
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] != 0.0) {
            row.fine.push_back(offset + static_cast<int>(k));
            row.coeffs.push_back(c[k]);
        }
    }
    return row;
}

double tensor_eval(const KnotVector& kvx, const KnotVector& kvy, TensorIndex ij, Point p, int dx,
                   int dy) {
    const double vx = bspline_eval(kvx, ij.i, p.x, dx);
    if (vx == 0.0) return 0.0;
    return vx * bspline_eval(kvy, ij.j, p.y, dy);
}

SplineLevels::SplineLevels(int degree, int base_cells, int max_levels)
    : degree_(degree), base_cells_(base_cells) {
    if (max_levels < 1) throw std::invalid_argument("SplineLevels: need at least one level");
    knots_.reserve(max_levels);
    for (int l = 0; l < max_levels; ++l)
        knots_.push_back(KnotVector::clamped_uniform(l, degree, base_cells));
    rows_.resize(max_levels);
    for (int l = 0; l + 1 < max_levels; ++l) {
        rows_[l].reserve(dim(l));
        for (int i = 0; i < dim(l); ++i) rows_[l].push_back(two_scale(knots_[l], i));
    }
}

std::pair<int, int> SplineLevels::support_cells(int level, int i) const noexcept {
    return {std::max(i - degree_, 0), std::min(i, cells(level) - 1)};
}

}  // namespace thb
