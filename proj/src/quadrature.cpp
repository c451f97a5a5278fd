#include "thb/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace thb {

namespace {

GaussRule compute_rule(int n) {
    GaussRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        // Newton on P_n starting from the Chebyshev-like guess.
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int m = 2; m <= n; ++m) {
                const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute derivative at the converged root.
        double p0 = 1.0, p1 = x;
        for (int m = 2; m <= n; ++m) {
            const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.points[n - 1 - k] = 0.5 * (x + 1.0);
        rule.weights[n - 1 - k] = 0.5 * w;
    }
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    if (n < 1 || n > 64) throw std::invalid_argument("gauss_legendre: order out of range");
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
    return it->second;
}

}  // namespace thb
