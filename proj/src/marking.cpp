#include "thb/marking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace thb {

namespace {
constexpr double kSlack = 1e-12;
}

MarkingResult dorfler_mark(std::span<const double> eta2, std::span<const LevelCell> cells,
                           double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0, 1]");
    if (eta2.size() != cells.size()) throw std::invalid_argument("dorfler_mark: size mismatch");
    for (double e : eta2)
        if (!(e >= 0.0) || !std::isfinite(e))
            throw std::invalid_argument("dorfler_mark: indicators must be finite and nonnegative");

    MarkingResult result;
    result.theta = theta;
    std::vector<int> order(eta2.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (eta2[a] != eta2[b]) return eta2[a] > eta2[b];
        return cells[a] < cells[b];
    });
    // Summing in sorted order keeps the threshold test consistent with the prefix sums.
    double total = 0.0;
    for (int k : order) total += eta2[k];
    if (total == 0.0) {
        result.converged = true;
        return result;
    }
    // Relative slack so that exact ties (ten equal values, theta 0.3) are not
    // lost to rounding of the partial sums.
    const double target = theta == 1.0 ? total : theta * total * (1.0 - kSlack);
    double sum = 0.0;
    for (int k : order) {
        if (eta2[k] == 0.0 || (theta < 1.0 && sum >= target)) break;
        sum += eta2[k];
        result.marked.push_back(k);
    }
    result.fraction = sum / total;
    return result;
}

}  // namespace thb
