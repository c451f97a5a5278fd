#pragma once

#include <vector>

namespace thb {

/// Gauss-Legendre rule on [0,1].
struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [0,1]; exact for degree 2n-1.
/// Rules are cached, the returned reference stays valid.
const GaussRule& gauss_legendre(int n);

}  // namespace thb
