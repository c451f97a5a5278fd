#pragma once

#include <stdexcept>
#include <string>

namespace thb {

/// Invalid configuration (base cells, degree, level cap, empty spaces).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A resource cap was hit, e.g. refinement beyond the maximum level.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear solver failure (non-SPD matrix, CG did not converge).
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double condition_estimate)
        : std::runtime_error(what), condition_estimate_(condition_estimate) {}

    [[nodiscard]] double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

}  // namespace thb
