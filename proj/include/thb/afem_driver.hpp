#pragma once

// SOLVE -> ESTIMATE -> MARK -> REFINE loop with run diagnostics.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "thb/estimator.hpp"
#include "thb/hier_mesh.hpp"
#include "thb/problems.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// One row of iterations.csv plus diagnostics kept in memory. Quantities
/// that are not available (no exact solution, first step) are NaN.
struct IterationRecord {
    int iter = 0;
    long ncells = 0;
    int ndof = 0;
    double eta2 = 0.0;
    double osc2 = 0.0;
    double energy_err2 = 0.0;
    double total_err2 = 0.0;
    int marked = 0;
    /// Quasi-error ratio (e^2 + eta^2) / previous, with C = 1.
    double alpha_step = 0.0;
    double wall_ms = 0.0;

    int max_level = 0;
    double load_norm = 0.0;
    double solver_residual = 0.0;
    /// eta^2 on the patches of refined cells over eta^2 (NaN when not refined).
    double refined_share = 0.0;
};

enum class StopReason { tolerance, converged, max_iterations, level_cap };
std::string to_string(StopReason reason);

struct AfemOptions {
    /// Output directory for iterations.csv, mesh_NNNN.json, field.json and
    /// summary.json; nothing is written when empty.
    std::filesystem::path output;
    bool dump_indicators = false;
    bool write_meshes = true;
    /// Record wall time; off gives byte-identical CSVs across runs.
    bool timing = true;
    std::function<void(const IterationRecord&)> on_record;
};

struct AfemResult {
    std::vector<IterationRecord> records;
    StopReason stop = StopReason::max_iterations;
    HierPartition final_mesh;
    std::optional<SplineField> final_field;
};

/// Adaptive loop from the uniform level-0 mesh of the spec. Stops when
/// eta <= tol, nothing is marked, max_iter solves are done, or a marked cell
/// sits at max_level.
AfemResult run_afem(const ProblemSpec& spec, const AfemOptions& options = {});

/// Uniform mesh with every cell at `level`.
HierPartition uniform_partition(int base_cells, int degree, int level,
                                int max_levels = kDefaultMaxLevels);

/// Solves on uniform meshes of levels 0..levels; `marked` counts all cells.
AfemResult run_uniform(const ProblemSpec& spec, int levels, const AfemOptions& options = {});

struct ContractionReport {
    bool skipped = true;
    double C = 0.0;
    /// Largest ratio q_{k+1}/q_k with q = e^2 + C eta^2, over steps from
    /// iteration `first` on.
    double max_ratio = 0.0;
    /// exp of the least-squares slope of log q against the iteration.
    double alpha_fit = 0.0;
    std::vector<double> ratios;
};

/// Skipped without exact errors or with fewer than 3 records.
ContractionReport contraction_diagnostic(const std::vector<IterationRecord>& records, double C,
                                         int first = 2);

/// Scan over C = 10^k, k = -3..3; the report with the smallest max ratio
/// first, then all of them.
std::vector<ContractionReport> contraction_scan(const std::vector<IterationRecord>& records,
                                                int first = 2);

enum class Quantity { energy, eta, total };

struct RateFit {
    /// Decay exponent: quantity ~ dim^{-s}.
    double s = 0.0;
    /// RMS residual of the log-log fit.
    double residual = 0.0;
    int points = 0;
};

/// Least-squares slope over the last half of the records (at least 3
/// points). Nonpositive or NaN values are excluded; throws invalid_argument
/// with fewer than 4 records or 3 usable points.
RateFit rate_estimate(const std::vector<IterationRecord>& records, Quantity q);
RateFit rate_fit(const std::vector<double>& dims, const std::vector<double>& values);

/// max over k of (#P_k - #P_0) / sum_{l<k} #M_l; NaN if nothing was marked.
double complexity_constant(const std::vector<IterationRecord>& records);

using CellFunctional = std::function<double(const HierPartition&, const LevelCell&)>;

struct ThresholdResult {
    HierPartition mesh;
    int sweeps = 0;
    double sum_e2 = 0.0;
};

/// Refines every cell with e > eps until none remains. Throws ResourceError
/// after max_sweeps sweeps.
ThresholdResult threshold_refine(const CellFunctional& e, double eps, const HierPartition& initial,
                                 int max_sweeps = 64);

void write_iterations_csv(std::ostream& out, const std::vector<IterationRecord>& records);
/// Reads the columns of write_iterations_csv; throws invalid_argument on a
/// malformed file.
std::vector<IterationRecord> read_iterations_csv(std::istream& in);

/// Rates, contraction scan, measured constants.
nlohmann::json run_summary(const ProblemSpec& spec, const AfemResult& result);

}  // namespace thb
