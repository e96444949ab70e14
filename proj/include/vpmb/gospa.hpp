#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace vpmb {

/// GOSPA (alpha = 2) with its decomposition. Costs are in the p-th power
/// domain: total^p = localisation + missed_cost + false_cost.
struct GospaResult {
    double total = 0.0;
    double localisation = 0.0;
    std::size_t missed = 0;
    double missed_cost = 0.0;
    std::size_t false_ = 0;
    double false_cost = 0.0;
    /// (truth index, estimate index) pairs of the minimising assignment.
    std::vector<std::pair<std::size_t, std::size_t>> assigned;
};

/// Euclidean base distance; points are compared as given (callers pass
/// position sub-vectors).
[[nodiscard]] GospaResult gospa(std::span<const Eigen::VectorXd> truth,
                                std::span<const Eigen::VectorXd> estimates, double p, double c);

/// Root mean square of per-run totals.
[[nodiscard]] double rms_gospa(std::span<const double> per_run_totals);

/// (p_x, p_y) of a [p_x, v_x, p_y, v_y] state.
[[nodiscard]] Eigen::VectorXd position_of(const Eigen::VectorXd& state);

}  // namespace vpmb
