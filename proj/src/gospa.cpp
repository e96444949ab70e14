#include "vpmb/gospa.hpp"

#include "vpmb/assignment.hpp"
#include "vpmb/errors.hpp"

#include <cmath>

namespace vpmb {

GospaResult gospa(std::span<const Eigen::VectorXd> truth, std::span<const Eigen::VectorXd> estimates,
                  double p, double c) {
    if (p < 1.0) throw ContractViolation("gospa: p must be >= 1");
    if (c <= 0.0) throw ContractViolation("gospa: c must be positive");
    const std::size_t nx = truth.size();
    const std::size_t ny = estimates.size();
    const double cp = std::pow(c, p);
    const double half = cp / 2.0;

    GospaResult out;
    if (nx > 0) {
        // Truth rows; estimate columns, then one private "unassigned" column per row.
        // Unpairing a truth adds a miss and a false target, so that column costs
        // c^p; the reported costs are recomputed from the minimiser.
        const auto rows = static_cast<Eigen::Index>(nx);
        const auto cols = static_cast<Eigen::Index>(ny);
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(rows, cols + rows, kForbidden);
        for (std::size_t i = 0; i < nx; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            for (std::size_t j = 0; j < ny; ++j) {
                if (truth[i].size() != estimates[j].size())
                    throw ContractViolation("gospa: dimension mismatch");
                const double d = (truth[i] - estimates[j]).norm();
                // Pairs at or beyond the cut-off are never better than leaving both unassigned.
                if (d < c) cost(r, static_cast<Eigen::Index>(j)) = std::pow(d, p);
            }
            cost(r, cols + r) = cp;
        }
        const Assignment best = solve_assignment(cost);
        for (std::size_t i = 0; i < nx; ++i) {
            const int col = best.mapping[i];
            if (col < cols) {
                out.assigned.emplace_back(i, static_cast<std::size_t>(col));
                out.localisation += cost(static_cast<Eigen::Index>(i), col);
            }
        }
    }
    out.false_ = ny - out.assigned.size();
    out.missed = nx - out.assigned.size();
    out.missed_cost = half * static_cast<double>(out.missed);
    out.false_cost = half * static_cast<double>(out.false_);
    out.total = std::pow(out.localisation + out.missed_cost + out.false_cost, 1.0 / p);
    return out;
}

double rms_gospa(std::span<const double> per_run_totals) {
    if (per_run_totals.empty()) throw ContractViolation("rms_gospa: no runs");
    double sum = 0.0;
    for (double t : per_run_totals) sum += t * t;
    return std::sqrt(sum / static_cast<double>(per_run_totals.size()));
}

Eigen::VectorXd position_of(const Eigen::VectorXd& state) {
    if (state.size() != 4) throw ContractViolation("position_of: expected a 4-D state");
    return Eigen::Vector2d(state(0), state(2));
}

}  // namespace vpmb
