#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <vector>

namespace vpmb {

/// Cost of a forbidden row/column pairing.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Row-to-column assignment. mapping[i] is the column assigned to row i.
struct Assignment {
    std::vector<int> mapping;
    double cost = 0.0;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Shortest augmenting path with dual potentials, built one row at a time:
/// after each add_row the rows added so far are optimally assigned. Copies
/// branch the computation, so problems sharing their leading rows can share
/// that work.
class IncrementalAssignment {
public:
    explicit IncrementalAssignment(Eigen::Index cols);

    /// Appends a row of costs (+inf forbidden, NaN rejected). Returns false and
    /// leaves the state as it was when no finite completion exists.
    [[nodiscard]] bool add_row(const Eigen::Ref<const Eigen::RowVectorXd>& costs);

    /// Pre-allocates room for this many rows in total.
    void reserve(Eigen::Index rows);

    [[nodiscard]] Eigen::Index rows() const { return rows_; }
    [[nodiscard]] Eigen::Index cols() const { return cols_; }
    /// Optimal assignment of the rows added so far; cost summed from the stored rows.
    [[nodiscard]] Assignment result() const;

private:
    Eigen::Index rows_ = 0;
    Eigen::Index cols_;
    std::vector<double> costs_;  // row-major
    std::vector<double> u_, v_;  // dual potentials of rows and columns
    std::vector<int> col4row_, row4col_;  // -1 when unassigned
    // Scratch space of one augmentation.
    std::vector<double> shortest_;
    std::vector<int> path_, remaining_;
    std::vector<char> scanned_row_, scanned_col_;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Entries may be +inf (forbidden) and negative; NaN is rejected.
/// Shortest augmenting path with dual potentials (Jonker-Volgenant family).
/// Throws InfeasibleAssignment when every completion uses a forbidden entry.
[[nodiscard]] Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// The min(k, #feasible) cheapest assignments in non-decreasing cost order
/// (Murty's partitioning). Equal costs are ordered lexicographically by mapping.
[[nodiscard]] std::vector<Assignment> murty_kbest(const Eigen::MatrixXd& cost, std::size_t k);

}  // namespace vpmb
