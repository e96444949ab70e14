#include "vpmb/assignment.hpp"

#include "vpmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace vpmb {
namespace {

void check_input(const Eigen::MatrixXd& cost) {
    if (cost.rows() > cost.cols())
        throw ContractViolation("assignment: more rows (" + std::to_string(cost.rows()) +
                                ") than columns (" + std::to_string(cost.cols()) + ")");
    if (cost.array().isNaN().any()) throw ContractViolation("assignment: NaN cost entry");
}

// Returns false when no finite completion exists.
bool solve(const Eigen::MatrixXd& cost, Assignment& out) {
    IncrementalAssignment state(cost.cols());
    state.reserve(cost.rows());
    for (Eigen::Index i = 0; i < cost.rows(); ++i)
        if (!state.add_row(cost.row(i))) return false;
    out = state.result();
    return true;
}

struct MurtyNode {
    Eigen::MatrixXd cost;  // original costs with this node's constraints applied
    Assignment best;
};

struct WorseNode {
    bool operator()(const MurtyNode& a, const MurtyNode& b) const {
        if (a.best.cost != b.best.cost) return a.best.cost > b.best.cost;
        return a.best.mapping > b.best.mapping;
    }
};

}  // namespace

IncrementalAssignment::IncrementalAssignment(Eigen::Index cols) : cols_(cols) {
    if (cols < 0) throw ContractViolation("assignment: negative column count");
    const auto m = static_cast<std::size_t>(cols);
    v_.assign(m, 0.0);
    row4col_.assign(m, -1);
    shortest_.resize(m);
    path_.resize(m);
    remaining_.resize(m);
    scanned_col_.resize(m);
}

bool IncrementalAssignment::add_row(const Eigen::Ref<const Eigen::RowVectorXd>& costs) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int m = static_cast<int>(cols_);
    if (costs.size() != cols_) throw ContractViolation("assignment: row length differs from column count");
    if (rows_ + 1 > cols_)
        throw ContractViolation("assignment: more rows (" + std::to_string(rows_ + 1) +
                                ") than columns (" + std::to_string(cols_) + ")");

    const int cur = static_cast<int>(rows_);
    const std::size_t offset = costs_.size();
    if (costs_.capacity() < offset + static_cast<std::size_t>(m)) reserve(2 * (rows_ + 1));
    costs_.resize(offset + static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const double c = costs(j);
        if (std::isnan(c)) {
            costs_.resize(offset);
            throw ContractViolation("assignment: NaN cost entry");
        }
        costs_[offset + j] = c;
    }
    u_.push_back(0.0);
    col4row_.push_back(-1);
    scanned_row_.resize(static_cast<std::size_t>(cur) + 1);
    std::fill(scanned_row_.begin(), scanned_row_.end(), 0);

    // Dijkstra over reduced costs from the new row until a free column is
    // reached; among equally short columns a free one ends the search.
    std::fill(shortest_.begin(), shortest_.end(), inf);
    std::fill(scanned_col_.begin(), scanned_col_.end(), 0);
    int n_remaining = m;
    for (int k = 0; k < m; ++k) remaining_[k] = m - k - 1;
    double min_val = 0.0;
    int i = cur;
    int sink = -1;
    while (sink < 0) {
        scanned_row_[i] = 1;
        const double* row = costs_.data() + static_cast<std::size_t>(i) * m;
        const double base = min_val - u_[i];
        int best = -1;
        double lowest = inf;
        for (int k = 0; k < n_remaining; ++k) {
            const int j = remaining_[k];
            // Forbidden entries give +inf and never shorten a path.
            const double r = base + row[j] - v_[j];
            if (r < shortest_[j]) {
                path_[j] = i;
                shortest_[j] = r;
            }
            if (shortest_[j] < lowest || (shortest_[j] == lowest && row4col_[j] < 0)) {
                lowest = shortest_[j];
                best = k;
            }
        }
        if (best < 0 || lowest == inf) {
            costs_.resize(offset);
            u_.pop_back();
            col4row_.pop_back();
            return false;
        }
        min_val = lowest;
        const int j = remaining_[best];
        if (row4col_[j] < 0)
            sink = j;
        else
            i = row4col_[j];
        scanned_col_[j] = 1;
        remaining_[best] = remaining_[--n_remaining];
    }

    u_[cur] += min_val;
    for (int r = 0; r < cur; ++r)
        if (scanned_row_[r]) u_[r] += min_val - shortest_[col4row_[r]];
    for (int j = 0; j < m; ++j)
        if (scanned_col_[j]) v_[j] -= min_val - shortest_[j];

    for (int j = sink;;) {
        const int r = path_[j];
        row4col_[j] = r;
        std::swap(col4row_[r], j);
        if (r == cur) break;
    }
    ++rows_;
    return true;
}

void IncrementalAssignment::reserve(Eigen::Index rows) {
    const auto r = static_cast<std::size_t>(std::min(rows, cols_));
    costs_.reserve(r * static_cast<std::size_t>(cols_));
    u_.reserve(r);
    col4row_.reserve(r);
    scanned_row_.reserve(r);
}

Assignment IncrementalAssignment::result() const {
    Assignment out;
    out.mapping = col4row_;
    for (Eigen::Index i = 0; i < rows_; ++i)
        out.cost += costs_[static_cast<std::size_t>(i * cols_ + out.mapping[i])];
    return out;
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
    check_input(cost);
    Assignment out;
    if (!solve(cost, out))
        throw InfeasibleAssignment("assignment: every completion uses a forbidden pairing");
    return out;
}

std::vector<Assignment> murty_kbest(const Eigen::MatrixXd& cost, std::size_t k) {
    if (k == 0) throw ContractViolation("murty_kbest: k must be at least 1");
    check_input(cost);

    std::vector<Assignment> ranked;
    std::priority_queue<MurtyNode, std::vector<MurtyNode>, WorseNode> open;

    MurtyNode root{cost, {}};
    if (!solve(cost, root.best)) return ranked;
    open.push(std::move(root));

    const Eigen::Index n = cost.rows();
    while (!open.empty() && ranked.size() < k) {
        MurtyNode node = open.top();
        open.pop();
        ranked.push_back(node.best);
        if (ranked.size() == k) break;

        // Partition the node's solution space: child i keeps rows < i fixed to
        // the popped solution and forbids its choice in row i.
        Eigen::MatrixXd& fixed = node.cost;
        const std::vector<int> sol = node.best.mapping;
        for (Eigen::Index i = 0; i < n; ++i) {
            MurtyNode child{fixed, {}};
            child.cost(i, sol[i]) = kForbidden;
            if (solve(child.cost, child.best)) open.push(std::move(child));
            const double keep = fixed(i, sol[i]);
            fixed.row(i).setConstant(kForbidden);
            fixed.col(sol[i]).setConstant(kForbidden);
            fixed(i, sol[i]) = keep;
        }
    }
    return ranked;
}

}  // namespace vpmb
