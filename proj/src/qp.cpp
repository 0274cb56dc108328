#include "highway/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace highway::qp {

namespace {

// Gaussian elimination with partial pivoting on a k x k system.
// Returns false when the matrix is singular.
bool solve_dense(std::vector<std::vector<double>> m, std::vector<double> rhs,
                 std::vector<double>& out) {
    const int k = static_cast<int>(rhs.size());
    for (int col = 0; col < k; ++col) {
        int pivot = col;
        for (int r = col + 1; r < k; ++r) {
            if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
        }
        if (std::fabs(m[pivot][col]) < 1e-12) return false;
        std::swap(m[col], m[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        for (int r = col + 1; r < k; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < k; ++c) m[r][c] -= f * m[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    out.assign(k, 0.0);
    for (int r = k - 1; r >= 0; --r) {
        double acc = rhs[r];
        for (int c = r + 1; c < k; ++c) acc -= m[r][c] * out[c];
        out[r] = acc / m[r][r];
    }
    return true;
}

struct Best {
    bool found = false;
    double cost = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    std::vector<int> active;
};

// Solves the equality-constrained subproblem for one candidate active set
// and keeps it when it is a feasible KKT point with nonnegative multipliers.
void try_active_set(const QuadraticProgram& qp, const std::vector<int>& set,
                    Best& best) {
    const int n = qp.num_vars();
    const int k = static_cast<int>(set.size());

    std::vector<double> x(n, 0.0);
    if (k > 0) {
        // M lambda = b_S with M = 0.5 * A_S Q^-1 A_S'
        std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
        std::vector<double> rhs(k);
        for (int i = 0; i < k; ++i) {
            const auto& ai = qp.rows[set[i]];
            rhs[i] = qp.bounds[set[i]];
            for (int j = 0; j < k; ++j) {
                const auto& aj = qp.rows[set[j]];
                double acc = 0.0;
                for (int c = 0; c < n; ++c) acc += ai[c] * aj[c] / qp.weights[c];
                m[i][j] = 0.5 * acc;
            }
        }
        std::vector<double> lambda;
        if (!solve_dense(m, rhs, lambda)) return;
        for (double l : lambda) {
            if (l < -kTolerance) return;
        }
        for (int c = 0; c < n; ++c) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += qp.rows[set[i]][c] * lambda[i];
            x[c] = 0.5 * acc / qp.weights[c];
        }
    }

    for (int r = 0; r < qp.num_rows(); ++r) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += qp.rows[r][c] * x[c];
        if (acc < qp.bounds[r] - kTolerance) return;
    }

    double cost = 0.0;
    for (int c = 0; c < n; ++c) cost += qp.weights[c] * x[c] * x[c];
    if (cost < best.cost) {
        best.found = true;
        best.cost = cost;
        best.x = x;
        best.active = set;
    }
}

// Lexicographic enumeration of all row subsets of size <= n. Visiting in
// lex order plus strict improvement makes ties resolve to the smallest set.
void enumerate(const QuadraticProgram& qp, std::vector<int>& set, int next,
               Best& best) {
    try_active_set(qp, set, best);
    if (static_cast<int>(set.size()) == qp.num_vars()) return;
    for (int r = next; r < qp.num_rows(); ++r) {
        set.push_back(r);
        enumerate(qp, set, r + 1, best);
        set.pop_back();
    }
}

}  // namespace

void QuadraticProgram::add_row(std::vector<double> a, double b, std::string label) {
    rows.push_back(std::move(a));
    bounds.push_back(b);
    labels.push_back(std::move(label));
}

QpSolution solve(const QuadraticProgram& qp) {
    const int n = qp.num_vars();
    for (double w : qp.weights) {
        if (!(w > 0.0)) throw std::invalid_argument("qp: weights must be positive");
    }
    for (const auto& row : qp.rows) {
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("qp: row size mismatch");
    }

    Best best;
    std::vector<int> set;
    enumerate(qp, set, 0, best);

    QpSolution sol;
    if (!best.found) {
        sol.status = Status::infeasible;
        return sol;
    }
    sol.status = Status::optimal;
    sol.x = best.x;
    sol.cost = best.cost;
    sol.active_set = best.active;
    return sol;
}

bool detect_conflict(const std::vector<double>& coeffs,
                     const std::vector<double>& bounds) {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const double a = coeffs[i];
        const double b = bounds[i];
        if (std::fabs(a) < 1e-14) {
            if (b > kTolerance) return true;  // 0 >= b with b > 0
            continue;
        }
        if (a > 0.0) {
            lower = std::max(lower, b / a);
        } else {
            upper = std::min(upper, b / a);
        }
    }
    return lower > upper + kTolerance;
}

}  // namespace highway::qp
