#pragma once

#include <string>
#include <vector>

// Exact solver for tiny dense quadratic programs:
//   minimize x' diag(q) x   subject to   A x >= b
// with at most a handful of variables and constraints. Solved by
// enumerating candidate active sets, which is exact and deterministic at
// this scale.

namespace highway::qp {

inline constexpr double kTolerance = 1e-8;

struct QuadraticProgram {
    std::vector<double> weights;           // diagonal of Q, all > 0
    std::vector<std::vector<double>> rows; // constraint normals (m x n)
    std::vector<double> bounds;            // right-hand sides (m)
    std::vector<std::string> labels;       // optional per-row tags

    int num_vars() const { return static_cast<int>(weights.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    void add_row(std::vector<double> a, double b, std::string label = {});
};

enum class Status { optimal, infeasible };

struct QpSolution {
    Status status = Status::infeasible;
    std::vector<double> x;       // minimizer (valid when optimal)
    double cost = 0.0;           // x' Q x at the minimizer
    std::vector<int> active_set; // indices of active rows, ascending
};

QpSolution solve(const QuadraticProgram& qp);

// Conflict test for rows that constrain a single variable: row i reads
// a_i * x >= b_i. Returns true when the implied lower/upper bounds admit
// no value.
bool detect_conflict(const std::vector<double>& coeffs,
                     const std::vector<double>& bounds);

}  // namespace highway::qp
