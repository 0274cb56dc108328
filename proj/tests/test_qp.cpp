#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "highway/qp.hpp"

#include "qp_oracle.hpp"

using namespace highway::qp;

namespace {
using test_oracle::grid_search;
using test_oracle::kkt_residual;
using test_oracle::random_qp_instance;
}  // namespace

TEST_CASE("unconstrained QP minimizes at the origin") {
    QuadraticProgram qp;
    qp.weights = {1.0, 2.0, 3.0};
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == Status::optimal);
    for (double v : sol.x) CHECK(v == 0.0);
    CHECK(sol.cost == 0.0);
}

TEST_CASE("single active constraint x >= 3") {
    QuadraticProgram qp;
    qp.weights = {1.0};
    qp.add_row({1.0}, 3.0);
    const QpSolution sol = solve(qp);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.x[0] == doctest::Approx(3.0));
    CHECK(sol.cost == doctest::Approx(9.0));
}

TEST_CASE("infeasible system reported") {
    QuadraticProgram qp;
    qp.weights = {1.0};
    qp.add_row({1.0}, 1.0);    // x >= 1
    qp.add_row({-1.0}, 1.0);   // x <= -1
    CHECK(solve(qp).status == Status::infeasible);
}

TEST_CASE("random instances match the grid oracle") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> rows(1, 9);
    for (int trial = 0; trial < 120; ++trial) {
        const QuadraticProgram qp = random_qp_instance(rng, 3, rows(rng));
        const QpSolution sol = solve(qp);
        REQUIRE(sol.status == Status::optimal);
        const test_oracle::GridResult g = grid_search(qp, 4.5);
        REQUIRE(g.found);
        for (int d = 0; d < 3; ++d) CHECK(std::fabs(sol.x[d] - g.x[d]) < 1e-2);
        CHECK(std::fabs(sol.cost - g.cost) < 1e-3);
        CHECK(kkt_residual(qp, sol) <= 1e-8);
    }
}

TEST_CASE("multipliers nonnegative and constraints held") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const QuadraticProgram qp = random_qp_instance(rng, 3, 6);
        const QpSolution sol = solve(qp);
        REQUIRE(sol.status == Status::optimal);
        for (int r = 0; r < qp.num_rows(); ++r) {
            double acc = 0.0;
            for (int d = 0; d < 3; ++d) acc += qp.rows[r][d] * sol.x[d];
            CHECK(acc >= qp.bounds[r] - 1e-7);
        }
        std::vector<double> lambda;
        kkt_residual(qp, sol, &lambda);
        for (double l : lambda) CHECK(l >= -1e-7);
    }
}

TEST_CASE("scaling Q leaves the minimizer unchanged") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        QuadraticProgram qp = random_qp_instance(rng, 2, 5);
        const QpSolution a = solve(qp);
        for (double& w : qp.weights) w *= 7.5;
        const QpSolution b = solve(qp);
        REQUIRE(a.status == Status::optimal);
        REQUIRE(b.status == Status::optimal);
        for (int d = 0; d < 2; ++d) CHECK(a.x[d] == doctest::Approx(b.x[d]).epsilon(1e-9));
    }
}

TEST_CASE("one-variable QP equals closed-form clamp") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        QuadraticProgram qp;
        qp.weights = {1.0 + trial % 3};
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 4; ++r) {
            double a = coef(rng);
            if (std::fabs(a) < 1e-3) a = 1.0;
            const double b = coef(rng);
            qp.add_row({a}, b);
            if (a > 0) lower = std::max(lower, b / a);
            else upper = std::min(upper, b / a);
        }
        const QpSolution sol = solve(qp);
        if (lower > upper + 1e-12) {
            CHECK(sol.status == Status::infeasible);
            continue;
        }
        REQUIRE(sol.status == Status::optimal);
        double expect = 0.0;
        if (lower > 0.0) expect = lower;
        if (upper < 0.0) expect = upper;
        CHECK(sol.x[0] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("conflict detection on single-variable rows") {
    CHECK(detect_conflict({1.0, -1.0}, {0.1, 0.1}));         // x>=0.1 and x<=-0.1
    CHECK_FALSE(detect_conflict({1.0, -1.0}, {0.1, -0.2}));  // x>=0.1 and x<=0.2
    CHECK_FALSE(detect_conflict({1.0}, {0.1}));              // single row
    CHECK(detect_conflict({1.0, -1.0}, {0.2, -0.1}));        // empty interval
    CHECK(detect_conflict({0.0}, {1.0}));                    // 0 >= 1
}
