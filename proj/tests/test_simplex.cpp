#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "bmt/rng.hpp"
#include "bmt/simplex.hpp"
#include "helpers.hpp"

using namespace bmt;
using Catch::Approx;

namespace {

Matrix dense_of(const SparseLp& lp) {
    Matrix A = Matrix::Zero(lp.num_rows, lp.num_cols());
    for (int j = 0; j < lp.num_cols(); ++j)
        for (const auto& [i, v] : lp.cols[j]) A(i, j) += v;
    return A;
}

/// Exhaustive vertex enumeration: best objective over all basic feasible
/// solutions. Exponential and dumb on purpose.
double vertex_oracle(const SparseLp& lp) {
    const Matrix A = dense_of(lp);
    const int m = lp.num_rows, n = lp.num_cols();
    std::vector<int> pick(m);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> comb(m);
    auto visit = [&](auto&& self, int start, int depth) -> void {
        if (depth == m) {
            Matrix B(m, m);
            for (int k = 0; k < m; ++k) B.col(k) = A.col(comb[k]);
            Eigen::FullPivLU<Matrix> lu(B);
            if (!lu.isInvertible()) return;
            const Vector xb = lu.solve(lp.b);
            if ((xb.array() < -1e-9).any()) return;
            double obj = 0.0;
            for (int k = 0; k < m; ++k) obj += lp.c[comb[k]] * xb[k];
            best = std::min(best, obj);
            return;
        }
        for (int j = start; j < n; ++j) {
            comb[depth] = j;
            self(self, j + 1, depth + 1);
        }
    };
    visit(visit, 0, 0);
    return best;
}

}  // namespace

TEST_CASE("simplex: tiny LPs by hand") {
    // min x1 s.t. x1 + x2 = 1  ->  (0, 1), value 0.
    SparseLp lp = SparseLp::create(1, 2);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.b[0] = 1.0;
    lp.c[0] = 1.0;
    const auto sol = solve_lp(lp);
    REQUIRE(sol.objective == Approx(0.0).margin(1e-12));
    REQUIRE(sol.x[0] == Approx(0.0).margin(1e-12));
    REQUIRE(sol.x[1] == Approx(1.0).margin(1e-12));

    // Equality pair pinning both variables.
    SparseLp lp2 = SparseLp::create(2, 2);
    lp2.add_entry(0, 0, 1.0);
    lp2.add_entry(1, 1, 2.0);
    lp2.b << 2.0, 3.0;
    lp2.c << 5.0, -1.0;
    const auto sol2 = solve_lp(lp2);
    REQUIRE(sol2.x[0] == Approx(2.0).margin(1e-12));
    REQUIRE(sol2.x[1] == Approx(1.5).margin(1e-12));
    REQUIRE(sol2.objective == Approx(8.5).margin(1e-12));
}

TEST_CASE("simplex: infeasibility yields a Farkas certificate") {
    // x1 + x2 = -1 with x >= 0.
    SparseLp lp = SparseLp::create(1, 2);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.b[0] = -1.0;
    try {
        solve_lp(lp);
        FAIL("expected InfeasibleLp");
    } catch (const InfeasibleLp& e) {
        const Vector& y = e.certificate;
        REQUIRE(y.dot(lp.b) > 0.0);
        const Matrix A = dense_of(lp);
        REQUIRE(((y.transpose() * A).array() <= 1e-9).all());
    }

    // Conflicting equalities, discovered by phase 1 rather than presolve.
    SparseLp lp2 = SparseLp::create(2, 2);
    lp2.add_entry(0, 0, 1.0);
    lp2.add_entry(0, 1, 1.0);
    lp2.add_entry(1, 0, 1.0);
    lp2.add_entry(1, 1, 1.0);
    lp2.b << 1.0, 2.0;
    try {
        solve_lp(lp2);
        FAIL("expected InfeasibleLp");
    } catch (const InfeasibleLp& e) {
        REQUIRE(e.certificate.dot(lp2.b) > 1e-9);
        const Matrix A = dense_of(lp2);
        REQUIRE(((e.certificate.transpose() * A).array() <= 1e-9).all());
    }
}

TEST_CASE("simplex: unbounded ray is reported") {
    SparseLp lp = SparseLp::create(1, 2);
    lp.add_entry(0, 1, 1.0);  // x2 = 1; x1 unconstrained with negative cost
    lp.b[0] = 1.0;
    lp.c[0] = -1.0;
    REQUIRE_THROWS_AS(solve_lp(lp), UnboundedLp);
}

TEST_CASE("simplex: iteration cap is enforced") {
    SparseLp lp = SparseLp::create(1, 2);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.b[0] = 1.0;
    lp.c[0] = -1.0;
    SimplexOptions opts;
    opts.max_iterations = 0;
    REQUIRE_THROWS_AS(solve_lp(lp, opts), std::runtime_error);
}

TEST_CASE("simplex: redundant rows are dropped, not fatal") {
    SparseLp lp = SparseLp::create(2, 2);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.add_entry(1, 0, 1.0);
    lp.add_entry(1, 1, 1.0);
    lp.b << 1.0, 1.0;  // duplicated constraint
    lp.c << 1.0, 0.0;
    const auto sol = solve_lp(lp);
    REQUIRE(sol.objective == Approx(0.0).margin(1e-12));
    REQUIRE(sol.x.sum() == Approx(1.0).margin(1e-12));
}

TEST_CASE("simplex: duals certify optimality on a clean instance") {
    // min 2a + 3b s.t. a + b = 1, a = 0.25.
    SparseLp lp = SparseLp::create(2, 2);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.add_entry(1, 0, 1.0);
    lp.b << 1.0, 0.25;
    lp.c << 2.0, 3.0;
    const auto sol = solve_lp(lp);
    REQUIRE(sol.objective == Approx(2.0 * 0.25 + 3.0 * 0.75).margin(1e-12));
    // Reduced costs of the solution's support vanish: c - A'y at basic cols.
    const Matrix A = dense_of(lp);
    const Vector rc = lp.c - A.transpose() * sol.duals;
    for (int j = 0; j < 2; ++j)
        if (sol.x[j] > 1e-9) REQUIRE(std::fabs(rc[j]) <= 1e-9);
}

TEST_CASE("property: simplex matches exhaustive vertex enumeration") {
    SplitMix64 rng(808);
    int solved = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 1 + static_cast<int>(rng.below(3));
        const int n = m + 1 + static_cast<int>(rng.below(4));
        SparseLp lp = SparseLp::create(m, n);
        for (int j = 0; j < n; ++j) {
            lp.c[j] = rng.uniform(-2.0, 2.0);
            for (int i = 0; i < m; ++i)
                if (rng.below(3) != 0) lp.add_entry(i, j, rng.uniform(-1.0, 1.0));
        }
        // Feasible by construction: b = A x for a random nonnegative x.
        Vector x0(n);
        for (int j = 0; j < n; ++j) x0[j] = rng.uniform(0.0, 1.0);
        lp.b = dense_of(lp) * x0;

        // The enumeration needs invertible bases, so skip row-deficient draws.
        if (test::rank_oracle(dense_of(lp)) < m) continue;

        const double expected = vertex_oracle(lp);
        try {
            const auto sol = solve_lp(lp);
            REQUIRE(sol.objective == Approx(expected).margin(1e-7));
            // The returned point is primal feasible.
            REQUIRE((dense_of(lp) * sol.x - lp.b).lpNorm<Eigen::Infinity>() <= 1e-8);
            REQUIRE((sol.x.array() >= -1e-9).all());
            ++solved;
        } catch (const UnboundedLp&) {
            // A finite best vertex can coexist with an unbounded ray; the
            // enumeration cannot tell these apart, so skip the comparison.
        }
    }
    REQUIRE(solved >= 200);
}
