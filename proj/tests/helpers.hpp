#pragma once

// Shared test utilities: random instance generators and independent oracles.
// Oracles here deliberately use naive algorithms (row reduction, repeated
// multiplication, exhaustive enumeration) so they do not share code paths
// with the library implementations they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "bmt/measure.hpp"
#include "bmt/occupation_lp.hpp"
#include "bmt/rng.hpp"
#include "bmt/system.hpp"

namespace test {

using bmt::Matrix;
using bmt::Vector;

inline Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

inline double traj_scale(const bmt::Trajectory& t) {
    double s = 0.0;
    for (const auto& x : t.states) s += x.squaredNorm();
    for (const auto& u : t.inputs) s += u.squaredNorm();
    for (const auto& y : t.outputs) s += y.squaredNorm();
    return s;
}

inline Vector random_vector(bmt::SplitMix64& rng, int n, double scale = 1.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
    return v;
}

inline Matrix random_matrix(bmt::SplitMix64& rng, int rows, int cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
    return m;
}

inline bmt::LtiSystem random_lti(bmt::SplitMix64& rng, int n_x, int n_u, int n_y) {
    return bmt::LtiSystem(random_matrix(rng, n_x, n_x, 0.8), random_matrix(rng, n_x, n_u),
                          random_matrix(rng, n_y, n_x), random_matrix(rng, n_y, n_u));
}

inline bmt::PolynomialSystem random_poly(bmt::SplitMix64& rng, int n_x, int n_u, int n_y,
                                         int max_terms = 4, int max_degree = 3) {
    auto random_polynomial = [&]() {
        bmt::Polynomial p;
        const int terms = 1 + static_cast<int>(rng.below(max_terms));
        for (int t = 0; t < terms; ++t) {
            std::vector<int> exps(n_x + n_u, 0);
            int degree = static_cast<int>(rng.below(max_degree + 1));
            for (int d = 0; d < degree; ++d) ++exps[rng.below(n_x + n_u)];
            p.push_back({std::move(exps), rng.uniform(-1.0, 1.0)});
        }
        return p;
    };
    std::vector<bmt::Polynomial> f, h;
    for (int i = 0; i < n_x; ++i) f.push_back(random_polynomial());
    for (int i = 0; i < n_y; ++i) h.push_back(random_polynomial());
    return bmt::PolynomialSystem(n_x, n_u, std::move(f), std::move(h));
}

/// Polynomial system with small integer coefficients and exponents, for the
/// exact-evaluation cross-check.
inline bmt::PolynomialSystem random_poly_integer(bmt::SplitMix64& rng, int n_x, int n_u) {
    std::vector<bmt::Polynomial> f;
    for (int c = 0; c < n_x; ++c) {
        bmt::Polynomial p;
        const int terms = 1 + static_cast<int>(rng.below(3));
        for (int t = 0; t < terms; ++t) {
            std::vector<int> exps(n_x + n_u, 0);
            const int degree = static_cast<int>(rng.below(4));
            for (int d = 0; d < degree; ++d) ++exps[rng.below(n_x + n_u)];
            p.push_back({std::move(exps), double(int(rng.below(7)) - 3)});
        }
        f.push_back(std::move(p));
    }
    return bmt::PolynomialSystem(n_x, n_u, std::move(f));
}

inline std::vector<Vector> random_inputs(bmt::SplitMix64& rng, int T, int n_u, double scale = 1.0) {
    std::vector<Vector> u;
    u.reserve(T);
    for (int t = 0; t < T; ++t) u.push_back(random_vector(rng, n_u, scale));
    return u;
}

/// Random finite-support behavioral measure built from simulated paths.
template <bmt::SystemModel S>
bmt::PathMeasure random_behavioral_measure(const S& sys, bmt::SplitMix64& rng, int T,
                                           int max_atoms = 6, double scale = 1.0) {
    const int n = 1 + static_cast<int>(rng.below(max_atoms));
    std::vector<bmt::PathMeasure::Atom> atoms;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
        atoms.push_back({0.0, bmt::simulate(sys, random_vector(rng, sys.state_dim(), scale),
                                            random_inputs(rng, T, sys.input_dim(), scale))});
        w.push_back(rng.uniform_pos());
    }
    double total = 0.0;
    for (double x : w) total += x;
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i].weight = w[i] / total;
    return bmt::PathMeasure(std::move(atoms));
}

inline std::vector<Vector> normal_inputs(bmt::SplitMix64& rng, int T, int n_u) {
    std::vector<Vector> u;
    u.reserve(T);
    for (int t = 0; t < T; ++t) {
        Vector v(n_u);
        for (int i = 0; i < n_u; ++i) v[i] = rng.normal();
        u.push_back(std::move(v));
    }
    return u;
}

inline Vector normal_vector(bmt::SplitMix64& rng, int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

/// External data trajectory of length N from seeded standard-normal input
/// and initial state.
template <bmt::SystemModel S>
bmt::ExternalTrajectory external_data(const S& sys, int N, bmt::SplitMix64& rng) {
    return bmt::external_projection(
        bmt::simulate(sys, normal_vector(rng, sys.state_dim()), normal_inputs(rng, N, sys.input_dim())));
}

/// Fresh simulated validation window, stacked.
template <bmt::SystemModel S>
Vector fresh_window(const S& sys, int L, bmt::SplitMix64& rng) {
    return external_data(sys, L, rng).stacked();
}

/// Matrix rank by plain Gaussian elimination with partial pivoting;
/// independent of the SVD-based ranks in the library.
inline int rank_oracle(Matrix m, double tol = 1e-9) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    int rank = 0;
    for (Eigen::Index col = 0; col < m.cols() && rank < m.rows(); ++col) {
        Eigen::Index pivot = rank;
        for (Eigen::Index r = rank + 1; r < m.rows(); ++r)
            if (std::fabs(m(r, col)) > std::fabs(m(pivot, col))) pivot = r;
        if (std::fabs(m(pivot, col)) <= tol * scale) continue;
        m.row(pivot).swap(m.row(rank));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (r != rank) m.row(r) -= (m(r, col) / m(rank, col)) * m.row(rank);
        ++rank;
    }
    return rank;
}

/// Naive monomial evaluation by repeated multiplication.
inline double naive_monomial(const std::vector<int>& exps, const Vector& z) {
    double out = 1.0;
    for (int i = 0; i < z.size(); ++i)
        for (int k = 0; k < exps[i]; ++k) out *= z[i];
    return out;
}

/// Exhaustive minimum over all deterministic Markov policies (A^(T*S) of
/// them); the brute-force optimality oracle for the occupation LP.
inline double brute_force_policy_minimum(const bmt::FiniteOcp& ocp) {
    const int S = ocp.num_states(), A = ocp.num_inputs(), T = ocp.horizon;
    const long long cells = static_cast<long long>(T) * S;
    long long total = 1;
    for (long long i = 0; i < cells; ++i) {
        total *= A;
        if (total > 2000000) throw std::runtime_error("policy oracle: instance too large");
    }
    std::vector<std::vector<int>> policy(T, std::vector<int>(S, 0));
    double best = std::numeric_limits<double>::infinity();
    for (long long code = 0; code < total; ++code) {
        long long rem = code;
        for (int t = 0; t < T; ++t)
            for (int x = 0; x < S; ++x) {
                policy[t][x] = static_cast<int>(rem % A);
                rem /= A;
            }
        best = std::min(best, bmt::policy_rollout_cost(ocp, policy));
    }
    return best;
}

/// Random small FiniteOcp with arbitrary transition tables and costs.
inline bmt::FiniteOcp random_ocp(bmt::SplitMix64& rng, int max_states = 12, int max_inputs = 4,
                                 int max_horizon = 4) {
    bmt::FiniteOcp ocp;
    const int S = 2 + static_cast<int>(rng.below(max_states - 1));
    const int A = 1 + static_cast<int>(rng.below(max_inputs));
    ocp.horizon = 1 + static_cast<int>(rng.below(max_horizon));
    for (int x = 0; x < S; ++x) ocp.state_points.push_back(Vector::Constant(1, double(x)));
    for (int u = 0; u < A; ++u) ocp.input_points.push_back(Vector::Constant(1, double(u)));
    ocp.next.assign(S, std::vector<int>(A, 0));
    ocp.stage_cost.assign(S, std::vector<double>(A, 0.0));
    ocp.terminal_cost.assign(S, 0.0);
    for (int x = 0; x < S; ++x) {
        for (int u = 0; u < A; ++u) {
            ocp.next[x][u] = static_cast<int>(rng.below(S));
            ocp.stage_cost[x][u] = rng.uniform(-1.0, 2.0);
        }
        ocp.terminal_cost[x] = rng.uniform(-1.0, 2.0);
    }
    ocp.rho0 = Vector::Zero(S);
    if (rng.below(2) == 0) {
        ocp.rho0[rng.below(S)] = 1.0;
    } else {
        double total = 0.0;
        for (int x = 0; x < S; ++x) {
            ocp.rho0[x] = rng.uniform_pos();
            total += ocp.rho0[x];
        }
        ocp.rho0 /= total;
    }
    return ocp;
}

}  // namespace test
