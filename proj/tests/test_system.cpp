#include <catch2/catch_amalgamated.hpp>

#include "bmt/reference_systems.hpp"
#include "bmt/system.hpp"
#include "helpers.hpp"

using namespace bmt;
using Catch::Approx;

TEST_CASE("simulate: zero input on the LTI validation system stays at zero") {
    const LtiSystem sys = lti_validation_system();
    const auto traj = simulate(sys, Vector::Zero(2), std::vector<Vector>(10, Vector::Zero(1)));
    for (const auto& x : traj.states) REQUIRE(x.norm() == 0.0);
    for (const auto& y : traj.outputs) REQUIRE(y.norm() == 0.0);
    REQUIRE(traj.horizon() == 10);
}

TEST_CASE("simulate: nonlinear benchmark step matches hand arithmetic") {
    const PolynomialSystem sys = nonlinear_control_system();
    Vector x0(2);
    x0 << 0.9, 0.4;
    const auto traj = simulate(sys, x0, {Vector::Constant(1, -1.0)});
    // 0.9 + 0.4*0.4 - 0.2 and 0.8*0.4 - 1 - 0.3*0.81, worked by hand
    REQUIRE(traj.states[1][0] == Approx(0.86).margin(1e-12));
    REQUIRE(traj.states[1][1] == Approx(-0.923).margin(1e-12));
}

TEST_CASE("simulate + cost_eval reproduce the benchmark optimum 3.8570") {
    const PolynomialSystem sys = nonlinear_control_system();
    Vector x0(2);
    x0 << 0.9, 0.4;
    const auto traj = simulate(sys, x0, {Vector::Constant(1, -1.0), Vector::Constant(1, 0.691)});
    Matrix Q = test::diag2(1.0, 0.5), Qf = test::diag2(4.0, 2.0);
    const double J = cost_eval(traj, Q, 0.05, Qf);
    REQUIRE(J == Approx(3.8570).margin(5e-4));
}

TEST_CASE("cost_eval: trivial cases") {
    const LtiSystem sys = lti_validation_system();
    const auto zero = simulate(sys, Vector::Zero(2), std::vector<Vector>(3, Vector::Zero(1)));
    REQUIRE(cost_eval(zero, Matrix::Identity(2, 2), 0.05, Matrix::Identity(2, 2)) == 0.0);

    Trajectory traj;
    traj.states = {(Vector(2) << 1.0, 0.0).finished(), Vector::Zero(2)};
    traj.inputs = {Vector::Zero(1)};
    traj.outputs = {Vector::Zero(1)};
    const double J =
        cost_eval(traj, test::diag2(1.0, 0.5), 0.05, test::diag2(4.0, 2.0));
    REQUIRE(J == Approx(1.0).margin(1e-15));

    Matrix bad = Matrix::Identity(3, 3);
    REQUIRE_THROWS_AS(cost_eval(traj, bad, 0.05, bad), std::invalid_argument);
}

TEST_CASE("graph_residual: simulated paths are exactly on the graph") {
    const PolynomialSystem sys = nonlinear_control_system();
    Vector x0(2);
    x0 << 0.9, 0.4;
    auto traj = simulate(sys, x0, {Vector::Constant(1, -1.0)});
    const double base = graph_residual(sys, traj);
    REQUIRE(base <= 1e-24);

    // Perturbing the terminal state adds exactly the squared perturbation.
    traj.states[1][0] += 0.5;
    REQUIRE(graph_residual(sys, traj) == Approx(base + 0.25).margin(1e-12));
}

TEST_CASE("graph_residual: scalar integrator example") {
    // x+ = x + u with a zero output channel; x = (0, 1), u = (0).
    Matrix one = Matrix::Constant(1, 1, 1.0), zero = Matrix::Constant(1, 1, 0.0);
    const LtiSystem sys(one, one, zero, zero);
    Trajectory traj;
    traj.states = {Vector::Zero(1), Vector::Constant(1, 1.0)};
    traj.inputs = {Vector::Zero(1)};
    traj.outputs = {Vector::Zero(1)};
    REQUIRE(graph_residual(sys, traj) == Approx(1.0).margin(1e-15));
}

TEST_CASE("external_projection: window holds (u_t, y_t)") {
    Trajectory traj;
    traj.states = {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)};
    traj.inputs = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
    traj.outputs = {Vector::Constant(1, 3.0), Vector::Constant(1, 4.0)};
    const auto ext = external_projection(traj);
    REQUIRE(ext.length() == 2);
    REQUIRE(ext.input_dim == 1);
    REQUIRE(ext.window[0][0] == 1.0);
    REQUIRE(ext.window[0][1] == 3.0);
    REQUIRE(ext.window[1][0] == 2.0);
    REQUIRE(ext.window[1][1] == 4.0);
    const Vector stacked = ext.stacked();
    REQUIRE(stacked.size() == 4);
    REQUIRE(stacked[2] == 2.0);
}

TEST_CASE("property: simulate output always has zero graph residual") {
    SplitMix64 rng(777);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n_x = 1 + static_cast<int>(rng.below(3));
        const int n_u = 1 + static_cast<int>(rng.below(2));
        const int n_y = 1 + static_cast<int>(rng.below(2));
        const int T = 1 + static_cast<int>(rng.below(5));
        Trajectory traj;
        double scale = 1.0;
        if (trial % 2 == 0) {
            const auto sys = test::random_lti(rng, n_x, n_u, n_y);
            traj = simulate(sys, test::random_vector(rng, n_x), test::random_inputs(rng, T, n_u));
            scale = 1.0 + test::traj_scale(traj);
            REQUIRE(graph_residual(sys, traj) <= 1e-18 * scale);
        } else {
            const auto sys = test::random_poly(rng, n_x, n_u, n_y);
            traj = simulate(sys, test::random_vector(rng, n_x), test::random_inputs(rng, T, n_u));
            scale = 1.0 + test::traj_scale(traj);
            REQUIRE(graph_residual(sys, traj) <= 1e-18 * scale);
        }
    }
}

TEST_CASE("property: LTI superposition") {
    SplitMix64 rng(991);
    for (int trial = 0; trial < 100; ++trial) {
        const auto sys = test::random_lti(rng, 2, 1, 1);
        const Vector xa = test::random_vector(rng, 2), xb = test::random_vector(rng, 2);
        const auto ua = test::random_inputs(rng, 4, 1), ub = test::random_inputs(rng, 4, 1);
        std::vector<Vector> usum;
        for (int t = 0; t < 4; ++t) usum.push_back(ua[t] + ub[t]);
        const auto ta = simulate(sys, xa, ua), tb = simulate(sys, xb, ub);
        const auto tsum = simulate(sys, xa + xb, usum);
        for (int t = 0; t <= 4; ++t)
            REQUIRE((tsum.states[t] - ta.states[t] - tb.states[t]).norm() <= 1e-12);
        for (int t = 0; t < 4; ++t)
            REQUIRE((tsum.outputs[t] - ta.outputs[t] - tb.outputs[t]).norm() <= 1e-12);
    }
}

TEST_CASE("property: polynomial evaluation is exact on integer inputs") {
    SplitMix64 rng(5150);
    for (int trial = 0; trial < 200; ++trial) {
        const auto sys = test::random_poly_integer(rng, 2, 1);
        Vector x(2), u(1);
        x << double(int(rng.below(7)) - 3), double(int(rng.below(7)) - 3);
        u << double(int(rng.below(7)) - 3);
        const Vector fx = sys.f(x, u);
        Vector z(3);
        z << x, u;
        for (int c = 0; c < 2; ++c) {
            double expected = 0.0;
            for (const auto& term : sys.f_coeffs[c])
                expected += term.coef * test::naive_monomial(term.exps, z);
            REQUIRE(fx[c] == expected);
        }
    }
}

TEST_CASE("bounds_violation reports box excursions without clipping") {
    PolynomialSystem sys = poly_example_system();
    Vector x0 = Vector::Constant(1, 0.5);
    auto traj = simulate(sys, x0, {Vector::Constant(1, 0.3)});
    REQUIRE(bounds_violation(sys, traj) == 0.0);
    auto wild = simulate(sys, Vector::Constant(1, 0.9), {Vector::Constant(1, 0.9)});
    // x1 = 0.81 + 0.9 = 1.71 leaves the unit box by 0.71; state is reported,
    // not clamped.
    REQUIRE(wild.states[1][0] == Approx(1.71).margin(1e-12));
    REQUIRE(bounds_violation(sys, wild) == Approx(0.71).margin(1e-12));
}

TEST_CASE("dimension errors") {
    const LtiSystem sys = lti_validation_system();
    REQUIRE_THROWS_AS(simulate(sys, Vector::Zero(3), {Vector::Zero(1)}), std::invalid_argument);
    REQUIRE_THROWS_AS(simulate(sys, Vector::Zero(2), {Vector::Zero(2)}), std::invalid_argument);
    REQUIRE_THROWS_AS(simulate(sys, Vector::Zero(2), std::vector<Vector>{}), std::invalid_argument);
    REQUIRE_THROWS_AS(LtiSystem(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Zero(1, 2),
                                Matrix::Zero(1, 1)),
                      std::invalid_argument);
}
