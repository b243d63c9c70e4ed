#include <catch2/catch_amalgamated.hpp>

#include "bmt/hankel.hpp"
#include "bmt/reference_systems.hpp"
#include "helpers.hpp"

using namespace bmt;
using Catch::Approx;

namespace {

HankelMatrix paper_hankel(std::uint64_t seed = 2024, int N = 80, int L = 6) {
    SplitMix64 rng(seed);
    return HankelMatrix::from_external(test::external_data(lti_validation_system(), N, rng), L);
}

DiscreteDistribution validation_measure(int count, std::uint64_t seed = 4711, int L = 6) {
    const LtiSystem sys = lti_validation_system();
    SplitMix64 rng(seed);
    std::vector<DiscreteDistribution::Atom> atoms;
    for (int i = 0; i < count; ++i) atoms.push_back({1.0 / count, test::fresh_window(sys, L, rng)});
    return DiscreteDistribution(std::move(atoms));
}

}  // namespace

TEST_CASE("build_hankel: block layout") {
    std::vector<Vector> w = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                             Vector::Constant(1, 3.0)};
    const HankelMatrix h(w, 2);
    REQUIRE(h.matrix().rows() == 2);
    REQUIRE(h.matrix().cols() == 2);
    REQUIRE(h.matrix()(0, 0) == 1.0);
    REQUIRE(h.matrix()(0, 1) == 2.0);
    REQUIRE(h.matrix()(1, 0) == 2.0);
    REQUIRE(h.matrix()(1, 1) == 3.0);

    // L = N gives a single column equal to the full stacked signal.
    const HankelMatrix full(w, 3);
    REQUIRE(full.matrix().cols() == 1);
    REQUIRE(full.matrix()(0, 0) == 1.0);
    REQUIRE(full.matrix()(1, 0) == 2.0);
    REQUIRE(full.matrix()(2, 0) == 3.0);

    REQUIRE_THROWS_AS(HankelMatrix(w, 4), std::invalid_argument);
}

TEST_CASE("paper instance: 12x75 Hankel with numerical rank 8") {
    const HankelMatrix h = paper_hankel();
    REQUIRE(h.matrix().rows() == 12);
    REQUIRE(h.matrix().cols() == 75);
    REQUIRE(h.rank() == 8);

    const auto rep = behavior_rank(h, 2);
    REQUIRE(rep.rank == 8);
    REQUIRE(rep.expected == 8);
    REQUIRE(rep.matches);
    REQUIRE(rep.gap_ratio >= 1e6);

    // Independent elimination-based rank agrees.
    REQUIRE(test::rank_oracle(h.matrix()) == 8);
}

TEST_CASE("hankel SVD artifacts satisfy their invariants") {
    const HankelMatrix h = paper_hankel();
    const Matrix& M = h.matrix();
    const Matrix& P = h.pinv();
    REQUIRE((M * P * M - M).norm() <= 1e-10 * M.norm());
    REQUIRE((P * M * P - P).norm() <= 1e-10 * P.norm());
    REQUIRE((M * P - (M * P).transpose()).norm() <= 1e-10);
    REQUIRE((P * M - (P * M).transpose()).norm() <= 1e-10);
}

TEST_CASE("check_pe: rank condition on the input Hankel") {
    // Constant nonzero input never excites beyond rank one.
    std::vector<Vector> constant(10, Vector::Constant(1, 0.7));
    const auto rep1 = check_pe(constant, 2);
    REQUIRE(rep1.achieved_rank == 1);
    REQUIRE(rep1.required_rank == 2);
    REQUIRE_FALSE(rep1.pass);

    // Period-3 pulse train: order 2 passes, order 4 cannot exceed rank 3.
    std::vector<Vector> pulse;
    for (int t = 0; t < 18; ++t) pulse.push_back(Vector::Constant(1, t % 3 == 0 ? 1.0 : 0.0));
    REQUIRE(check_pe(pulse, 2).pass);
    const auto rep4 = check_pe(pulse, 4);
    REQUIRE_FALSE(rep4.pass);
    REQUIRE(rep4.achieved_rank == 3);
    {
        // Cross-check both ranks by row reduction on the raw Hankels.
        REQUIRE(test::rank_oracle(HankelMatrix(pulse, 2).matrix()) == 2);
        REQUIRE(test::rank_oracle(HankelMatrix(pulse, 4).matrix()) == 3);
    }

    // Seeded standard-normal input of length 80 is PE of order 8.
    SplitMix64 rng(2024);
    const auto u = test::normal_inputs(rng, 80, 1);
    const auto rep8 = check_pe(u, 8);
    REQUIRE(rep8.pass);
    REQUIRE(test::rank_oracle(HankelMatrix(u, 8).matrix()) == 8);

    REQUIRE_THROWS_AS(check_pe(constant, 11), std::invalid_argument);
}

TEST_CASE("behavior_rank: window length one undershoots the behavioral dimension") {
    SplitMix64 rng(5);
    const auto data = test::external_data(lti_validation_system(), 80, rng);
    const HankelMatrix h1 = HankelMatrix::from_external(data, 1);
    const auto rep = behavior_rank(h1, 2);
    REQUIRE(rep.expected == 3);  // 1 * n_u + n_x
    REQUIRE(rep.rank == 2);      // a 2 x 80 matrix cannot reach 3
    REQUIRE_FALSE(rep.matches);
    REQUIRE(test::rank_oracle(h1.matrix()) == 2);

    std::vector<Vector> zeros(12, Vector::Zero(2));
    const HankelMatrix hz(zeros, 3);
    REQUIRE(hz.rank() == 0);
}

TEST_CASE("pinv_lift: membership residuals") {
    const HankelMatrix h = paper_hankel();

    const Vector col0 = h.matrix().col(0);
    const auto lift = pinv_lift(h, col0);
    REQUIRE(lift.residual <= 1e-12 * col0.norm());

    // Fresh simulated window: in the behavior, residual at machine scale.
    SplitMix64 rng(97);
    const Vector w = test::fresh_window(lti_validation_system(), 6, rng);
    REQUIRE(pinv_lift(h, w).residual <= 1e-12 * w.norm());

    // A left-null direction is invisible to the column space.
    const Vector n0 = h.null_directions().col(0);
    const auto miss = pinv_lift(h, n0);
    REQUIRE(miss.residual == Approx(n0.norm()).epsilon(1e-9));
}

TEST_CASE("factorize_measure and pushforward_measure invert each other") {
    const HankelMatrix h = paper_hankel();

    // Dirac on column 0 lifts to the pseudoinverse image.
    const DiscreteDistribution dirac({{1.0, h.matrix().col(0)}});
    const auto nu0 = factorize_measure(h, dirac);
    REQUIRE(nu0.size() == 1);
    REQUIRE((nu0.atoms()[0].point - h.pinv() * h.matrix().col(0)).norm() <= 1e-14);

    // 200 validation atoms: all residuals pass, round-trip is atomwise.
    const auto mu = validation_measure(200);
    const auto nu = factorize_measure(h, mu);
    REQUIRE(nu.size() == 200);
    const auto back = pushforward_measure(h, nu);
    for (int i = 0; i < mu.size(); ++i) {
        REQUIRE(back.atoms()[i].weight == mu.atoms()[i].weight);
        REQUIRE((back.atoms()[i].point - mu.atoms()[i].point).norm() <=
                1e-9 * std::max(1.0, mu.atoms()[i].point.norm()));
    }

    // An off-behavior atom is rejected.
    std::vector<DiscreteDistribution::Atom> bad = {{0.5, h.matrix().col(0)},
                                                   {0.5, h.null_directions().col(0)}};
    REQUIRE_THROWS_AS(factorize_measure(h, DiscreteDistribution(std::move(bad))),
                      std::invalid_argument);
}

TEST_CASE("pushforward_measure: Dirac specializations") {
    const HankelMatrix h = paper_hankel();
    const int k = h.num_columns();

    const CoefficientMeasure delta0({{1.0, Vector::Zero(k)}});
    const auto zero = pushforward_measure(h, delta0);
    REQUIRE(zero.atoms()[0].point.norm() == 0.0);

    const CoefficientMeasure ej({{1.0, Vector::Unit(k, 3)}});
    const auto col3 = pushforward_measure(h, ej);
    REQUIRE((col3.atoms()[0].point - h.matrix().col(3)).norm() == 0.0);

    // Random coefficient atoms always land on the behavior.
    SplitMix64 rng(132);
    std::vector<DiscreteDistribution::Atom> atoms;
    for (int i = 0; i < 10; ++i) atoms.push_back({0.1, test::random_vector(rng, k)});
    const auto pushed = pushforward_measure(h, CoefficientMeasure(std::move(atoms)));
    for (const auto& a : pushed.atoms())
        REQUIRE(pinv_lift(h, a.point).residual <= 1e-9 * std::max(1.0, a.point.norm()));

    REQUIRE_THROWS_AS(pushforward_measure(h, CoefficientMeasure({{1.0, Vector::Zero(3)}})),
                      std::invalid_argument);
}

TEST_CASE("mean_behavior_residual: degree-one bridge") {
    const HankelMatrix h = paper_hankel();

    const DiscreteDistribution dirac({{1.0, h.matrix().col(5)}});
    REQUIRE(mean_behavior_residual(dirac, h) <= 1e-12);

    // 25-trajectory empirical mean stays on the behavior.
    REQUIRE(mean_behavior_residual(validation_measure(25), h) <= 1e-9);

    // A pure null-direction atom keeps its whole norm as residual.
    const Vector n0 = h.null_directions().col(0);
    const DiscreteDistribution off({{1.0, n0}});
    REQUIRE(mean_behavior_residual(off, h) == Approx(n0.norm() / std::max(1.0, n0.norm())).epsilon(1e-9));
}

TEST_CASE("covariance_transfer_residual: second-order transfer") {
    const HankelMatrix h = paper_hankel();

    REQUIRE(covariance_transfer_residual(validation_measure(200), h) <= 1e-9);

    // Symmetric two-atom measure: both covariances are the same rank-1 sheet.
    const Vector c0 = h.matrix().col(0);
    const DiscreteDistribution pm({{0.5, c0}, {0.5, -c0}});
    REQUIRE(covariance_transfer_residual(pm, h) <= 1e-12);

    const DiscreteDistribution dirac({{1.0, c0}});
    REQUIRE(covariance_transfer_residual(dirac, h) == 0.0);
}

TEST_CASE("property: measure-level factorization is a set equality") {
    const HankelMatrix h = paper_hankel();
    const LtiSystem sys = lti_validation_system();
    SplitMix64 rng(990);
    for (int trial = 0; trial < 25; ++trial) {
        // Forward: any coefficient measure pushes onto the behavior.
        std::vector<DiscreteDistribution::Atom> atoms;
        const int n = 1 + static_cast<int>(rng.below(5));
        for (int i = 0; i < n; ++i)
            atoms.push_back({1.0 / n, test::random_vector(rng, h.num_columns())});
        const auto mu = pushforward_measure(h, CoefficientMeasure(std::move(atoms)));
        for (const auto& a : mu.atoms())
            REQUIRE(pinv_lift(h, a.point).residual <= 1e-9 * std::max(1.0, a.point.norm()));

        // Backward: factorize then push forward reproduces the measure even
        // though the lift itself is not unique.
        const auto nu2 = factorize_measure(h, mu);
        const auto mu2 = pushforward_measure(h, nu2);
        for (int i = 0; i < mu.size(); ++i)
            REQUIRE((mu2.atoms()[i].point - mu.atoms()[i].point).norm() <=
                    1e-9 * std::max(1.0, mu.atoms()[i].point.norm()));
    }

    // Mean transfer: mean of the pushforward is H times the mean coefficient.
    SplitMix64 rng2(991);
    std::vector<DiscreteDistribution::Atom> atoms;
    for (int i = 0; i < 7; ++i)
        atoms.push_back({1.0 / 7, test::random_vector(rng2, h.num_columns())});
    const CoefficientMeasure nu(std::move(atoms));
    const auto mu = pushforward_measure(h, nu);
    REQUIRE((mu.mean() - h.matrix() * nu.mean()).norm() <= 1e-12);
}

TEST_CASE("property: persistency failure breaks the behavior equality") {
    const LtiSystem sys = lti_validation_system();
    SplitMix64 rng(31337);
    // Constant input: PE fails at order L + n_x.
    std::vector<Vector> u(80, Vector::Constant(1, 0.5));
    const auto traj = simulate(sys, test::normal_vector(rng, 2), u);
    const auto data = external_projection(traj);
    REQUIRE_FALSE(check_pe(u, 8).pass);

    const HankelMatrix h = HankelMatrix::from_external(data, 6);
    REQUIRE(behavior_rank(h, 2).rank < 8);

    // At least one fresh window now fails column-space membership.
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Vector w = test::fresh_window(sys, 6, rng);
        worst = std::max(worst, pinv_lift(h, w).residual / w.norm());
    }
    REQUIRE(worst > 1e-3);
}
