#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "bmt/io.hpp"
#include "bmt/reference_systems.hpp"
#include "helpers.hpp"

using namespace bmt;
using Catch::Approx;

TEST_CASE("trajectory CSV: bitwise round-trip, blank trailing inputs") {
    const LtiSystem sys = lti_validation_system();
    SplitMix64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const auto traj =
            simulate(sys, test::normal_vector(rng, 2), test::normal_inputs(rng, 1 + rng.below(6), 1));
        const std::string csv = io::trajectory_csv(traj);
        const Trajectory back = io::parse_trajectory_csv(csv);
        REQUIRE(back.horizon() == traj.horizon());
        for (int t = 0; t <= traj.horizon(); ++t)
            REQUIRE((back.states[t] - traj.states[t]).norm() == 0.0);
        for (int t = 0; t < traj.horizon(); ++t) {
            REQUIRE((back.inputs[t] - traj.inputs[t]).norm() == 0.0);
            REQUIRE((back.outputs[t] - traj.outputs[t]).norm() == 0.0);
        }
    }

    // The final row carries states only.
    Trajectory t;
    t.states = {Vector::Constant(1, 0.5), Vector::Constant(1, -2.0)};
    t.inputs = {Vector::Constant(1, 3.0)};
    t.outputs = {Vector::Constant(1, 7.0)};
    const std::string csv = io::trajectory_csv(t);
    REQUIRE(csv.find("t,x1,u1,y1\n") == 0);
    REQUIRE(csv.find("1,-2,,\n") != std::string::npos);

    // Output-free polynomial trajectories survive the round trip.
    const PolynomialSystem poly = poly_example_system();
    const auto pt = simulate(poly, Vector::Constant(1, 0.3), {Vector::Constant(1, 0.2)});
    const Trajectory pback = io::parse_trajectory_csv(io::trajectory_csv(pt));
    REQUIRE(pback.output_dim() == 0);
    REQUIRE((pback.states[1] - pt.states[1]).norm() == 0.0);

    REQUIRE_THROWS_AS(io::parse_trajectory_csv(""), std::invalid_argument);
    REQUIRE_THROWS_AS(io::parse_trajectory_csv("t,x1\n0,1,2\n"), std::invalid_argument);
}

TEST_CASE("matrix CSV: header and round-trip") {
    SplitMix64 rng(42);
    const Matrix m = test::random_matrix(rng, 4, 3, 5.0);
    const std::string csv = io::matrix_csv(m);
    REQUIRE(csv.find("4,3\n") == 0);
    const Matrix back = io::parse_matrix_csv(csv);
    REQUIRE((back - m).norm() == 0.0);
    REQUIRE_THROWS_AS(io::parse_matrix_csv("2,2\n1,2\n"), std::invalid_argument);
}

TEST_CASE("value list and cloud CSV round-trips") {
    std::vector<double> vals = {1.0, -0.25, 3.5e-17, 123456.789};
    REQUIRE(io::parse_value_list_csv(io::value_list_csv(vals)) == vals);

    std::vector<std::array<double, 2>> cloud = {{0.1, -0.2}, {3.0, 4.0}};
    REQUIRE(io::parse_cloud_csv(io::cloud_csv(cloud)) == cloud);
}

TEST_CASE("moment table CSV round-trip") {
    const PolynomialSystem sys = poly_example_system();
    SplitMix64 rng(43);
    const PathMeasure mu = sample_boxed_measure(sys, 6, rng);
    const MomentTable table = mixed_moments(mu, 0, 3);
    const MomentTable back = io::parse_moment_table_csv(io::moment_table_csv(table));
    REQUIRE(back.size() == table.size());
    for (const auto& [key, value] : table) REQUIRE(back.at(key) == value);
}

TEST_CASE("system JSON: kind-tagged round-trips") {
    const LtiSystem lti = lti_validation_system();
    const io::json jl = io::lti_to_json(lti);
    REQUIRE(jl.at("kind") == "lti");
    const LtiSystem lback = io::lti_from_json(jl);
    REQUIRE((lback.A - lti.A).norm() == 0.0);
    REQUIRE((lback.D - lti.D).norm() == 0.0);

    PolynomialSystem poly = nonlinear_control_system();
    poly.x_bounds = {{-1.5, 1.5}, {-1.5, 1.5}};
    const io::json jp = io::poly_to_json(poly);
    REQUIRE(jp.at("kind") == "poly");
    const PolynomialSystem pback = io::poly_from_json(jp);
    REQUIRE(pback.n_x == 2);
    REQUIRE(pback.f_coeffs[1].size() == poly.f_coeffs[1].size());
    REQUIRE(pback.x_bounds.size() == 2);
    REQUIRE(pback.u_bounds.size() == 1);
    SplitMix64 rng(44);
    for (int i = 0; i < 10; ++i) {
        const Vector x = test::random_vector(rng, 2), u = test::random_vector(rng, 1);
        REQUIRE((pback.f(x, u) - poly.f(x, u)).norm() == 0.0);
    }
}

TEST_CASE("path measure JSON: inline and file-referenced trajectories") {
    const LtiSystem sys = lti_validation_system();
    SplitMix64 rng(45);
    const PathMeasure mu = test::random_behavioral_measure(sys, rng, 2, 4);
    const io::json j = io::path_measure_to_json(mu);
    REQUIRE(j.at("T") == 2);
    const PathMeasure back = io::path_measure_from_json(j);
    REQUIRE(back.size() == mu.size());
    for (int i = 0; i < mu.size(); ++i) {
        REQUIRE(back.atoms()[i].weight == mu.atoms()[i].weight);
        REQUIRE((back.atoms()[i].traj.states[2] - mu.atoms()[i].traj.states[2]).norm() == 0.0);
    }

    // File reference, resolved against a base directory.
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bmt_io_test";
    fs::create_directories(dir);
    io::write_file(dir / "traj.csv", io::trajectory_csv(mu.atoms()[0].traj));
    io::json jf;
    jf["T"] = mu.horizon();
    jf["atoms"] = io::json::array();
    jf["atoms"].push_back({{"w", 1.0}, {"traj", {{"file", "traj.csv"}}}});
    const PathMeasure from_file = io::path_measure_from_json(jf, dir);
    REQUIRE(from_file.size() == 1);
    REQUIRE((from_file.atoms()[0].traj.states[1] - mu.atoms()[0].traj.states[1]).norm() == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("stochastic JSON round-trips") {
    const auto [kernels, measure] = history_counterexample();
    const FiniteKernel kback = io::kernel_from_json(io::kernel_to_json(kernels));
    REQUIRE(kback.stages() == 2);
    REQUIRE(kback.row(0, 1, 0) == kernels.row(0, 1, 0));

    const FinitePathMeasure mback =
        io::finite_path_measure_from_json(io::finite_path_measure_to_json(measure));
    REQUIRE(mback.atoms().size() == 4);
    REQUIRE(history_kernel_residual(mback, kback) == 0.5);
    REQUIRE(onestep_kernel_residual(mback, kback) == 0.0);
}
