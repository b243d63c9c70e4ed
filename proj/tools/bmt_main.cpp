// Command-line front end: each subcommand wraps one experiment from
// bmt/experiments.hpp. Exit codes: 0 all configured checks pass, 1 a check
// failed, 2 usage or I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "bmt/experiments.hpp"

namespace {

using bmt::experiments::json;
using bmt::experiments::Report;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    double tol_rank = 0.0, tol_membership = 0.0, tol_gap = 0.0;
    bool tol_rank_set = false, tol_membership_set = false, tol_gap_set = false;
};

json load_config(const GlobalArgs& args) {
    json config = json::object();
    if (!args.config_path.empty())
        config = json::parse(bmt::io::read_file(args.config_path));
    if (args.seed_set) config["seed"] = args.seed;
    if (args.tol_rank_set) config["tolerances"]["rank_rtol"] = args.tol_rank;
    if (args.tol_membership_set) config["tolerances"]["membership"] = args.tol_membership;
    if (args.tol_gap_set) config["tolerances"]["gap"] = args.tol_gap;
    return config;
}

int finish(const Report& rep, const GlobalArgs& args) {
    std::filesystem::create_directories(args.out_dir);
    const auto path = std::filesystem::path(args.out_dir) / "report.json";
    bmt::io::write_file(path, rep.doc.dump(2) + "\n");
    std::cout << rep.doc.dump(2) << "\n";
    std::cerr << (rep.pass ? "PASS" : "FAIL") << " (report: " << path.string() << ")\n";
    return rep.pass ? 0 : 1;
}

void add_globals(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--out", args.out_dir, "output directory for reports and CSVs");
    cmd->add_option("--seed", args.seed, "override the config seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--tol-rank", args.tol_rank, "rank threshold (relative)")
        ->each([&](const std::string&) { args.tol_rank_set = true; });
    cmd->add_option("--tol-membership", args.tol_membership, "membership residual tolerance")
        ->each([&](const std::string&) { args.tol_membership_set = true; });
    cmd->add_option("--tol-gap", args.tol_gap, "duality gap tolerance")
        ->each([&](const std::string&) { args.tol_gap_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavioral-measure toolkit"};
    app.require_subcommand(1);

    GlobalArgs args;
    auto* simulate = app.add_subcommand("simulate", "roll a system forward, emit trajectory CSV");
    auto* hankel = app.add_subcommand("hankel-validate", "data-driven validation pipeline");
    auto* ocp = app.add_subcommand("ocp-solve", "grid DP + occupation LP study");
    auto* moments = app.add_subcommand("moments", "scalar graph moment sampling study");
    auto* deepc = app.add_subcommand("deepc", "data-driven trajectory optimization");
    auto* counter = app.add_subcommand("counterexamples", "weak-identity and history counterexamples");
    auto* stochastic = app.add_subcommand("stochastic-check", "kernel-consistency residuals");
    for (auto* cmd : {simulate, hankel, ocp, moments, deepc, counter, stochastic})
        add_globals(cmd, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        const json config = load_config(args);
        const std::filesystem::path base =
            args.config_path.empty() ? std::filesystem::path(".")
                                     : std::filesystem::path(args.config_path).parent_path();
        Report rep;
        if (simulate->parsed())
            rep = bmt::experiments::cmd_simulate(config, args.out_dir);
        else if (hankel->parsed())
            rep = bmt::experiments::cmd_hankel_validate(config, args.out_dir);
        else if (ocp->parsed())
            rep = bmt::experiments::cmd_ocp_solve(config, args.out_dir);
        else if (moments->parsed())
            rep = bmt::experiments::cmd_moments(config, args.out_dir);
        else if (deepc->parsed())
            rep = bmt::experiments::cmd_deepc(config, args.out_dir, base);
        else if (counter->parsed())
            rep = bmt::experiments::cmd_counterexamples(config, args.out_dir);
        else
            rep = bmt::experiments::cmd_stochastic_check(config, args.out_dir, base);
        return finish(rep, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
