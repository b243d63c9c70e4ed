#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bmt/exact_sum.hpp"
#include "bmt/measure.hpp"
#include "bmt/simplex.hpp"
#include "bmt/system.hpp"

namespace bmt {

/// Uniform rectangular lattice over a box, row-major with the last
/// dimension fastest.
struct Grid {
    std::vector<double> lo, hi;
    std::vector<int> counts;

    Grid(std::vector<double> lo_, std::vector<double> hi_, std::vector<int> counts_)
        : lo(std::move(lo_)), hi(std::move(hi_)), counts(std::move(counts_)) {
        if (lo.empty() || lo.size() != hi.size() || lo.size() != counts.size())
            throw std::invalid_argument("grid: inconsistent specs");
        for (std::size_t d = 0; d < lo.size(); ++d) {
            if (counts[d] < 2) throw std::invalid_argument("grid: counts must be >= 2");
            if (!(lo[d] < hi[d]) || !std::isfinite(lo[d]) || !std::isfinite(hi[d]))
                throw std::invalid_argument("grid: need finite lo < hi");
        }
    }

    int dims() const { return static_cast<int>(lo.size()); }

    int size() const {
        int s = 1;
        for (int c : counts) s *= c;
        return s;
    }

    double coord(int dim, int k) const {
        return lo[dim] + k * (hi[dim] - lo[dim]) / (counts[dim] - 1);
    }

    Vector point(int flat) const {
        Vector p(dims());
        for (int d = dims() - 1; d >= 0; --d) {
            p[d] = coord(d, flat % counts[d]);
            flat /= counts[d];
        }
        return p;
    }

    /// Index of the lattice point nearest to x (after clamping to the box),
    /// ties resolved toward the lower index.
    int nearest(const Vector& x) const {
        if (x.size() != dims()) throw std::invalid_argument("grid: dimension mismatch");
        int flat = 0;
        for (int d = 0; d < dims(); ++d) {
            const double xc = std::clamp(x[d], lo[d], hi[d]);
            const double h = (hi[d] - lo[d]) / (counts[d] - 1);
            int k = static_cast<int>(std::floor((xc - lo[d]) / h));
            k = std::clamp(k, 0, counts[d] - 2);
            const double d_lo = std::fabs(xc - coord(d, k));
            const double d_hi = std::fabs(xc - coord(d, k + 1));
            if (d_hi < d_lo) ++k;
            flat = flat * counts[d] + k;
        }
        return flat;
    }

    std::vector<Vector> points() const {
        std::vector<Vector> out;
        out.reserve(size());
        for (int i = 0; i < size(); ++i) out.push_back(point(i));
        return out;
    }
};

/// Initial-state law specification for discretize().
struct InitialLaw {
    enum class Kind { Dirac, UniformBox, Weights } kind;
    Vector x0, box_lo, box_hi, weights;

    static InitialLaw dirac(Vector x) {
        InitialLaw l{Kind::Dirac, {}, {}, {}, {}};
        l.x0 = std::move(x);
        return l;
    }
    static InitialLaw uniform_box(Vector lo, Vector hi) {
        InitialLaw l{Kind::UniformBox, {}, {}, {}, {}};
        l.box_lo = std::move(lo);
        l.box_hi = std::move(hi);
        return l;
    }
    static InitialLaw from_weights(Vector w) {
        InitialLaw l{Kind::Weights, {}, {}, {}, {}};
        l.weights = std::move(w);
        return l;
    }
};

/// Finite deterministic optimal-control instance on state/input lattices.
/// Transitions map to the grid point nearest f(x, u); out-of-box images are
/// clamped first, so the table is total. The discretized system is itself an
/// exact finite system: duality and policy results hold on it exactly, and
/// discretization error only enters when comparing against the continuous
/// instance.
struct FiniteOcp {
    std::vector<Vector> state_points;
    std::vector<Vector> input_points;
    std::vector<std::vector<int>> next;         // [state][input] -> state index
    std::vector<std::vector<double>> stage_cost;  // [state][input]
    std::vector<double> terminal_cost;          // [state]
    int horizon = 0;
    Vector rho0;
    Vector initial_mean;  // mean of the specified initial law (pre-snap)

    int num_states() const { return static_cast<int>(state_points.size()); }
    int num_inputs() const { return static_cast<int>(input_points.size()); }

    void validate() const {
        const int S = num_states(), A = num_inputs();
        if (S < 1 || A < 1 || horizon < 1) throw std::invalid_argument("ocp: empty instance");
        if (static_cast<int>(next.size()) != S || static_cast<int>(stage_cost.size()) != S ||
            static_cast<int>(terminal_cost.size()) != S || rho0.size() != S)
            throw std::invalid_argument("ocp: table sizes");
        for (int x = 0; x < S; ++x) {
            if (static_cast<int>(next[x].size()) != A || static_cast<int>(stage_cost[x].size()) != A)
                throw std::invalid_argument("ocp: table sizes");
            for (int u = 0; u < A; ++u)
                if (next[x][u] < 0 || next[x][u] >= S)
                    throw std::invalid_argument("ocp: next index out of range");
        }
        ExactSum mass;
        for (int x = 0; x < S; ++x) {
            if (!(rho0[x] >= 0.0)) throw std::invalid_argument("ocp: rho0 negative");
            mass.add(rho0[x]);
        }
        if (std::fabs(mass.value() - 1.0) > kWeightTol)
            throw std::invalid_argument("ocp: rho0 must sum to 1");
    }
};

/// Tabulates a system on the given grids with quad-cost callables.
template <SystemModel S, class StageCost, class TerminalCost>
FiniteOcp discretize(const S& sys, const Grid& x_grid, const Grid& u_grid, StageCost&& ell,
                     TerminalCost&& phi, int horizon, const InitialLaw& law) {
    if (x_grid.dims() != sys.state_dim() || u_grid.dims() != sys.input_dim())
        throw std::invalid_argument("discretize: grid dimensions must match the system");
    FiniteOcp ocp;
    ocp.horizon = horizon;
    ocp.state_points = x_grid.points();
    ocp.input_points = u_grid.points();
    const int Sn = static_cast<int>(ocp.state_points.size());
    const int An = static_cast<int>(ocp.input_points.size());
    ocp.next.assign(Sn, std::vector<int>(An, 0));
    ocp.stage_cost.assign(Sn, std::vector<double>(An, 0.0));
    ocp.terminal_cost.assign(Sn, 0.0);
    for (int x = 0; x < Sn; ++x) {
        for (int u = 0; u < An; ++u) {
            ocp.next[x][u] = x_grid.nearest(sys.f(ocp.state_points[x], ocp.input_points[u]));
            ocp.stage_cost[x][u] = ell(ocp.state_points[x], ocp.input_points[u]);
        }
        ocp.terminal_cost[x] = phi(ocp.state_points[x]);
    }
    ocp.rho0 = Vector::Zero(Sn);
    switch (law.kind) {
        case InitialLaw::Kind::Dirac:
            ocp.rho0[x_grid.nearest(law.x0)] = 1.0;
            ocp.initial_mean = law.x0;
            break;
        case InitialLaw::Kind::UniformBox: {
            // A hair of slack so lattice points that should sit exactly on the
            // box boundary are not lost to rounding of the lattice coords.
            std::vector<int> inside;
            for (int x = 0; x < Sn; ++x) {
                bool in = true;
                for (int d = 0; d < x_grid.dims(); ++d) {
                    const double tol = 1e-9 * std::max(1.0, x_grid.hi[d] - x_grid.lo[d]);
                    if (ocp.state_points[x][d] < law.box_lo[d] - tol ||
                        ocp.state_points[x][d] > law.box_hi[d] + tol)
                        in = false;
                }
                if (in) inside.push_back(x);
            }
            if (inside.empty())
                throw std::invalid_argument("discretize: rho0 box contains no grid points");
            for (int x : inside) ocp.rho0[x] = 1.0 / inside.size();
            ocp.initial_mean = 0.5 * (law.box_lo + law.box_hi);
            break;
        }
        case InitialLaw::Kind::Weights:
            if (law.weights.size() != Sn)
                throw std::invalid_argument("discretize: rho0 weight vector size");
            ocp.rho0 = law.weights;
            break;
    }
    ocp.validate();
    return ocp;
}

/// Bellman value functions and lowest-index greedy selectors.
struct ValueTables {
    std::vector<Vector> V;                 // T+1 vectors over states
    std::vector<std::vector<int>> greedy;  // T x S argmin input indices
};

inline ValueTables bellman_solve(const FiniteOcp& ocp) {
    ocp.validate();
    const int Sn = ocp.num_states(), An = ocp.num_inputs(), T = ocp.horizon;
    ValueTables vt;
    vt.V.assign(T + 1, Vector::Zero(Sn));
    vt.greedy.assign(T, std::vector<int>(Sn, 0));
    for (int x = 0; x < Sn; ++x) vt.V[T][x] = ocp.terminal_cost[x];
    for (int t = T - 1; t >= 0; --t) {
        for (int x = 0; x < Sn; ++x) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int u = 0; u < An; ++u) {
                const double q = ocp.stage_cost[x][u] + vt.V[t + 1][ocp.next[x][u]];
                if (q < best) {
                    best = q;
                    arg = u;
                }
            }
            vt.V[t][x] = best;
            vt.greedy[t][x] = arg;
        }
    }
    return vt;
}

/// Occupation LP in standard form. Variables are lambda_t(x, u) for
/// t = 0..T-1 (t-major, then state, then input) followed by rho_T(x);
/// rho_t for t < T is eliminated by substitution. Rows are the flow
/// constraints, stage blocks of S rows each for t = 0..T.
inline SparseLp assemble_lp(const FiniteOcp& ocp) {
    ocp.validate();
    const int Sn = ocp.num_states(), An = ocp.num_inputs(), T = ocp.horizon;
    SparseLp lp = SparseLp::create((T + 1) * Sn, T * Sn * An + Sn);
    for (int t = 0; t < T; ++t)
        for (int x = 0; x < Sn; ++x)
            for (int u = 0; u < An; ++u) {
                const int col = (t * Sn + x) * An + u;
                lp.add_entry(t * Sn + x, col, 1.0);
                lp.add_entry((t + 1) * Sn + ocp.next[x][u], col, -1.0);
                lp.c[col] = ocp.stage_cost[x][u];
            }
    for (int x = 0; x < Sn; ++x) {
        const int col = T * Sn * An + x;
        lp.add_entry(T * Sn + x, col, 1.0);
        lp.c[col] = ocp.terminal_cost[x];
    }
    for (int x = 0; x < Sn; ++x) lp.b[x] = ocp.rho0[x];
    return lp;
}

/// Feasible starting basis from the all-lowest-input policy: one basic
/// lambda_t(x, u_0) per stage-state row plus the rho_T block. Triangular in
/// stage order, hence nonsingular, and feasible because it is a policy flow.
inline std::vector<int> policy_crash_basis(const FiniteOcp& ocp) {
    const int Sn = ocp.num_states(), An = ocp.num_inputs(), T = ocp.horizon;
    std::vector<int> basis;
    basis.reserve((T + 1) * Sn);
    for (int t = 0; t < T; ++t)
        for (int x = 0; x < Sn; ++x) basis.push_back((t * Sn + x) * An);
    for (int x = 0; x < Sn; ++x) basis.push_back(T * Sn * An + x);
    return basis;
}

/// Primal occupation solution in table form.
struct LpSolution {
    std::vector<Matrix> lambda;  // T matrices, S x A
    std::vector<Vector> rho;     // T+1 state marginals
    double objective = 0.0;
    Vector duals;                // one per flow row; 0 on presolved-away rows
    std::vector<int> basis;
    long iterations = 0;
};

inline LpSolution lp_solve(const FiniteOcp& ocp, SimplexOptions opts = {}) {
    const int Sn = ocp.num_states(), An = ocp.num_inputs(), T = ocp.horizon;
    const SparseLp lp = assemble_lp(ocp);
    if (opts.initial_basis.empty()) opts.initial_basis = policy_crash_basis(ocp);
    const SimplexSolution raw = solve_lp(lp, opts);
    LpSolution sol;
    sol.objective = raw.objective;
    sol.duals = raw.duals;
    sol.basis = raw.basis;
    sol.iterations = raw.iterations;
    sol.lambda.assign(T, Matrix::Zero(Sn, An));
    for (int t = 0; t < T; ++t)
        for (int x = 0; x < Sn; ++x)
            for (int u = 0; u < An; ++u) sol.lambda[t](x, u) = raw.x[(t * Sn + x) * An + u];
    sol.rho.assign(T + 1, Vector::Zero(Sn));
    sol.rho[0] = ocp.rho0;
    for (int t = 1; t < T; ++t)
        for (int x = 0; x < Sn; ++x) sol.rho[t][x] = sol.lambda[t].row(x).sum();
    for (int x = 0; x < Sn; ++x) sol.rho[T][x] = raw.x[T * Sn * An + x];
    return sol;
}

struct DualityReport {
    double p_star = 0.0;  // LP optimum
    double d_star = 0.0;  // sum_x rho0(x) V_0(x)
    double gap = 0.0;
    bool pass = false;
};

/// Strong-duality audit: the LP optimum against the Bellman value
/// integrated over the initial law.
inline DualityReport duality_report(const LpSolution& sol, const ValueTables& vt,
                                    const FiniteOcp& ocp, double rel_tol = 1e-8) {
    DualityReport rep;
    rep.p_star = sol.objective;
    ExactSum d;
    for (int x = 0; x < ocp.num_states(); ++x) d.add(ocp.rho0[x] * vt.V[0][x]);
    rep.d_star = d.value();
    rep.gap = std::fabs(rep.p_star - rep.d_star);
    rep.pass = rep.gap <= rel_tol * (1.0 + std::fabs(rep.p_star));
    return rep;
}

struct PolicyExtraction {
    std::vector<std::vector<int>> policy;  // T x S input index, -1 unvisited
    double max_slack = 0.0;
    int visited = 0;
};

/// Complementary-slackness audit and greedy selector on visited states:
/// every (t, x, u) carrying occupation mass must have zero Bellman slack.
/// A violation above tol means the LP solution is not optimal and throws.
inline PolicyExtraction extract_policy(const LpSolution& sol, const ValueTables& vt,
                                       const FiniteOcp& ocp, double tol = 1e-8) {
    const int Sn = ocp.num_states(), An = ocp.num_inputs(), T = ocp.horizon;
    PolicyExtraction out;
    out.policy.assign(T, std::vector<int>(Sn, -1));
    for (int t = 0; t < T; ++t)
        for (int x = 0; x < Sn; ++x) {
            bool visited = false;
            for (int u = 0; u < An; ++u) {
                if (sol.lambda[t](x, u) <= tol) continue;
                visited = true;
                const double slack =
                    ocp.stage_cost[x][u] + vt.V[t + 1][ocp.next[x][u]] - vt.V[t][x];
                out.max_slack = std::max(out.max_slack, slack);
                if (slack > tol)
                    throw std::runtime_error("extract_policy: complementary slackness violated");
            }
            if (visited) {
                out.policy[t][x] = vt.greedy[t][x];
                ++out.visited;
            }
        }
    return out;
}

/// Expected cost of rolling a complete per-stage policy out of rho0.
inline double policy_rollout_cost(const FiniteOcp& ocp,
                                  const std::vector<std::vector<int>>& policy) {
    const int Sn = ocp.num_states(), T = ocp.horizon;
    Vector mass = ocp.rho0;
    ExactSum cost;
    for (int t = 0; t < T; ++t) {
        Vector pushed = Vector::Zero(Sn);
        for (int x = 0; x < Sn; ++x) {
            if (mass[x] == 0.0) continue;
            const int u = policy[t][x];
            if (u < 0) throw std::invalid_argument("rollout: policy undefined on a visited state");
            cost.add(mass[x] * ocp.stage_cost[x][u]);
            pushed[ocp.next[x][u]] += mass[x];
        }
        mass = pushed;
    }
    for (int x = 0; x < Sn; ++x)
        if (mass[x] != 0.0) cost.add(mass[x] * ocp.terminal_cost[x]);
    return cost.value();
}

struct DistributionalValue {
    double lp_value = 0.0;
    double expected_v0 = 0.0;  // sum_x rho0(x) V0(x)
    Vector v0;                 // per-state V0
    double v0_at_mean = 0.0;   // V0 at the grid point nearest the mean state
    double jensen_gap = 0.0;   // expected_v0 - v0_at_mean, sign preserved
    int mean_state = 0;
};

/// Distributional-initial-law study: LP value under rho0 versus the Bellman
/// value averaged over rho0, plus the value at the mean initial state so the
/// Jensen-type gap is exhibited with its sign.
///
/// The mean anchor is the mean of the law as specified (e.g. the box center
/// before grid projection, kept by discretize); the mean of the projected
/// lattice weights can sit on a cell boundary and flip the snap on rounding
/// noise, so it is only the fallback.
inline DistributionalValue distributional_value(const FiniteOcp& ocp) {
    DistributionalValue out;
    const ValueTables vt = bellman_solve(ocp);
    const LpSolution sol = lp_solve(ocp);
    out.lp_value = sol.objective;
    out.v0 = vt.V[0];
    ExactSum ev;
    for (int x = 0; x < ocp.num_states(); ++x) ev.add(ocp.rho0[x] * vt.V[0][x]);
    out.expected_v0 = ev.value();
    Vector mean = ocp.initial_mean;
    if (mean.size() == 0) {
        mean.resize(ocp.state_points[0].size());
        for (Eigen::Index d = 0; d < mean.size(); ++d) {
            ExactSum coord;
            for (int x = 0; x < ocp.num_states(); ++x)
                coord.add(ocp.rho0[x] * ocp.state_points[x][d]);
            mean[d] = coord.value();
        }
    }
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int x = 0; x < ocp.num_states(); ++x) {
        const double d = (ocp.state_points[x] - mean).norm();
        if (d < best_d) {
            best_d = d;
            best = x;
        }
    }
    out.mean_state = best;
    out.v0_at_mean = vt.V[0][best];
    out.jensen_gap = out.expected_v0 - out.v0_at_mean;
    return out;
}

/// SystemModel view of a FiniteOcp: states and inputs are the lattice
/// vectors, transitions go through the next table. Lets the measure module
/// (occupation marginals, Markov reconstruction) run on finite instances.
class FiniteSystemAdapter {
public:
    explicit FiniteSystemAdapter(const FiniteOcp& ocp) : ocp_(&ocp) {}

    int state_dim() const { return static_cast<int>(ocp_->state_points[0].size()); }
    int input_dim() const { return static_cast<int>(ocp_->input_points[0].size()); }
    int output_dim() const { return 0; }

    Vector f(const Vector& x, const Vector& u) const {
        return ocp_->state_points[ocp_->next[state_index(x)][input_index(u)]];
    }
    Vector h(const Vector&, const Vector&) const { return Vector(0); }

    int state_index(const Vector& x) const {
        for (int i = 0; i < ocp_->num_states(); ++i)
            if ((ocp_->state_points[i].array() == x.array()).all()) return i;
        throw std::invalid_argument("finite adapter: state is not a lattice point");
    }
    int input_index(const Vector& u) const {
        for (int i = 0; i < ocp_->num_inputs(); ++i)
            if ((ocp_->input_points[i].array() == u.array()).all()) return i;
        throw std::invalid_argument("finite adapter: input is not a lattice point");
    }

private:
    const FiniteOcp* ocp_;
};

}  // namespace bmt
