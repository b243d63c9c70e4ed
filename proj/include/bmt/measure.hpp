#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bmt/exact_sum.hpp"
#include "bmt/rng.hpp"
#include "bmt/system.hpp"

namespace bmt {

inline constexpr double kWeightTol = 1e-12;  // normalization tolerance for measures

namespace detail {

inline void check_weights(const std::vector<double>& w, const char* what) {
    if (w.empty()) throw std::invalid_argument(std::string(what) + ": empty measure");
    ExactSum total;
    for (double wi : w) {
        if (!(wi >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative weight");
        total.add(wi);
    }
    if (std::fabs(total.value() - 1.0) > kWeightTol)
        throw std::invalid_argument(std::string(what) + ": weights must sum to 1");
}

inline void renormalize(std::vector<double>& w) {
    ExactSum total;
    for (double wi : w) total.add(wi);
    const double s = total.value();
    if (s != 1.0)
        for (double& wi : w) wi /= s;
}

/// All exponent vectors over `dim` variables with min_deg <= total <= max_deg,
/// in a fixed deterministic order.
inline std::vector<std::vector<int>> multi_indices(int dim, int max_deg, int min_deg = 1) {
    std::vector<std::vector<int>> out;
    if (dim == 0) {
        if (min_deg <= 0) out.push_back({});
        return out;
    }
    std::vector<int> cur(dim, 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == dim - 1) {
            for (int d = 0; d <= remaining; ++d) {
                cur[pos] = d;
                int total = 0;
                for (int v : cur) total += v;
                if (total >= min_deg) out.push_back(cur);
            }
            cur[pos] = 0;
            return;
        }
        for (int d = 0; d <= remaining; ++d) {
            cur[pos] = d;
            self(self, pos + 1, remaining - d);
        }
        cur[pos] = 0;
    };
    rec(rec, 0, max_deg);
    return out;
}

inline double monomial(const std::vector<int>& exps, const Vector& z) {
    double m = 1.0;
    for (int i = 0; i < z.size(); ++i) m *= pow_int(z[i], exps[i]);
    return m;
}

}  // namespace detail

/// Finite-support distribution on R^d: a list of (weight, point) atoms.
class DiscreteDistribution {
public:
    struct Atom {
        double weight;
        Vector point;
    };

    explicit DiscreteDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw std::invalid_argument("distribution: empty measure");
        for (const auto& a : atoms_)
            if (a.point.size() != atoms_[0].point.size())
                throw std::invalid_argument("distribution: mixed point dimensions");
        std::vector<double> w(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i) w[i] = atoms_[i].weight;
        detail::check_weights(w, "distribution");
        detail::renormalize(w);
        for (std::size_t i = 0; i < atoms_.size(); ++i) atoms_[i].weight = w[i];
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    int dim() const { return static_cast<int>(atoms_[0].point.size()); }
    int size() const { return static_cast<int>(atoms_.size()); }

    /// Merges atoms at bitwise-identical points by summing their weights.
    DiscreteDistribution merged() const {
        std::vector<Atom> out;
        for (const auto& a : atoms_) {
            bool found = false;
            for (auto& b : out)
                if (b.point.size() == a.point.size() && (b.point.array() == a.point.array()).all()) {
                    b.weight += a.weight;
                    found = true;
                    break;
                }
            if (!found) out.push_back(a);
        }
        return DiscreteDistribution(std::move(out));
    }

    /// Exactly accumulated expectation of an arbitrary functional.
    template <class F>
    double expect(F&& fn) const {
        ExactSum s;
        for (const auto& a : atoms_) s.add(a.weight * fn(a.point));
        return s.value();
    }

    Vector mean() const {
        Vector m = Vector::Zero(dim());
        for (int i = 0; i < dim(); ++i) {
            ExactSum s;
            for (const auto& a : atoms_) s.add(a.weight * a.point[i]);
            m[i] = s.value();
        }
        return m;
    }

private:
    std::vector<Atom> atoms_;
};

/// A coefficient-space distribution nu on R^{N-L+1}; same finite-support
/// representation, named for its role in the Hankel factorization.
using CoefficientMeasure = DiscreteDistribution;

/// Finite-support probability measure on trajectory space.
class PathMeasure {
public:
    struct Atom {
        double weight;
        Trajectory traj;
    };

    explicit PathMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw std::invalid_argument("path measure: empty measure");
        const auto& ref = atoms_[0].traj;
        ref.validate();
        for (const auto& a : atoms_) {
            a.traj.validate();
            if (a.traj.horizon() != ref.horizon() || a.traj.state_dim() != ref.state_dim() ||
                a.traj.input_dim() != ref.input_dim() || a.traj.output_dim() != ref.output_dim())
                throw std::invalid_argument("path measure: atoms must share (T, n_x, n_u, n_y)");
        }
        std::vector<double> w(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i) w[i] = atoms_[i].weight;
        detail::check_weights(w, "path measure");
        detail::renormalize(w);
        for (std::size_t i = 0; i < atoms_.size(); ++i) atoms_[i].weight = w[i];
    }

    static PathMeasure dirac(Trajectory traj) { return PathMeasure({{1.0, std::move(traj)}}); }

    const std::vector<Atom>& atoms() const { return atoms_; }
    int size() const { return static_cast<int>(atoms_.size()); }
    int horizon() const { return atoms_[0].traj.horizon(); }
    int state_dim() const { return atoms_[0].traj.state_dim(); }
    int input_dim() const { return atoms_[0].traj.input_dim(); }
    int output_dim() const { return atoms_[0].traj.output_dim(); }

    template <class F>
    double expect(F&& fn) const {
        ExactSum s;
        for (const auto& a : atoms_) s.add(a.weight * fn(a.traj));
        return s.value();
    }

private:
    std::vector<Atom> atoms_;
};

/// Per-stage occupation marginals: rho_t on states (t = 0..T) and lambda_t
/// on state-input pairs (t = 0..T-1).
struct OccupationMarginals {
    std::vector<DiscreteDistribution> rho;
    std::vector<DiscreteDistribution> lambda;

    int horizon() const { return static_cast<int>(lambda.size()); }
};

struct BehavioralCheck {
    bool behavioral;
    double worst_residual;
};

/// True iff every atom's graph residual is at most tol; also reports the
/// worst atom residual.
template <SystemModel S>
BehavioralCheck is_behavioral(const PathMeasure& mu, const S& sys, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("is_behavioral: tol must be positive");
    double worst = 0.0;
    for (const auto& a : mu.atoms()) worst = std::max(worst, graph_residual(sys, a.traj));
    return {worst <= tol, worst};
}

/// Expected pathwise dynamics mismatch; zero iff mu is graph-supported.
template <SystemModel S>
double metric_residual(const PathMeasure& mu, const S& sys) {
    return mu.expect([&](const Trajectory& t) { return graph_residual(sys, t); });
}

/// Worst weak operator identity violation over all stages and monomial test
/// functions of total degree <= max_degree: the pushforward moments of
/// X_{t+1} vs f(X_t, U_t) and of Y_t vs h(X_t, U_t).
///
/// Monomials replace the bounded-continuous test family; on compact supports
/// they are dense, and the residual becomes a finite maximum.
template <SystemModel S>
double weak_operator_residual(const PathMeasure& mu, const S& sys, int max_degree) {
    if (max_degree < 1) throw std::invalid_argument("weak_operator_residual: max_degree >= 1");
    const int T = mu.horizon();
    const auto state_monos = detail::multi_indices(mu.state_dim(), max_degree);
    const auto output_monos = detail::multi_indices(mu.output_dim(), max_degree);
    double worst = 0.0;
    for (int t = 0; t < T; ++t) {
        std::vector<Vector> fx, hx;
        fx.reserve(mu.size());
        hx.reserve(mu.size());
        for (const auto& a : mu.atoms()) {
            fx.push_back(sys.f(a.traj.states[t], a.traj.inputs[t]));
            hx.push_back(sys.h(a.traj.states[t], a.traj.inputs[t]));
        }
        for (const auto& mono : state_monos) {
            ExactSum lhs, rhs;
            for (int i = 0; i < mu.size(); ++i) {
                const auto& a = mu.atoms()[i];
                lhs.add(a.weight * detail::monomial(mono, a.traj.states[t + 1]));
                rhs.add(a.weight * detail::monomial(mono, fx[i]));
            }
            worst = std::max(worst, std::fabs(lhs.value() - rhs.value()));
        }
        for (const auto& mono : output_monos) {
            ExactSum lhs, rhs;
            for (int i = 0; i < mu.size(); ++i) {
                const auto& a = mu.atoms()[i];
                lhs.add(a.weight * detail::monomial(mono, a.traj.outputs[t]));
                rhs.add(a.weight * detail::monomial(mono, hx[i]));
            }
            worst = std::max(worst, std::fabs(lhs.value() - rhs.value()));
        }
    }
    return worst;
}

/// The scalar shift system x_{t+1} = u_t with a zero output; carrier of the
/// weak-vs-graph counterexample.
inline PolynomialSystem weak_counterexample_system() {
    Polynomial f{{{0, 1}, 1.0}};  // f(x, u) = u
    Polynomial h{};               // identically zero output
    return PolynomialSystem(1, 1, {f}, {h});
}

/// Discrete analogue of the independent-coupling counterexample: N equally
/// weighted scalar atoms with u_i = (i - 1/2)/N, x_0 = 0 and x_1 = u_{N+1-i}.
/// All pushforward marginals of X_1 and f(X_0, U_0) = U_0 agree (the values
/// are a permutation), so every weak operator identity holds, yet no atom
/// satisfies the dynamics and the metric residual stays bounded away from 0.
inline PathMeasure weak_vs_graph_counterexample(int n_atoms) {
    if (n_atoms < 2) throw std::invalid_argument("counterexample: N >= 2");
    std::vector<PathMeasure::Atom> atoms;
    atoms.reserve(n_atoms);
    for (int i = 1; i <= n_atoms; ++i) {
        const double u = (i - 0.5) / n_atoms;
        const double x1 = (n_atoms + 1 - i - 0.5) / n_atoms;
        Trajectory traj;
        traj.states = {Vector::Zero(1), Vector::Constant(1, x1)};
        traj.inputs = {Vector::Constant(1, u)};
        traj.outputs = {Vector::Zero(1)};
        atoms.push_back({1.0 / n_atoms, std::move(traj)});
    }
    return PathMeasure(std::move(atoms));
}

/// Convex combination lam * mu1 + (1 - lam) * mu2.
inline PathMeasure mixture(const PathMeasure& mu1, const PathMeasure& mu2, double lam) {
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("mixture: lam in [0,1]");
    if (mu1.horizon() != mu2.horizon() || mu1.state_dim() != mu2.state_dim() ||
        mu1.input_dim() != mu2.input_dim() || mu1.output_dim() != mu2.output_dim())
        throw std::invalid_argument("mixture: shape mismatch");
    if (lam == 1.0) return mu1;
    if (lam == 0.0) return mu2;
    std::vector<PathMeasure::Atom> atoms;
    atoms.reserve(mu1.size() + mu2.size());
    for (const auto& a : mu1.atoms()) atoms.push_back({lam * a.weight, a.traj});
    for (const auto& a : mu2.atoms()) atoms.push_back({(1.0 - lam) * a.weight, a.traj});
    return PathMeasure(std::move(atoms));
}

struct Decomposition {
    PathMeasure part;        // conditional measure on the split set
    PathMeasure complement;  // conditional measure on the rest
    double weight;           // mu(split)
};

/// Conditional split mu = w * mu_A + (1-w) * mu_Ac along an atom index set.
/// Witnesses non-extremality of every measure with at least two atoms.
inline Decomposition decompose(const PathMeasure& mu, const std::vector<int>& split) {
    std::vector<bool> in_split(mu.size(), false);
    for (int idx : split) {
        if (idx < 0 || idx >= mu.size()) throw std::invalid_argument("decompose: index out of range");
        in_split[idx] = true;
    }
    ExactSum mass;
    for (int i = 0; i < mu.size(); ++i)
        if (in_split[i]) mass.add(mu.atoms()[i].weight);
    const double w = mass.value();
    if (!(w > 0.0) || !(w < 1.0))
        throw std::invalid_argument("decompose: split must carry strictly partial mass");
    std::vector<PathMeasure::Atom> a_atoms, b_atoms;
    for (int i = 0; i < mu.size(); ++i) {
        const auto& a = mu.atoms()[i];
        if (in_split[i])
            a_atoms.push_back({a.weight / w, a.traj});
        else
            b_atoms.push_back({a.weight / (1.0 - w), a.traj});
    }
    return {PathMeasure(std::move(a_atoms)), PathMeasure(std::move(b_atoms)), w};
}

/// Pushes mu to its per-stage occupation marginals, merging duplicate
/// support points by exact equality.
inline OccupationMarginals occupation_marginals(const PathMeasure& mu) {
    const int T = mu.horizon();
    OccupationMarginals m;
    m.rho.reserve(T + 1);
    m.lambda.reserve(T);
    for (int t = 0; t <= T; ++t) {
        std::vector<DiscreteDistribution::Atom> atoms;
        atoms.reserve(mu.size());
        for (const auto& a : mu.atoms()) atoms.push_back({a.weight, a.traj.states[t]});
        m.rho.push_back(DiscreteDistribution(std::move(atoms)).merged());
    }
    for (int t = 0; t < T; ++t) {
        std::vector<DiscreteDistribution::Atom> atoms;
        atoms.reserve(mu.size());
        for (const auto& a : mu.atoms()) {
            Vector xu(mu.state_dim() + mu.input_dim());
            xu << a.traj.states[t], a.traj.inputs[t];
            atoms.push_back({a.weight, std::move(xu)});
        }
        m.lambda.push_back(DiscreteDistribution(std::move(atoms)).merged());
    }
    return m;
}

struct FlowResiduals {
    double marginal;  // (pi_X)# lambda_t vs rho_t
    double dynamics;  // f# lambda_t vs rho_{t+1}
    double output;    // (X_t,U_t,Y_t)# mu vs (id,h)# lambda_t, when mu given
};

/// Largest flow-constraint violation over monomial test functions of total
/// degree <= max_degree. The output residual needs the source path measure
/// and is reported as 0 when it is not supplied.
template <SystemModel S>
FlowResiduals flow_residuals(const OccupationMarginals& m, const S& sys, int max_degree,
                             const PathMeasure* source = nullptr) {
    const int T = m.horizon();
    if (static_cast<int>(m.rho.size()) != T + 1)
        throw std::invalid_argument("flow_residuals: need T+1 state marginals");
    FlowResiduals r{0.0, 0.0, 0.0};
    const int n_x = sys.state_dim();
    const auto state_monos = detail::multi_indices(n_x, max_degree);
    for (int t = 0; t < T; ++t) {
        if (m.lambda[t].dim() != n_x + sys.input_dim())
            throw std::invalid_argument("flow_residuals: lambda dimension mismatch");
        for (const auto& mono : state_monos) {
            ExactSum lam_side, rho_side, push_side, next_side;
            for (const auto& a : m.lambda[t].atoms())
                lam_side.add(a.weight * detail::monomial(mono, a.point.head(n_x)));
            for (const auto& a : m.rho[t].atoms())
                rho_side.add(a.weight * detail::monomial(mono, a.point));
            for (const auto& a : m.lambda[t].atoms())
                push_side.add(a.weight *
                              detail::monomial(mono, sys.f(a.point.head(n_x), a.point.tail(sys.input_dim()))));
            for (const auto& a : m.rho[t + 1].atoms())
                next_side.add(a.weight * detail::monomial(mono, a.point));
            r.marginal = std::max(r.marginal, std::fabs(lam_side.value() - rho_side.value()));
            r.dynamics = std::max(r.dynamics, std::fabs(push_side.value() - next_side.value()));
        }
    }
    if (source != nullptr) {
        const int n_u = sys.input_dim();
        const int n_y = sys.output_dim();
        const auto joint_monos = detail::multi_indices(n_x + n_u + n_y, max_degree);
        for (int t = 0; t < T; ++t) {
            for (const auto& mono : joint_monos) {
                ExactSum mu_side, lam_side;
                for (const auto& a : source->atoms()) {
                    Vector z(n_x + n_u + n_y);
                    z << a.traj.states[t], a.traj.inputs[t], a.traj.outputs[t];
                    mu_side.add(a.weight * detail::monomial(mono, z));
                }
                for (const auto& a : m.lambda[t].atoms()) {
                    Vector z(n_x + n_u + n_y);
                    z << a.point, sys.h(a.point.head(n_x), a.point.tail(n_u));
                    lam_side.add(a.weight * detail::monomial(mono, z));
                }
                r.output = std::max(r.output, std::fabs(mu_side.value() - lam_side.value()));
            }
        }
    }
    return r;
}

/// Markov-policy lift: disintegrates each lambda_t into kernels kappa_t(u|x)
/// at the support of the induced state marginals, then enumerates every
/// positive-probability path with delta transitions x_{t+1} = f(x_t, u_t),
/// y_t = h(x_t, u_t).
///
/// Reproduces rho_t and lambda_t but not, in general, the temporal couplings
/// of a measure that induced them.
template <SystemModel S>
PathMeasure reconstruct_markov(const DiscreteDistribution& rho0,
                               const std::vector<DiscreteDistribution>& lambdas, const S& sys,
                               double tol = 1e-9) {
    const int T = static_cast<int>(lambdas.size());
    const int n_x = sys.state_dim();
    const int n_u = sys.input_dim();
    if (rho0.dim() != n_x) throw std::invalid_argument("reconstruct_markov: rho0 dimension");

    struct KernelRow {
        Vector x;
        std::vector<std::pair<Vector, double>> inputs;  // (u, kappa(u|x))
        double mass = 0.0;
    };

    // Current state marginal, updated stage by stage.
    DiscreteDistribution rho_t = rho0.merged();
    std::vector<std::vector<KernelRow>> kernels(T);
    for (int t = 0; t < T; ++t) {
        if (lambdas[t].dim() != n_x + n_u)
            throw std::invalid_argument("reconstruct_markov: lambda dimension");
        // Group lambda_t atoms by their (exact) state component.
        std::vector<KernelRow> rows;
        for (const auto& a : lambdas[t].atoms()) {
            const Vector x = a.point.head(n_x);
            KernelRow* row = nullptr;
            for (auto& rw : rows)
                if ((rw.x.array() == x.array()).all()) {
                    row = &rw;
                    break;
                }
            if (row == nullptr) {
                rows.push_back({x, {}, 0.0});
                row = &rows.back();
            }
            row->inputs.emplace_back(a.point.tail(n_u), a.weight);
            row->mass += a.weight;
        }
        // Flow check against the induced rho_t: matching support and masses.
        for (const auto& rw : rows) {
            double best = std::numeric_limits<double>::infinity();
            double mass_at = 0.0;
            for (const auto& ra : rho_t.atoms()) {
                const double d = (ra.point - rw.x).norm();
                if (d < best) {
                    best = d;
                    mass_at = ra.weight;
                }
            }
            if (best > tol)
                throw std::invalid_argument("reconstruct_markov: lambda support point missing from rho_t");
            if (std::fabs(mass_at - rw.mass) > tol)
                throw std::invalid_argument("reconstruct_markov: flow-infeasible marginals");
        }
        for (const auto& ra : rho_t.atoms()) {
            if (ra.weight <= tol) continue;
            bool covered = false;
            for (const auto& rw : rows)
                if ((ra.point - rw.x).norm() <= tol) covered = true;
            if (!covered)
                throw std::invalid_argument("reconstruct_markov: rho_t mass without prescribed inputs");
        }
        // Normalize conditional weights.
        for (auto& rw : rows)
            for (auto& [u, w] : rw.inputs) w /= rw.mass;
        kernels[t] = rows;
        // Induce rho_{t+1} = f# lambda_t.
        std::vector<DiscreteDistribution::Atom> next_atoms;
        for (const auto& a : lambdas[t].atoms())
            next_atoms.push_back({a.weight, sys.f(a.point.head(n_x), a.point.tail(n_u))});
        rho_t = DiscreteDistribution(std::move(next_atoms)).merged();
    }

    // Enumerate all positive probability paths under the product kernels.
    std::vector<PathMeasure::Atom> out;
    struct Frame {
        Trajectory traj;
        double weight;
    };
    std::vector<Frame> stack;
    const DiscreteDistribution initial = rho0.merged();
    for (const auto& ia : initial.atoms()) {
        if (ia.weight == 0.0) continue;
        Trajectory t0;
        t0.states = {ia.point};
        stack.push_back({std::move(t0), ia.weight});
    }
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        const int t = fr.traj.horizon();
        if (t == T) {
            out.push_back({fr.weight, std::move(fr.traj)});
            continue;
        }
        const Vector& x = fr.traj.states.back();
        const KernelRow* row = nullptr;
        for (const auto& rw : kernels[t])
            if ((rw.x - x).norm() <= tol) {
                row = &rw;
                break;
            }
        if (row == nullptr)
            throw std::invalid_argument("reconstruct_markov: reached state outside lambda support");
        for (const auto& [u, p] : row->inputs) {
            if (p == 0.0) continue;
            Frame next = fr;
            next.weight *= p;
            next.traj.inputs.push_back(u);
            next.traj.outputs.push_back(sys.h(x, u));
            next.traj.states.push_back(sys.f(x, u));
            stack.push_back(std::move(next));
        }
    }
    return PathMeasure(std::move(out));
}

/// Second-moment functional: sum_t E[|X_t|^2 + |U_t|^2 + |Y_t|^2] + E[|X_T|^2].
inline double psi_moment(const PathMeasure& mu) {
    return mu.expect([&](const Trajectory& traj) {
        double s = 0.0;
        for (int t = 0; t < traj.horizon(); ++t)
            s += traj.states[t].squaredNorm() + traj.inputs[t].squaredNorm() +
                 traj.outputs[t].squaredNorm();
        return s + traj.states.back().squaredNorm();
    });
}

/// Mixed moments m_{i,j,k} = E[x_t^i u_t^j x_{t+1}^k] for a scalar system,
/// all entries with i + j + k <= max_total_degree.
using MomentTable = std::map<std::array<int, 3>, double>;

inline MomentTable mixed_moments(const PathMeasure& mu, int t, int max_total_degree) {
    if (mu.state_dim() != 1 || mu.input_dim() != 1)
        throw std::invalid_argument("mixed_moments: scalar state/input required");
    if (t < 0 || t >= mu.horizon()) throw std::invalid_argument("mixed_moments: stage out of range");
    MomentTable table;
    for (int i = 0; i <= max_total_degree; ++i)
        for (int j = 0; i + j <= max_total_degree; ++j)
            for (int k = 0; i + j + k <= max_total_degree; ++k) {
                ExactSum s;
                for (const auto& a : mu.atoms())
                    s.add(a.weight * detail::pow_int(a.traj.states[t][0], i) *
                          detail::pow_int(a.traj.inputs[t][0], j) *
                          detail::pow_int(a.traj.states[t + 1][0], k));
                table[{i, j, k}] = s.value();
            }
    return table;
}

/// Worst violation of the graph-ideal identities generated by
/// x_{t+1} = x_t^2 + u_t: |m_{i,j,k+1} - m_{i+2,j,k} - m_{i,j+1,k}| over all
/// i + j + k + 2 <= 2r.
inline double graph_ideal_residual(const PathMeasure& mu, int t, int relaxation_order,
                                   const PolynomialSystem& sys) {
    // Only the quadratic-shift form generates this ideal family.
    bool has_x2 = false, has_u = false;
    int extra = 0;
    if (sys.n_x != 1 || sys.n_u != 1 || sys.f_coeffs.size() != 1)
        throw std::invalid_argument("graph_ideal_residual: system must be scalar");
    for (const auto& term : sys.f_coeffs[0]) {
        if (term.exps == std::vector<int>{2, 0} && term.coef == 1.0)
            has_x2 = true;
        else if (term.exps == std::vector<int>{0, 1} && term.coef == 1.0)
            has_u = true;
        else if (term.coef != 0.0)
            ++extra;
    }
    if (!has_x2 || !has_u || extra != 0)
        throw std::invalid_argument("graph_ideal_residual: dynamics must be x' = x^2 + u");
    const auto m = mixed_moments(mu, t, 2 * relaxation_order);
    double worst = 0.0;
    for (int i = 0;; ++i) {
        if (i + 2 > 2 * relaxation_order) break;
        for (int j = 0; i + j + 2 <= 2 * relaxation_order; ++j)
            for (int k = 0; i + j + k + 2 <= 2 * relaxation_order; ++k) {
                const double v = m.at({i, j, k + 1}) - m.at({i + 2, j, k}) - m.at({i, j + 1, k});
                worst = std::max(worst, std::fabs(v));
            }
    }
    return worst;
}

/// Draws a random one-step behavioral measure for a scalar boxed system:
/// atoms (x, u) uniform in the declared boxes, rejected unless f(x, u) stays
/// inside the state box.
inline PathMeasure sample_boxed_measure(const PolynomialSystem& sys, int max_atoms,
                                        SplitMix64& rng) {
    if (sys.n_x != 1 || sys.n_u != 1)
        throw std::invalid_argument("sample_boxed_measure: scalar system required");
    if (sys.x_bounds.empty() || sys.u_bounds.empty())
        throw std::invalid_argument("sample_boxed_measure: box supports required");
    const auto xb = sys.x_bounds[0];
    const auto ub = sys.u_bounds[0];
    const int n_atoms = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_atoms)));
    std::vector<PathMeasure::Atom> atoms;
    std::vector<double> raw_w;
    while (static_cast<int>(atoms.size()) < n_atoms) {
        const double x = rng.uniform(xb.lo, xb.hi);
        const double u = rng.uniform(ub.lo, ub.hi);
        const Vector xv = Vector::Constant(1, x);
        const Vector uv = Vector::Constant(1, u);
        const Vector x1 = sys.f(xv, uv);
        if (x1[0] < xb.lo || x1[0] > xb.hi) continue;  // rejection on the image box
        Trajectory traj;
        traj.states = {xv, x1};
        traj.inputs = {uv};
        traj.outputs.resize(1, Vector(0));
        if (sys.output_dim() > 0) traj.outputs[0] = sys.h(xv, uv);
        atoms.push_back({0.0, std::move(traj)});
        raw_w.push_back(rng.uniform_pos());
    }
    double total = 0.0;
    for (double w : raw_w) total += w;
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i].weight = raw_w[i] / total;
    return PathMeasure(std::move(atoms));
}

/// (E[x_t u_t], E[x_{t+1}]) of a one-step scalar measure.
inline std::array<double, 2> degree_one_projection(const PathMeasure& mu) {
    if (mu.state_dim() != 1 || mu.input_dim() != 1 || mu.horizon() != 1)
        throw std::invalid_argument("degree_one_projection: one-step scalar measure required");
    const double exu =
        mu.expect([](const Trajectory& t) { return t.states[0][0] * t.inputs[0][0]; });
    const double ex1 = mu.expect([](const Trajectory& t) { return t.states[1][0]; });
    return {exu, ex1};
}

/// Degree-one projections of sampled boxed behavioral measures, for
/// feasible-set plots.
inline std::vector<std::array<double, 2>> projection_cloud(const PolynomialSystem& sys,
                                                           int n_samples, std::uint64_t seed,
                                                           int max_atoms = 8) {
    if (n_samples < 1) throw std::invalid_argument("projection_cloud: n_samples >= 1");
    SplitMix64 rng(seed);
    std::vector<std::array<double, 2>> points;
    points.reserve(n_samples);
    for (int s = 0; s < n_samples; ++s)
        points.push_back(degree_one_projection(sample_boxed_measure(sys, max_atoms, rng)));
    return points;
}

}  // namespace bmt
