#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bmt/exact_sum.hpp"
#include "bmt/measure.hpp"
#include "bmt/rng.hpp"

namespace bmt {

/// Per-stage controlled transition kernels on finite alphabets:
/// probs[t][s][a] is the law of the next state given (X_t = s, U_t = a).
class FiniteKernel {
public:
    using Table = std::vector<std::vector<std::vector<std::vector<double>>>>;

    explicit FiniteKernel(Table probs) : p_(std::move(probs)) {
        if (p_.empty() || p_[0].empty() || p_[0][0].empty())
            throw std::invalid_argument("kernel: empty table");
        num_states_ = static_cast<int>(p_[0].size());
        num_inputs_ = static_cast<int>(p_[0][0].size());
        for (auto& stage : p_) {
            if (static_cast<int>(stage.size()) != num_states_)
                throw std::invalid_argument("kernel: ragged stage");
            for (auto& per_state : stage) {
                if (static_cast<int>(per_state.size()) != num_inputs_)
                    throw std::invalid_argument("kernel: ragged inputs");
                for (auto& row : per_state) {
                    if (static_cast<int>(row.size()) != num_states_)
                        throw std::invalid_argument("kernel: ragged next-state row");
                    ExactSum s;
                    for (double v : row) {
                        if (!(v >= 0.0)) throw std::invalid_argument("kernel: negative probability");
                        s.add(v);
                    }
                    const double total = s.value();
                    if (std::fabs(total - 1.0) > kWeightTol)
                        throw std::invalid_argument("kernel: row must sum to 1");
                    if (total != 1.0)
                        for (double& v : row) v /= total;
                }
            }
        }
    }

    int stages() const { return static_cast<int>(p_.size()); }
    int num_states() const { return num_states_; }
    int num_inputs() const { return num_inputs_; }
    const std::vector<double>& row(int t, int s, int a) const { return p_[t][s][a]; }
    const Table& table() const { return p_; }

private:
    Table p_;
    int num_states_ = 0;
    int num_inputs_ = 0;
};

/// One finite-alphabet path: T (state, input) steps plus the final state.
struct FinitePath {
    std::vector<std::pair<int, int>> steps;
    int final_state = 0;

    int horizon() const { return static_cast<int>(steps.size()); }
    int state_at(int t) const {
        return t == horizon() ? final_state : steps[t].first;
    }
};

/// Finite-support measure on finite-alphabet paths.
class FinitePathMeasure {
public:
    struct Atom {
        double weight;
        FinitePath path;
    };

    FinitePathMeasure(std::vector<Atom> atoms, int num_states, int num_inputs)
        : atoms_(std::move(atoms)), num_states_(num_states), num_inputs_(num_inputs) {
        if (atoms_.empty()) throw std::invalid_argument("path measure: empty");
        const int T = atoms_[0].path.horizon();
        std::vector<double> w(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const auto& a = atoms_[i];
            if (a.path.horizon() != T) throw std::invalid_argument("path measure: mixed horizons");
            for (const auto& [s, u] : a.path.steps)
                if (s < 0 || s >= num_states_ || u < 0 || u >= num_inputs_)
                    throw std::invalid_argument("path measure: symbol out of alphabet");
            if (a.path.final_state < 0 || a.path.final_state >= num_states_)
                throw std::invalid_argument("path measure: symbol out of alphabet");
            w[i] = a.weight;
        }
        detail::check_weights(w, "path measure");
        detail::renormalize(w);
        for (std::size_t i = 0; i < atoms_.size(); ++i) atoms_[i].weight = w[i];
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    int horizon() const { return atoms_[0].path.horizon(); }
    int num_states() const { return num_states_; }
    int num_inputs() const { return num_inputs_; }

private:
    std::vector<Atom> atoms_;
    int num_states_;
    int num_inputs_;
};

/// Convex combination lam * mu1 + (1 - lam) * mu2 on shared alphabets.
inline FinitePathMeasure mixture(const FinitePathMeasure& mu1, const FinitePathMeasure& mu2,
                                 double lam) {
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("mixture: lam in [0,1]");
    if (mu1.horizon() != mu2.horizon() || mu1.num_states() != mu2.num_states() ||
        mu1.num_inputs() != mu2.num_inputs())
        throw std::invalid_argument("mixture: alphabet mismatch");
    if (lam == 1.0) return mu1;
    if (lam == 0.0) return mu2;
    std::vector<FinitePathMeasure::Atom> atoms;
    atoms.reserve(mu1.atoms().size() + mu2.atoms().size());
    for (const auto& a : mu1.atoms()) atoms.push_back({lam * a.weight, a.path});
    for (const auto& a : mu2.atoms()) atoms.push_back({(1.0 - lam) * a.weight, a.path});
    return FinitePathMeasure(std::move(atoms), mu1.num_states(), mu1.num_inputs());
}

namespace detail {

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
    return 0.5 * s;
}

/// Worst TV distance between the empirical conditional next-state law and
/// the kernel, grouping atoms by the given prefix key.
template <class KeyFn>
double grouped_kernel_residual(const FinitePathMeasure& mu, const FiniteKernel& kernels,
                               KeyFn&& key_of) {
    if (mu.num_states() != kernels.num_states() || mu.num_inputs() != kernels.num_inputs())
        throw std::invalid_argument("kernel residual: alphabet mismatch");
    if (mu.horizon() > kernels.stages())
        throw std::invalid_argument("kernel residual: not enough kernel stages");
    double worst = 0.0;
    for (int t = 0; t < mu.horizon(); ++t) {
        struct Group {
            double mass = 0.0;
            std::vector<double> next_mass;
            int s = 0, a = 0;
        };
        std::map<std::vector<int>, Group> groups;
        for (const auto& atom : mu.atoms()) {
            if (atom.weight == 0.0) continue;
            auto key = key_of(atom.path, t);
            auto& g = groups[key];
            if (g.next_mass.empty()) {
                g.next_mass.assign(mu.num_states(), 0.0);
                g.s = atom.path.steps[t].first;
                g.a = atom.path.steps[t].second;
            }
            g.mass += atom.weight;
            g.next_mass[atom.path.state_at(t + 1)] += atom.weight;
        }
        for (const auto& [key, g] : groups) {
            std::vector<double> cond(mu.num_states());
            for (int s = 0; s < mu.num_states(); ++s) cond[s] = g.next_mass[s] / g.mass;
            worst = std::max(worst, tv_distance(cond, kernels.row(t, g.s, g.a)));
        }
    }
    return worst;
}

}  // namespace detail

/// History-conditional kernel consistency: conditions on the full prefix
/// (x_0, u_0, ..., x_t, u_t). Zero iff mu lies in the stochastic
/// behavioral-measure set (finite-space equivalence); only positive-mass
/// histories constrain anything.
inline double history_kernel_residual(const FinitePathMeasure& mu, const FiniteKernel& kernels) {
    return detail::grouped_kernel_residual(
        mu, kernels, [](const FinitePath& path, int t) {
            std::vector<int> key;
            key.reserve(2 * (t + 1));
            for (int k = 0; k <= t; ++k) {
                key.push_back(path.steps[k].first);
                key.push_back(path.steps[k].second);
            }
            return key;
        });
}

/// Same check conditioning only on (x_t, u_t); strictly weaker than the
/// history-conditional test.
inline double onestep_kernel_residual(const FinitePathMeasure& mu, const FiniteKernel& kernels) {
    return detail::grouped_kernel_residual(mu, kernels, [](const FinitePath& path, int t) {
        return std::vector<int>{path.steps[t].first, path.steps[t].second};
    });
}

/// Outer consistency relaxation: matches only the next-state marginal law,
/// maximized over indicator test functions of next-state values.
inline double marginal_kernel_residual(const FinitePathMeasure& mu, const FiniteKernel& kernels) {
    if (mu.num_states() != kernels.num_states() || mu.num_inputs() != kernels.num_inputs())
        throw std::invalid_argument("kernel residual: alphabet mismatch");
    double worst = 0.0;
    for (int t = 0; t < mu.horizon(); ++t) {
        for (int s = 0; s < mu.num_states(); ++s) {
            ExactSum lhs, rhs;
            for (const auto& atom : mu.atoms()) {
                lhs.add(atom.weight * (atom.path.state_at(t + 1) == s ? 1.0 : 0.0));
                rhs.add(atom.weight *
                        kernels.row(t, atom.path.steps[t].first, atom.path.steps[t].second)[s]);
            }
            worst = std::max(worst, std::fabs(lhs.value() - rhs.value()));
        }
    }
    return worst;
}

/// Markov policy kernels kappa[t][s][a] = P(U_t = a | X_t = s).
using PolicyKernel = std::vector<std::vector<std::vector<double>>>;

struct ExactEnumeration {};
struct MonteCarlo {
    std::uint64_t seed = 0;
    int n = 0;
};

/// Exact finite-horizon product construction: enumerates every positive
/// probability path x0 ~ rho0, u_t ~ kappa_t, x_{t+1} ~ K_t.
inline FinitePathMeasure sample_from_kernels(const std::vector<double>& rho0,
                                             const FiniteKernel& kernels,
                                             const PolicyKernel& kappa, ExactEnumeration) {
    const int T = kernels.stages();
    const int S = kernels.num_states();
    if (static_cast<int>(rho0.size()) != S)
        throw std::invalid_argument("sample: rho0 alphabet mismatch");
    if (static_cast<int>(kappa.size()) != T)
        throw std::invalid_argument("sample: policy stage count");
    std::vector<FinitePathMeasure::Atom> atoms;
    struct Frame {
        FinitePath path;
        double weight;
        int state;
    };
    std::vector<Frame> stack;
    for (int s = 0; s < S; ++s)
        if (rho0[s] > 0.0) stack.push_back({FinitePath{}, rho0[s], s});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        const int t = fr.path.horizon();
        if (t == T) {
            fr.path.final_state = fr.state;
            atoms.push_back({fr.weight, std::move(fr.path)});
            continue;
        }
        for (int a = 0; a < kernels.num_inputs(); ++a) {
            const double pa = kappa[t][fr.state][a];
            if (pa <= 0.0) continue;
            const auto& row = kernels.row(t, fr.state, a);
            for (int s2 = 0; s2 < S; ++s2) {
                if (row[s2] <= 0.0) continue;
                Frame next = fr;
                next.weight *= pa * row[s2];
                next.path.steps.emplace_back(fr.state, a);
                next.state = s2;
                stack.push_back(std::move(next));
            }
        }
    }
    return FinitePathMeasure(std::move(atoms), S, kernels.num_inputs());
}

/// Monte-Carlo variant: n seeded draws with uniform atom weights.
inline FinitePathMeasure sample_from_kernels(const std::vector<double>& rho0,
                                             const FiniteKernel& kernels,
                                             const PolicyKernel& kappa, MonteCarlo mc) {
    const int T = kernels.stages();
    const int S = kernels.num_states();
    if (mc.n < 1) throw std::invalid_argument("sample: need n >= 1 draws");
    if (static_cast<int>(rho0.size()) != S)
        throw std::invalid_argument("sample: rho0 alphabet mismatch");
    SplitMix64 rng(mc.seed);
    auto draw = [&](const std::vector<double>& probs) {
        const double r = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (r < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    };
    std::vector<FinitePathMeasure::Atom> atoms;
    atoms.reserve(mc.n);
    for (int k = 0; k < mc.n; ++k) {
        FinitePath path;
        int state = draw(rho0);
        for (int t = 0; t < T; ++t) {
            const int a = draw(kappa[t][state]);
            path.steps.emplace_back(state, a);
            state = draw(kernels.row(t, state, a));
        }
        path.final_state = state;
        atoms.push_back({1.0 / mc.n, std::move(path)});
    }
    return FinitePathMeasure(std::move(atoms), S, kernels.num_inputs());
}

struct HistoryCounterexample {
    FiniteKernel kernels;
    FinitePathMeasure measure;
};

/// Two-stage fair-coin construction: X0 fair, X1 fair independent, X2 = X0.
/// Both one-step conditionals match the fair kernel, but conditioning on the
/// full history reveals the X2 = X0 coupling with TV distance 1/2.
inline HistoryCounterexample history_counterexample() {
    const std::vector<double> fair{0.5, 0.5};
    FiniteKernel::Table table(2);
    for (auto& stage : table)
        stage.assign(2, std::vector<std::vector<double>>(1, fair));
    std::vector<FinitePathMeasure::Atom> atoms;
    for (int x0 = 0; x0 < 2; ++x0)
        for (int x1 = 0; x1 < 2; ++x1)
            atoms.push_back({0.25, FinitePath{{{x0, 0}, {x1, 0}}, x0}});
    return {FiniteKernel(std::move(table)), FinitePathMeasure(std::move(atoms), 2, 1)};
}

}  // namespace bmt
