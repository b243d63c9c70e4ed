#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bmt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

/// x^n by binary exponentiation, n >= 0.
inline double pow_int(double x, int n) {
    double r = 1.0;
    double base = x;
    while (n > 0) {
        if (n & 1) r *= base;
        base *= base;
        n >>= 1;
    }
    return r;
}

}  // namespace detail

/// One admissible path (x_{0:T}, u_{0:T-1}, y_{0:T-1}).
struct Trajectory {
    std::vector<Vector> states;   // length T+1
    std::vector<Vector> inputs;   // length T
    std::vector<Vector> outputs;  // length T

    int horizon() const { return static_cast<int>(inputs.size()); }
    int state_dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
    int input_dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].size()); }
    int output_dim() const { return outputs.empty() ? 0 : static_cast<int>(outputs[0].size()); }

    /// Lengths are exactly T+1 / T / T and all vectors per block agree.
    void validate() const {
        if (states.empty()) throw std::invalid_argument("trajectory: no states");
        if (states.size() != inputs.size() + 1 || inputs.size() != outputs.size())
            throw std::invalid_argument("trajectory: block lengths must be T+1/T/T");
        for (const auto& x : states)
            if (x.size() != states[0].size())
                throw std::invalid_argument("trajectory: ragged state block");
        for (const auto& u : inputs)
            if (u.size() != inputs[0].size())
                throw std::invalid_argument("trajectory: ragged input block");
        for (const auto& y : outputs)
            if (y.size() != outputs[0].size())
                throw std::invalid_argument("trajectory: ragged output block");
    }
};

/// External (input/output) window: w_t = (u_t, y_t), input block first.
struct ExternalTrajectory {
    std::vector<Vector> window;  // length L, each of size n_u + n_y
    int input_dim = 0;

    int length() const { return static_cast<int>(window.size()); }
    int signal_dim() const { return window.empty() ? 0 : static_cast<int>(window[0].size()); }

    /// The window stacked into a single column, w_0 on top.
    Vector stacked() const {
        const int d = signal_dim();
        Vector w(static_cast<Eigen::Index>(length()) * d);
        for (int t = 0; t < length(); ++t) w.segment(static_cast<Eigen::Index>(t) * d, d) = window[t];
        return w;
    }
};

/// x_{t+1} = A x_t + B u_t,  y_t = C x_t + D u_t.
struct LtiSystem {
    Matrix A, B, C, D;

    LtiSystem(Matrix A_, Matrix B_, Matrix C_, Matrix D_)
        : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
        if (A.rows() != A.cols()) throw std::invalid_argument("lti: A must be square");
        if (B.rows() != A.rows()) throw std::invalid_argument("lti: B row mismatch");
        if (C.cols() != A.cols()) throw std::invalid_argument("lti: C col mismatch");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw std::invalid_argument("lti: D shape mismatch");
        if (A.rows() < 1 || B.cols() < 1 || C.rows() < 1)
            throw std::invalid_argument("lti: dimensions must be >= 1");
    }

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }
    int output_dim() const { return static_cast<int>(C.rows()); }

    Vector f(const Vector& x, const Vector& u) const { return A * x + B * u; }
    Vector h(const Vector& x, const Vector& u) const { return C * x + D * u; }
};

/// One monomial term: coef * prod_i z_i^{exps[i]} over z = (x, u).
struct PolyTerm {
    std::vector<int> exps;
    double coef = 0.0;
};

using Polynomial = std::vector<PolyTerm>;

/// Per-coordinate closed interval, used for the optional box supports.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Polynomial state-space system: x_{t+1} = f(x_t, u_t), y_t = h(x_t, u_t),
/// with sparse multi-index coefficient tables for f and h.
///
/// Box bounds are metadata describing the admissible supports; simulate()
/// never clips, violations are surfaced by bounds_violation().
struct PolynomialSystem {
    int n_x = 0;
    int n_u = 0;
    std::vector<Polynomial> f_coeffs;  // size n_x
    std::vector<Polynomial> h_coeffs;  // size n_y (may be empty)
    std::vector<Interval> x_bounds;    // empty or size n_x
    std::vector<Interval> u_bounds;    // empty or size n_u
    std::vector<Interval> y_bounds;    // empty or size n_y

    PolynomialSystem(int nx, int nu, std::vector<Polynomial> f, std::vector<Polynomial> h = {})
        : n_x(nx), n_u(nu), f_coeffs(std::move(f)), h_coeffs(std::move(h)) {
        if (n_x < 1 || n_u < 1) throw std::invalid_argument("poly: n_x, n_u must be >= 1");
        if (static_cast<int>(f_coeffs.size()) != n_x)
            throw std::invalid_argument("poly: need one f polynomial per state coordinate");
        auto check = [&](const std::vector<Polynomial>& ps, const char* what) {
            for (const auto& p : ps)
                for (const auto& term : p) {
                    if (static_cast<int>(term.exps.size()) != n_x + n_u)
                        throw std::invalid_argument(std::string("poly: ") + what +
                                                    " multi-index length must be n_x+n_u");
                    if (!std::isfinite(term.coef))
                        throw std::invalid_argument(std::string("poly: ") + what +
                                                    " coefficient not finite");
                }
        };
        check(f_coeffs, "f");
        check(h_coeffs, "h");
    }

    int state_dim() const { return n_x; }
    int input_dim() const { return n_u; }
    int output_dim() const { return static_cast<int>(h_coeffs.size()); }

    Vector f(const Vector& x, const Vector& u) const { return eval(f_coeffs, x, u); }
    Vector h(const Vector& x, const Vector& u) const { return eval(h_coeffs, x, u); }

private:
    Vector eval(const std::vector<Polynomial>& polys, const Vector& x, const Vector& u) const {
        if (x.size() != n_x || u.size() != n_u)
            throw std::invalid_argument("poly: argument dimension mismatch");
        Vector out(polys.size());
        for (std::size_t c = 0; c < polys.size(); ++c) {
            double acc = 0.0;
            for (const auto& term : polys[c]) {
                double m = term.coef;
                for (int i = 0; i < n_x; ++i) m *= detail::pow_int(x[i], term.exps[i]);
                for (int i = 0; i < n_u; ++i) m *= detail::pow_int(u[i], term.exps[n_x + i]);
                acc += m;
            }
            out[static_cast<Eigen::Index>(c)] = acc;
        }
        return out;
    }
};

template <class S>
concept SystemModel = requires(const S& s, const Vector& x, const Vector& u) {
    { s.f(x, u) } -> std::convertible_to<Vector>;
    { s.h(x, u) } -> std::convertible_to<Vector>;
    { s.state_dim() } -> std::convertible_to<int>;
    { s.input_dim() } -> std::convertible_to<int>;
    { s.output_dim() } -> std::convertible_to<int>;
};

/// Rolls the dynamics forward from x0 under the given input sequence.
template <SystemModel S>
Trajectory simulate(const S& sys, const Vector& x0, const std::vector<Vector>& u_seq) {
    if (x0.size() != sys.state_dim()) throw std::invalid_argument("simulate: x0 dimension mismatch");
    if (u_seq.empty()) throw std::invalid_argument("simulate: need at least one input");
    Trajectory traj;
    traj.states.reserve(u_seq.size() + 1);
    traj.inputs.reserve(u_seq.size());
    traj.outputs.reserve(u_seq.size());
    traj.states.push_back(x0);
    for (const Vector& u : u_seq) {
        if (u.size() != sys.input_dim())
            throw std::invalid_argument("simulate: input dimension mismatch");
        const Vector& x = traj.states.back();
        traj.outputs.push_back(sys.h(x, u));
        traj.states.push_back(sys.f(x, u));
        traj.inputs.push_back(u);
    }
    return traj;
}

/// Total quadratic cost sum_{t<T} (x_t' Q x_t + r |u_t|^2) + x_T' Qf x_T.
inline double cost_eval(const Trajectory& traj, const Matrix& Q, double input_weight,
                        const Matrix& Qf) {
    traj.validate();
    const int n = traj.state_dim();
    if (Q.rows() != n || Q.cols() != n || Qf.rows() != n || Qf.cols() != n)
        throw std::invalid_argument("cost_eval: weight matrix dimension mismatch");
    double total = 0.0;
    for (int t = 0; t < traj.horizon(); ++t) {
        total += traj.states[t].dot(Q * traj.states[t]);
        total += input_weight * traj.inputs[t].squaredNorm();
    }
    total += traj.states.back().dot(Qf * traj.states.back());
    return total;
}

/// Pathwise violation of the dynamics and output equations:
/// sum_t |x_{t+1} - f(x_t,u_t)|^2 + |y_t - h(x_t,u_t)|^2.
/// Zero exactly when the path lies in the admissible path set.
template <SystemModel S>
double graph_residual(const S& sys, const Trajectory& traj) {
    traj.validate();
    if (traj.state_dim() != sys.state_dim() || traj.input_dim() != sys.input_dim() ||
        traj.output_dim() != sys.output_dim())
        throw std::invalid_argument("graph_residual: trajectory/system dimension mismatch");
    double total = 0.0;
    for (int t = 0; t < traj.horizon(); ++t) {
        total += (traj.states[t + 1] - sys.f(traj.states[t], traj.inputs[t])).squaredNorm();
        total += (traj.outputs[t] - sys.h(traj.states[t], traj.inputs[t])).squaredNorm();
    }
    return total;
}

/// Forgets the internal state: window t holds (u_t, y_t), L = T.
inline ExternalTrajectory external_projection(const Trajectory& traj) {
    traj.validate();
    ExternalTrajectory ext;
    ext.input_dim = traj.input_dim();
    ext.window.reserve(traj.horizon());
    for (int t = 0; t < traj.horizon(); ++t) {
        Vector w(traj.input_dim() + traj.output_dim());
        w << traj.inputs[t], traj.outputs[t];
        ext.window.push_back(std::move(w));
    }
    return ext;
}

/// Worst box-support violation over all coordinates and stages; 0 when the
/// whole path stays inside the declared supports (or none are declared).
inline double bounds_violation(const PolynomialSystem& sys, const Trajectory& traj) {
    traj.validate();
    auto excess = [](const std::vector<Interval>& box, const Vector& v) {
        double worst = 0.0;
        if (box.empty()) return worst;
        for (int i = 0; i < v.size(); ++i) {
            worst = std::max(worst, box[i].lo - v[i]);
            worst = std::max(worst, v[i] - box[i].hi);
        }
        return worst;
    };
    double worst = 0.0;
    for (const auto& x : traj.states) worst = std::max(worst, excess(sys.x_bounds, x));
    for (const auto& u : traj.inputs) worst = std::max(worst, excess(sys.u_bounds, u));
    for (const auto& y : traj.outputs) worst = std::max(worst, excess(sys.y_bounds, y));
    return worst;
}

}  // namespace bmt
