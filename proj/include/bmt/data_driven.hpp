#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <limits>
#include <stdexcept>
#include <vector>

#include "bmt/hankel.hpp"
#include "bmt/simplex.hpp"

namespace bmt {

/// Quadratic path cost c(w) = (w - w_ref)' W (w - w_ref) with W symmetric
/// positive semidefinite (identity when omitted).
class QuadraticPathCost {
public:
    explicit QuadraticPathCost(Vector w_ref, Matrix W = Matrix())
        : w_ref_(std::move(w_ref)) {
        if (W.size() == 0) W = Matrix::Identity(w_ref_.size(), w_ref_.size());
        if (W.rows() != w_ref_.size() || W.cols() != w_ref_.size())
            throw std::invalid_argument("path cost: weight size mismatch");
        const double scale = std::max(1.0, W.norm());
        if ((W - W.transpose()).norm() > 1e-10 * scale)
            throw std::invalid_argument("path cost: weight not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
            throw std::invalid_argument("path cost: weight not positive semidefinite");
        W_ = std::move(W);
        // Factor W = M'M for least-squares use; tiny negative eigenvalues
        // from roundoff are clipped.
        sqrt_factor_ = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                       eig.eigenvectors().transpose();
    }

    double operator()(const Vector& w) const {
        const Vector d = w - w_ref_;
        return d.dot(W_ * d);
    }

    const Vector& reference() const { return w_ref_; }
    const Matrix& weight() const { return W_; }
    const Matrix& sqrt_factor() const { return sqrt_factor_; }

private:
    Vector w_ref_;
    Matrix W_;
    Matrix sqrt_factor_;
};

/// Affine expectation constraint E[phi(w)] <= / = bound with
/// phi(w) = coeffs' w + offset.
struct ExpectationConstraint {
    enum class Sense { LessEqual, Equal };
    Vector coeffs;
    double offset = 0.0;
    double bound = 0.0;
    Sense sense = Sense::LessEqual;

    double eval(const Vector& w) const { return coeffs.dot(w) + offset; }
};

struct DeepcPoint {
    Vector g;       // optimal coefficient vector
    Vector w;       // H g
    double value;   // squared W-distance from w_ref to the behavior
};

/// Dirac (classical DeePC) case: the single coefficient vector minimizing
/// the quadratic path cost over the behavior, solved as a pseudoinverse
/// least-squares problem in the W half-metric.
inline DeepcPoint deepc_point(const HankelMatrix& H, const QuadraticPathCost& cost) {
    if (cost.reference().size() != H.matrix().rows())
        throw std::invalid_argument("deepc_point: reference length mismatch");
    const Matrix MH = cost.sqrt_factor() * H.matrix();
    const Vector rhs = cost.sqrt_factor() * cost.reference();
    Eigen::JacobiSVD<Matrix> svd(MH, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    DeepcPoint out;
    out.g = svd.solve(rhs);
    out.w = H.matrix() * out.g;
    out.value = cost(out.w);
    return out;
}

struct DistributionalWeights {
    Vector p;             // weights over the atom set
    double value = 0.0;
    int argmin_index = -1;  // set in the unconstrained shortcut case
};

/// Distributional optimization over a fixed coefficient atom set: minimizes
/// sum_i p_i c(H g_i) over the probability simplex subject to affine
/// expectation constraints, as a finite LP. With no constraints the optimum
/// is a Dirac on the cheapest atom (lowest index on ties).
///
/// Infeasible constraint systems raise InfeasibleLp carrying the Farkas
/// certificate row.
inline DistributionalWeights distributional_weights(const HankelMatrix& H,
                                                    const std::vector<Vector>& atom_set,
                                                    const QuadraticPathCost& cost,
                                                    const std::vector<ExpectationConstraint>& constraints) {
    if (atom_set.empty()) throw std::invalid_argument("distributional_weights: need atoms");
    const int n = static_cast<int>(atom_set.size());
    std::vector<Vector> w_atoms;
    std::vector<double> costs(n);
    w_atoms.reserve(n);
    for (int i = 0; i < n; ++i) {
        w_atoms.push_back(H.matrix() * atom_set[i]);
        costs[i] = cost(w_atoms.back());
    }

    DistributionalWeights out;
    if (constraints.empty()) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (costs[i] < costs[best]) best = i;
        out.p = Vector::Zero(n);
        out.p[best] = 1.0;
        out.value = costs[best];
        out.argmin_index = best;
        return out;
    }

    const int m = static_cast<int>(constraints.size());
    int slacks = 0;
    for (const auto& con : constraints)
        if (con.sense == ExpectationConstraint::Sense::LessEqual) ++slacks;
    SparseLp lp = SparseLp::create(1 + m, n + slacks);
    for (int i = 0; i < n; ++i) {
        lp.add_entry(0, i, 1.0);
        lp.c[i] = costs[i];
    }
    lp.b[0] = 1.0;
    int slack_col = n;
    for (int j = 0; j < m; ++j) {
        const auto& con = constraints[j];
        if (con.coeffs.size() != w_atoms[0].size())
            throw std::invalid_argument("distributional_weights: constraint size mismatch");
        for (int i = 0; i < n; ++i) lp.add_entry(1 + j, i, con.eval(w_atoms[i]));
        if (con.sense == ExpectationConstraint::Sense::LessEqual)
            lp.add_entry(1 + j, slack_col++, 1.0);
        lp.b[1 + j] = con.bound;
    }
    const SimplexSolution sol = solve_lp(lp);
    out.p = sol.x.head(n);
    out.value = sol.objective;
    return out;
}

}  // namespace bmt
