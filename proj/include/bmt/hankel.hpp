#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bmt/measure.hpp"
#include "bmt/system.hpp"

namespace bmt {

/// Depth-L block-Hankel matrix of an external data signal, with its SVD and
/// the rank-truncated Moore-Penrose pseudoinverse.
///
/// Column j is the stacked window (w_j, ..., w_{j+L-1}). A single rank
/// threshold (singular values above rank_rtol * sigma_max) ties together the
/// numerical rank, the column-space projector, and the pseudoinverse, so
/// membership tests and coefficient lifts are mutually consistent.
class HankelMatrix {
public:
    HankelMatrix(const std::vector<Vector>& w_data, int window_length, int input_dim = -1,
                 double rank_rtol = 1e-9)
        : L_(window_length), rank_rtol_(rank_rtol) {
        const int N = static_cast<int>(w_data.size());
        if (L_ < 1) throw std::invalid_argument("hankel: L >= 1");
        if (N < L_) throw std::invalid_argument("hankel: signal shorter than window");
        dim_ = static_cast<int>(w_data[0].size());
        if (dim_ < 1) throw std::invalid_argument("hankel: empty signal samples");
        for (const auto& w : w_data)
            if (w.size() != dim_) throw std::invalid_argument("hankel: ragged signal");
        input_dim_ = input_dim < 0 ? dim_ : input_dim;
        if (input_dim_ < 0 || input_dim_ > dim_)
            throw std::invalid_argument("hankel: bad input dimension");
        data_ = w_data;
        m_.resize(static_cast<Eigen::Index>(L_) * dim_, N - L_ + 1);
        for (int j = 0; j <= N - L_; ++j)
            for (int i = 0; i < L_; ++i)
                m_.block(static_cast<Eigen::Index>(i) * dim_, j, dim_, 1) = w_data[j + i];

        Eigen::JacobiSVD<Matrix> svd(m_, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u_ = svd.matrixU();
        v_ = svd.matrixV();
        sigma_ = svd.singularValues();
        const double cutoff = rank_rtol_ * (sigma_.size() > 0 ? sigma_[0] : 0.0);
        rank_ = 0;
        for (Eigen::Index i = 0; i < sigma_.size(); ++i)
            if (sigma_[i] > cutoff) ++rank_;
        pinv_ = v_.leftCols(rank_) *
                sigma_.head(rank_).cwiseInverse().asDiagonal() *
                u_.leftCols(rank_).transpose();
    }

    static HankelMatrix from_external(const ExternalTrajectory& data, int window_length,
                                      double rank_rtol = 1e-9) {
        return HankelMatrix(data.window, window_length, data.input_dim, rank_rtol);
    }

    const Matrix& matrix() const { return m_; }
    const Matrix& pinv() const { return pinv_; }
    const Vector& singular_values() const { return sigma_; }
    int rank() const { return rank_; }
    int window_length() const { return L_; }
    int signal_dim() const { return dim_; }
    int input_dim() const { return input_dim_; }
    int data_length() const { return static_cast<int>(data_.size()); }
    int num_columns() const { return static_cast<int>(m_.cols()); }
    const std::vector<Vector>& data() const { return data_; }

    /// Orthogonal projector onto the column space (the finite-horizon
    /// behavior under the Fundamental Lemma assumptions).
    Matrix column_projector() const {
        return u_.leftCols(rank_) * u_.leftCols(rank_).transpose();
    }

    /// Unit vectors spanning the orthogonal complement of the column space.
    Matrix null_directions() const { return u_.rightCols(u_.cols() - rank_); }

private:
    int L_;
    int dim_ = 0;
    int input_dim_ = 0;
    double rank_rtol_;
    std::vector<Vector> data_;
    Matrix m_, u_, v_, pinv_;
    Vector sigma_;
    int rank_ = 0;
};

/// Convenience wrapper matching the operation vocabulary.
inline HankelMatrix build_hankel(const std::vector<Vector>& w_data, int window_length,
                                 int input_dim = -1, double rank_rtol = 1e-9) {
    return HankelMatrix(w_data, window_length, input_dim, rank_rtol);
}

/// Persistency-of-excitation report for an input signal.
struct PEReport {
    int order = 0;
    int required_rank = 0;
    int achieved_rank = 0;
    std::vector<double> singular_values;
    bool pass = false;
};

/// Full-row-rank test of the depth-`order` input Hankel matrix.
inline PEReport check_pe(const std::vector<Vector>& u_data, int order, double rtol = 1e-9) {
    if (order < 1) throw std::invalid_argument("check_pe: order >= 1");
    if (static_cast<int>(u_data.size()) < order)
        throw std::invalid_argument("check_pe: signal shorter than the requested order");
    const HankelMatrix H(u_data, order, -1, rtol);
    PEReport rep;
    rep.order = order;
    rep.required_rank = order * static_cast<int>(u_data[0].size());
    rep.achieved_rank = H.rank();
    rep.singular_values.assign(H.singular_values().data(),
                               H.singular_values().data() + H.singular_values().size());
    rep.pass = rep.achieved_rank == rep.required_rank;
    return rep;
}

/// Numerical-rank report for a data Hankel matrix against the expected
/// behavioral dimension L * n_u + n_x.
struct RankReport {
    int rank = 0;
    int expected = 0;
    double gap_ratio = 0.0;  // sigma_rank / sigma_{rank+1}
    bool matches = false;
    std::vector<double> singular_values;
};

inline RankReport behavior_rank(const HankelMatrix& H, int n_x) {
    RankReport rep;
    rep.rank = H.rank();
    rep.expected = H.window_length() * H.input_dim() + n_x;
    const auto& s = H.singular_values();
    rep.singular_values.assign(s.data(), s.data() + s.size());
    if (rep.rank >= 1 && rep.rank < s.size() && s[rep.rank] > 0.0)
        rep.gap_ratio = s[rep.rank - 1] / s[rep.rank];
    else if (rep.rank >= 1)
        rep.gap_ratio = std::numeric_limits<double>::infinity();
    rep.matches = rep.rank == rep.expected;
    return rep;
}

struct LiftResult {
    Vector g;        // minimum-norm coefficient vector H^+ w
    double residual; // |H g - w|
};

/// Minimum-norm coefficient lift of a stacked window; the residual certifies
/// column-space membership (relative residual ~ 0 on the behavior).
inline LiftResult pinv_lift(const HankelMatrix& H, const Vector& w) {
    if (w.size() != H.matrix().rows()) throw std::invalid_argument("pinv_lift: size mismatch");
    LiftResult r;
    r.g = H.pinv() * w;
    r.residual = (H.matrix() * r.g - w).norm();
    return r;
}

/// Canonical lift nu = (H^+)# mu of a finite-support external measure:
/// atomwise coefficient vectors with weights preserved. Every atom must lie
/// on the behavior to within rel_tol * |w|.
inline CoefficientMeasure factorize_measure(const HankelMatrix& H, const DiscreteDistribution& mu,
                                            double rel_tol = 1e-9) {
    std::vector<DiscreteDistribution::Atom> atoms;
    atoms.reserve(mu.size());
    for (int i = 0; i < mu.size(); ++i) {
        const auto& a = mu.atoms()[i];
        LiftResult lift = pinv_lift(H, a.point);
        if (lift.residual > rel_tol * std::max(1e-300, a.point.norm()))
            throw std::invalid_argument("factorize_measure: atom " + std::to_string(i) +
                                        " is off the behavior");
        atoms.push_back({a.weight, std::move(lift.g)});
    }
    return CoefficientMeasure(std::move(atoms));
}

/// Pushforward (H)# nu: atomwise w = H g. Supported on the behavior by
/// construction.
inline DiscreteDistribution pushforward_measure(const HankelMatrix& H,
                                                const CoefficientMeasure& nu) {
    std::vector<DiscreteDistribution::Atom> atoms;
    atoms.reserve(nu.size());
    for (const auto& a : nu.atoms()) {
        if (a.point.size() != H.matrix().cols())
            throw std::invalid_argument("pushforward_measure: coefficient length mismatch");
        atoms.push_back({a.weight, H.matrix() * a.point});
    }
    return DiscreteDistribution(std::move(atoms));
}

/// Relative projection residual of the mean trajectory onto the behavior:
/// |wbar - H H^+ wbar| / max(1, |wbar|). Zero because every mean of a
/// behavioral measure lies in the behavior subspace.
inline double mean_behavior_residual(const DiscreteDistribution& mu, const HankelMatrix& H) {
    const Vector wbar = mu.mean();
    return (wbar - H.matrix() * (H.pinv() * wbar)).norm() / std::max(1.0, wbar.norm());
}

namespace detail {

inline Matrix weighted_covariance(const DiscreteDistribution& mu) {
    const Vector mean = mu.mean();
    Matrix cov = Matrix::Zero(mu.dim(), mu.dim());
    for (const auto& a : mu.atoms()) {
        const Vector d = a.point - mean;
        cov.noalias() += a.weight * d * d.transpose();
    }
    return cov;
}

}  // namespace detail

/// Relative Frobenius residual of the second-moment transfer
/// Cov[w] = H Cov[g] H'. Returns 0 by convention when both sides vanish
/// (e.g. a Dirac measure).
inline double covariance_transfer_residual(const DiscreteDistribution& mu, const HankelMatrix& H,
                                           double rel_tol = 1e-9) {
    const CoefficientMeasure nu = factorize_measure(H, mu, rel_tol);
    const Matrix cov_w = detail::weighted_covariance(mu);
    const Matrix cov_g = detail::weighted_covariance(nu);
    const Matrix transferred = H.matrix() * cov_g * H.matrix().transpose();
    const double denom = cov_w.norm();
    const double num = (cov_w - transferred).norm();
    if (denom == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / denom;
}

}  // namespace bmt
