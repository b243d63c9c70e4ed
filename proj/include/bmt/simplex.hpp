#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bmt/system.hpp"

namespace bmt {

/// Standard-form linear program min c'x s.t. Ax = b, x >= 0, with A stored
/// column-sparse. Occupation LPs have at most two nonzeros per column, so
/// sparse columns keep pricing linear in the number of nonzeros while the
/// basis inverse stays dense.
struct SparseLp {
    int num_rows = 0;
    std::vector<std::vector<std::pair<int, double>>> cols;  // cols[j] = {(row, value)}
    Vector b;
    Vector c;

    int num_cols() const { return static_cast<int>(cols.size()); }

    static SparseLp create(int rows, int columns) {
        SparseLp lp;
        lp.num_rows = rows;
        lp.cols.resize(columns);
        lp.b = Vector::Zero(rows);
        lp.c = Vector::Zero(columns);
        return lp;
    }

    void add_entry(int row, int col, double value) {
        if (value != 0.0) cols[col].emplace_back(row, value);
    }
};

struct SimplexOptions {
    double rc_tol = 1e-10;        // reduced-cost optimality threshold
    double pivot_tol = 1e-11;     // minimum acceptable pivot magnitude
    double feas_tol = 1e-9;       // phase-1 infeasibility threshold
    long max_iterations = 1000000;
    int refactor_every = 2000;
    std::vector<int> initial_basis;  // optional crash basis (column ids)
};

enum class LpStatus { Optimal, IterationLimit };

struct SimplexSolution {
    Vector x;
    double objective = 0.0;
    Vector duals;            // per row; 0 on presolve-eliminated rows
    std::vector<int> basis;  // optimal basis column ids
    long iterations = 0;
    LpStatus status = LpStatus::Optimal;
};

/// Infeasible primal; carries a Farkas certificate y with y'b > 0 and
/// y'A <= 0, so no nonnegative x can satisfy Ax = b.
class InfeasibleLp : public std::runtime_error {
public:
    InfeasibleLp(std::string msg, Vector cert)
        : std::runtime_error(std::move(msg)), certificate(std::move(cert)) {}
    Vector certificate;
};

class UnboundedLp : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Record of one implied-nonnegative singleton substitution, replayed in
/// reverse order during post-solve.
struct Substitution {
    int row;
    int col;
    double coef;      // a_{row,col}
    double cost;      // c_col at elimination time
    std::vector<std::pair<int, double>> row_entries;  // other (col, a) in the row
};

class SimplexCore {
public:
    SimplexCore(const SparseLp& lp, const SimplexOptions& opts) : lp_(lp), opts_(opts) {}

    SimplexSolution solve() {
        presolve();
        SimplexSolution sol;
        sol.x = Vector::Zero(lp_.num_cols());
        sol.duals = Vector::Zero(lp_.num_rows);
        if (!reduced_rows_.empty()) {
            run_simplex();
            for (int jr = 0; jr < ncols_; ++jr) sol.x[col_ids_[jr]] = x_value_[jr];
            for (int ir = 0; ir < static_cast<int>(reduced_rows_.size()); ++ir)
                sol.duals[reduced_rows_[ir]] = duals_[ir];
            for (int id : basis_)
                if (id < ncols_) sol.basis.push_back(col_ids_[id]);
            sol.iterations = iterations_;
            sol.status = status_;
        } else {
            // Everything eliminated; remaining free columns sit at zero,
            // which is only optimal when no residual cost is negative.
            for (int j = 0; j < lp_.num_cols(); ++j)
                if (!col_removed_[j] && lp_.c[j] < -opts_.rc_tol)
                    throw UnboundedLp("lp: cost ray after presolve");
        }
        postsolve(sol);
        double obj = 0.0;
        for (int j = 0; j < lp_.num_cols(); ++j) obj += lp_.c[j] * sol.x[j];
        sol.objective = obj;
        return sol;
    }

private:
    // ----- presolve ------------------------------------------------------

    void presolve() {
        const int m = lp_.num_rows;
        const int n = lp_.num_cols();
        row_removed_.assign(m, false);
        col_removed_.assign(n, false);
        cost_ = lp_.c;
        rhs_ = lp_.b;

        // Row-major view of the active entries.
        rows_.assign(m, {});
        for (int j = 0; j < n; ++j)
            for (const auto& [i, v] : lp_.cols[j]) rows_[i].emplace_back(j, v);

        bool changed = true;
        while (changed) {
            changed = false;
            for (int i = 0; i < m; ++i) {
                if (row_removed_[i]) continue;
                int active = 0, positive = 0, negative = 0;
                for (const auto& [j, v] : rows_[i]) {
                    if (col_removed_[j]) continue;
                    ++active;
                    if (v > 0.0) ++positive;
                    if (v < 0.0) ++negative;
                }
                if (active == 0) {
                    if (std::fabs(rhs_[i]) > opts_.feas_tol) certify_row(i, rhs_[i] > 0 ? 1.0 : -1.0);
                    row_removed_[i] = true;
                    changed = true;
                    continue;
                }
                // One-signed row: rhs 0 forces every variable in it to zero;
                // rhs of the opposite sign is an immediate Farkas row.
                if (negative == 0 && rhs_[i] < -opts_.feas_tol) certify_row(i, -1.0);
                if (positive == 0 && rhs_[i] > opts_.feas_tol) certify_row(i, 1.0);
                if ((negative == 0 || positive == 0) && rhs_[i] == 0.0) {
                    for (const auto& [j, v] : rows_[i])
                        if (!col_removed_[j] && v != 0.0) col_removed_[j] = true;
                    row_removed_[i] = true;
                    changed = true;
                    continue;
                }
                // Implied-nonnegative singleton: x_j appears only here, the
                // rhs is zero and every other sign opposes a_{ij}; then
                // x_j = -(1/a_ij) sum_k a_ik x_k >= 0 automatically and the
                // row can be substituted away (cost folded into the rest).
                if (rhs_[i] == 0.0) {
                    for (const auto& [j, v] : rows_[i]) {
                        if (col_removed_[j] || v == 0.0) continue;
                        if (active_col_count(j) != 1) continue;
                        bool ok = true;
                        for (const auto& [k, w] : rows_[i]) {
                            if (k == j || col_removed_[k] || w == 0.0) continue;
                            if ((v > 0.0 && w > 0.0) || (v < 0.0 && w < 0.0)) ok = false;
                        }
                        if (!ok) continue;
                        Substitution sub;
                        sub.row = i;
                        sub.col = j;
                        sub.coef = v;
                        sub.cost = cost_[j];
                        for (const auto& [k, w] : rows_[i])
                            if (k != j && !col_removed_[k] && w != 0.0) {
                                sub.row_entries.emplace_back(k, w);
                                cost_[k] -= cost_[j] * w / v;
                            }
                        subs_.push_back(std::move(sub));
                        col_removed_[j] = true;
                        row_removed_[i] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }

        for (int i = 0; i < m; ++i)
            if (!row_removed_[i]) reduced_rows_.push_back(i);
        for (int j = 0; j < n; ++j)
            if (!col_removed_[j]) col_ids_.push_back(j);

        // Build the reduced column-sparse matrix.
        std::vector<int> row_map(m, -1);
        for (int ir = 0; ir < static_cast<int>(reduced_rows_.size()); ++ir)
            row_map[reduced_rows_[ir]] = ir;
        ncols_ = static_cast<int>(col_ids_.size());
        mrows_ = static_cast<int>(reduced_rows_.size());
        acols_.assign(ncols_, {});
        red_c_ = Vector::Zero(ncols_);
        red_b_ = Vector::Zero(mrows_);
        for (int jr = 0; jr < ncols_; ++jr) {
            red_c_[jr] = cost_[col_ids_[jr]];
            for (const auto& [i, v] : lp_.cols[col_ids_[jr]])
                if (row_map[i] >= 0) acols_[jr].emplace_back(row_map[i], v);
        }
        for (int ir = 0; ir < mrows_; ++ir) red_b_[ir] = rhs_[reduced_rows_[ir]];

        // Normalize to b >= 0 so the artificial basis is feasible.
        row_sign_.assign(mrows_, 1.0);
        for (int ir = 0; ir < mrows_; ++ir)
            if (red_b_[ir] < 0.0) {
                row_sign_[ir] = -1.0;
                red_b_[ir] = -red_b_[ir];
            }
        for (auto& col : acols_)
            for (auto& [ir, v] : col) v *= row_sign_[ir];
    }

    int active_col_count(int j) const {
        int cnt = 0;
        for (const auto& [i, v] : lp_.cols[j])
            if (!row_removed_[i] && v != 0.0) ++cnt;
        return cnt;
    }

    [[noreturn]] void certify_row(int row, double sign) {
        Vector y = Vector::Zero(lp_.num_rows);
        y[row] = sign;
        throw InfeasibleLp("lp: infeasible row " + std::to_string(row), std::move(y));
    }

    // ----- revised simplex on the reduced problem ------------------------

    void run_simplex() {
        binv_ = Matrix::Identity(mrows_, mrows_);
        basis_.resize(mrows_);
        xb_ = red_b_;

        bool need_phase1 = true;
        if (try_crash_basis()) need_phase1 = false;

        if (need_phase1) {
            for (int ir = 0; ir < mrows_; ++ir) basis_[ir] = ncols_ + ir;  // artificials
            binv_.setIdentity();
            xb_ = red_b_;
            phase_ = 1;
            iterate();
            double infeas = 0.0;
            for (int ir = 0; ir < mrows_; ++ir)
                if (basis_[ir] >= ncols_) infeas += xb_[ir];
            if (infeas > opts_.feas_tol * std::max(1.0, red_b_.lpNorm<Eigen::Infinity>())) {
                // Farkas certificate from the phase-1 duals.
                Vector y_red = binv_.transpose() * phase1_costs();
                Vector y = Vector::Zero(lp_.num_rows);
                for (int ir = 0; ir < mrows_; ++ir)
                    y[reduced_rows_[ir]] = y_red[ir] * row_sign_[ir];
                throw InfeasibleLp("lp: infeasible (phase 1)", std::move(y));
            }
            evict_artificials();
        }

        phase_ = 2;
        iterate();

        x_value_.assign(ncols_, 0.0);
        for (int ir = 0; ir < mrows_; ++ir)
            if (basis_[ir] < ncols_) x_value_[basis_[ir]] = std::max(0.0, xb_[ir]);
        Vector cb(mrows_);
        for (int ir = 0; ir < mrows_; ++ir) cb[ir] = basic_cost(basis_[ir]);
        Vector y_red = binv_.transpose() * cb;
        duals_.resize(mrows_);
        for (int ir = 0; ir < mrows_; ++ir) duals_[ir] = y_red[ir] * row_sign_[ir];
    }

    Vector phase1_costs() const {
        Vector cb(mrows_);
        for (int ir = 0; ir < mrows_; ++ir) cb[ir] = basis_[ir] >= ncols_ ? 1.0 : 0.0;
        return cb;
    }

    double basic_cost(int id) const { return id < ncols_ ? red_c_[id] : 0.0; }

    bool try_crash_basis() {
        if (opts_.initial_basis.empty()) return false;
        std::vector<int> ids;
        for (int full_id : opts_.initial_basis) {
            if (full_id < 0 || full_id >= lp_.num_cols() || col_removed_[full_id]) continue;
            const auto it = std::lower_bound(col_ids_.begin(), col_ids_.end(), full_id);
            if (it != col_ids_.end() && *it == full_id)
                ids.push_back(static_cast<int>(it - col_ids_.begin()));
        }
        if (static_cast<int>(ids.size()) != mrows_) return false;
        Matrix B = Matrix::Zero(mrows_, mrows_);
        for (int k = 0; k < mrows_; ++k)
            for (const auto& [ir, v] : acols_[ids[k]]) B(ir, k) = v;
        Eigen::FullPivLU<Matrix> lu(B);
        if (!lu.isInvertible()) return false;
        Matrix Binv = lu.inverse();
        Vector xb = Binv * red_b_;
        if ((xb.array() < -1e-9).any()) return false;
        binv_ = std::move(Binv);
        basis_ = ids;
        xb_ = xb.cwiseMax(0.0);
        return true;
    }

    void iterate() {
        std::vector<char> in_basis(ncols_ + mrows_, 0);
        for (int id : basis_) in_basis[id] = 1;
        int degenerate_streak = 0;
        bool bland = false;
        long since_refactor = 0;

        while (true) {
            if (iterations_ >= opts_.max_iterations) {
                status_ = LpStatus::IterationLimit;
                throw std::runtime_error("lp: simplex iteration cap reached");
            }
            Vector cb(mrows_);
            for (int ir = 0; ir < mrows_; ++ir)
                cb[ir] = phase_ == 1 ? (basis_[ir] >= ncols_ ? 1.0 : 0.0) : basic_cost(basis_[ir]);
            const Vector y = binv_.transpose() * cb;

            int enter = -1;
            double best = -opts_.rc_tol;
            for (int jr = 0; jr < ncols_; ++jr) {
                if (in_basis[jr]) continue;
                double cj = phase_ == 1 ? 0.0 : red_c_[jr];
                for (const auto& [ir, v] : acols_[jr]) cj -= y[ir] * v;
                if (cj < best) {
                    best = cj;
                    enter = jr;
                    if (bland) break;  // first improving index suffices
                }
            }
            if (enter < 0) return;  // optimal for this phase

            // Direction through the basis inverse; entering columns are
            // sparse so this is a few column combinations.
            Vector d = Vector::Zero(mrows_);
            for (const auto& [ir, v] : acols_[enter]) d.noalias() += v * binv_.col(ir);

            int leave = -1;
            double theta = std::numeric_limits<double>::infinity();
            for (int ir = 0; ir < mrows_; ++ir) {
                if (d[ir] > opts_.pivot_tol) {
                    const double ratio = xb_[ir] / d[ir];
                    if (ratio < theta - 1e-15 ||
                        (ratio < theta + 1e-15 && (leave < 0 || basis_[ir] < basis_[leave]))) {
                        theta = ratio;
                        leave = ir;
                    }
                }
            }
            if (leave < 0) {
                if (phase_ == 1) throw std::runtime_error("lp: phase-1 ray (numerical failure)");
                throw UnboundedLp("lp: unbounded objective");
            }
            if (std::fabs(d[leave]) < 1e-7 && since_refactor > 0) {
                refactorize();
                since_refactor = 0;
                continue;  // re-price with a clean inverse
            }

            // Pivot: update basis, basic values, and the dense inverse.
            theta = std::max(theta, 0.0);
            xb_ -= theta * d;
            xb_ = xb_.cwiseMax(0.0);
            xb_[leave] = theta;
            in_basis[basis_[leave]] = 0;
            in_basis[enter] = 1;
            basis_[leave] = enter;
            const double piv = d[leave];
            binv_.row(leave) /= piv;
            for (int ir = 0; ir < mrows_; ++ir)
                if (ir != leave && d[ir] != 0.0) binv_.row(ir) -= d[ir] * binv_.row(leave);

            ++iterations_;
            ++since_refactor;
            if (theta <= 1e-13) {
                if (++degenerate_streak > 50) bland = true;  // anti-cycling rule
            } else {
                degenerate_streak = 0;
                bland = false;
            }
            if (since_refactor >= opts_.refactor_every) {
                refactorize();
                since_refactor = 0;
            }
        }
    }

    void refactorize() {
        Matrix B = Matrix::Zero(mrows_, mrows_);
        for (int k = 0; k < mrows_; ++k) {
            if (basis_[k] < ncols_) {
                for (const auto& [ir, v] : acols_[basis_[k]]) B(ir, k) = v;
            } else {
                B(basis_[k] - ncols_, k) = 1.0;
            }
        }
        binv_ = B.partialPivLu().inverse();
        xb_ = (binv_ * red_b_).cwiseMax(0.0);
    }

    /// After phase 1, pivot zero-level artificials out of the basis; rows
    /// where no structural pivot exists are linearly dependent and dropped.
    void evict_artificials() {
        std::vector<int> redundant;
        for (int ir = 0; ir < mrows_; ++ir) {
            if (basis_[ir] < ncols_) continue;
            std::vector<char> in_basis(ncols_, 0);
            for (int id : basis_)
                if (id < ncols_) in_basis[id] = 1;
            int pivot_col = -1;
            for (int jr = 0; jr < ncols_ && pivot_col < 0; ++jr) {
                if (in_basis[jr]) continue;
                double val = 0.0;
                for (const auto& [r, v] : acols_[jr]) val += binv_(ir, r) * v;
                if (std::fabs(val) > 1e-8) pivot_col = jr;
            }
            if (pivot_col < 0) {
                redundant.push_back(ir);
                continue;
            }
            Vector d = Vector::Zero(mrows_);
            for (const auto& [r, v] : acols_[pivot_col]) d.noalias() += v * binv_.col(r);
            basis_[ir] = pivot_col;
            const double piv = d[ir];
            binv_.row(ir) /= piv;
            for (int r = 0; r < mrows_; ++r)
                if (r != ir && d[r] != 0.0) binv_.row(r) -= d[r] * binv_.row(ir);
            xb_[ir] = 0.0;
        }
        if (redundant.empty()) return;

        // Drop dependent rows and rebuild the reduced problem around them.
        std::vector<char> drop(mrows_, 0);
        for (int ir : redundant) drop[ir] = 1;
        std::vector<int> keep;
        for (int ir = 0; ir < mrows_; ++ir)
            if (!drop[ir]) keep.push_back(ir);
        std::vector<int> new_rows;
        Vector new_b(keep.size());
        std::vector<double> new_sign;
        for (std::size_t k = 0; k < keep.size(); ++k) {
            new_rows.push_back(reduced_rows_[keep[k]]);
            new_b[static_cast<Eigen::Index>(k)] = red_b_[keep[k]];
            new_sign.push_back(row_sign_[keep[k]]);
        }
        std::vector<int> old_to_new(mrows_, -1);
        for (std::size_t k = 0; k < keep.size(); ++k) old_to_new[keep[k]] = static_cast<int>(k);
        for (auto& col : acols_) {
            std::vector<std::pair<int, double>> filtered;
            for (const auto& [ir, v] : col)
                if (old_to_new[ir] >= 0) filtered.emplace_back(old_to_new[ir], v);
            col = std::move(filtered);
        }
        reduced_rows_ = std::move(new_rows);
        red_b_ = std::move(new_b);
        row_sign_ = std::move(new_sign);
        mrows_ = static_cast<int>(reduced_rows_.size());

        std::vector<int> new_basis;
        for (int ir = 0; ir < static_cast<int>(basis_.size()); ++ir)
            if (!drop[ir]) new_basis.push_back(basis_[ir]);
        basis_ = std::move(new_basis);
        binv_.resize(mrows_, mrows_);
        refactorize();
    }

    // ----- post-solve -----------------------------------------------------

    void postsolve(SimplexSolution& sol) const {
        // Replay singleton substitutions newest-first; each one reconstructs
        // its variable from already-known values and back-fills its dual.
        for (auto it = subs_.rbegin(); it != subs_.rend(); ++it) {
            double acc = 0.0;
            for (const auto& [k, w] : it->row_entries) acc += w * sol.x[k];
            sol.x[it->col] = -acc / it->coef;
            sol.duals[it->row] = it->cost / it->coef;
        }
    }

    const SparseLp& lp_;
    const SimplexOptions& opts_;

    // presolve state
    std::vector<bool> row_removed_, col_removed_;
    std::vector<std::vector<std::pair<int, double>>> rows_;
    std::vector<detail::Substitution> subs_;
    Vector cost_, rhs_;
    std::vector<int> reduced_rows_, col_ids_;

    // reduced problem
    int mrows_ = 0, ncols_ = 0;
    std::vector<std::vector<std::pair<int, double>>> acols_;
    Vector red_b_, red_c_;
    std::vector<double> row_sign_;

    // simplex state
    Matrix binv_;
    Vector xb_;
    std::vector<int> basis_;
    std::vector<double> x_value_;
    Vector duals_;
    int phase_ = 1;
    long iterations_ = 0;
    LpStatus status_ = LpStatus::Optimal;
};

}  // namespace detail

/// Solves a standard-form LP with a dense revised simplex (explicit basis
/// inverse, sparse column pricing). Dantzig pricing switches to Bland's rule
/// after a degenerate stall, which restores the anti-cycling guarantee while
/// keeping typical runs short. Throws InfeasibleLp/UnboundedLp.
inline SimplexSolution solve_lp(const SparseLp& lp, const SimplexOptions& opts = {}) {
    detail::SimplexCore core(lp, opts);
    return core.solve();
}

}  // namespace bmt
